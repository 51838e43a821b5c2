#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pq/data.hpp"
#include "pq/model.hpp"
#include "pq/quant.hpp"
#include "pq/search.hpp"
#include "pq/tune.hpp"

namespace pq {

// Per-layer order statistics of |activation| at the block inputs, averaged
// across samples. Content positions only.
struct OutlierLayerStats {
    int64_t layer = 0;
    double top1 = 0.0;
    double top2 = 0.0;
    double top3 = 0.0;
    double p90 = 0.0;     // 90th percentile, nearest-rank
    double median = 0.0;  // 50th percentile, nearest-rank
};

struct OutlierReport {
    std::vector<OutlierLayerStats> layers;
    int64_t samples = 0;
    int64_t seq_len = 0;
    std::string prefix_provenance;  // "none", "greedy-init", "tuned", "random-init"
};

// layer = -1 sweeps all layers; the default tap is the input to the last
// transformer block.
OutlierReport outlier_stats(const TransformerModel& model, const std::vector<TokenSeq>& texts,
                            const PrefixCache* prefix, int64_t layer);

// Order statistics of one |value| sample set, nearest-rank percentiles.
OutlierLayerStats order_stats_of(std::vector<float> magnitudes);

struct SinkHeadStats {
    int64_t layer = 0;
    int64_t head = 0;
    double prefix_mass = 0.0;         // mean attention mass on prefix columns
    double first_content_mass = 0.0;  // mean mass on the first content column
    double entropy = 0.0;             // entropy of the mean attention row (nats)
};

struct SinkReport {
    std::vector<SinkHeadStats> heads;
    double mean_prefix_mass = 0.0;
    double mean_first_content_mass = 0.0;
    int64_t prefix_len = 0;
    int64_t ctx_len = 0;              // prefix + content columns
    double uniform_baseline = 0.0;    // prefix_len / ctx_len
};

// Core computation from captured attention; testable on synthetic records.
SinkReport sink_from_taps(const TapRecord& taps);

SinkReport sink_report(const TransformerModel& model, const TokenSeq& text,
                       const PrefixCache* prefix);

struct AblationArm {
    std::string name;
    double lq = 0.0;   // conditional quantization error on held-out texts
    double ppl = 0.0;  // perplexity under the deployment profile
};

struct AblationTable {
    std::vector<AblationArm> arms;
    bool lq_monotone = true;
    std::string note;
};

struct AblationConfig {
    QuantProfile profile;           // deployment profile (per-arm calibration)
    QuantSpec lq_spec;              // spec for the conditional-error column
    TuneConfig tune;                // arms 3/4 run tune() with lambda 0 / lambda
    int64_t eval_texts = 5;
    int64_t eval_len = 128;
    int64_t calib_texts = 8;
    uint64_t seed = 1;
    const PrefixCache* greedy = nullptr;  // required
    const PrefixCache* tuned = nullptr;   // optional: reuse for the final arm
};

// Four arms: no prefix, greedy-init, +tuning with lambda=0, +quantization-
// aware loss. All arms share the held-out texts; monotone L_q decrease is a
// soft expectation recorded in the note.
AblationTable ablation_run(const TransformerModel& model, const Corpus& corpus,
                           const AblationConfig& cfg);

struct CostReport {
    double step1_seconds = 0.0;  // greedy search
    bool step1_present = false;
    double step2_seconds = 0.0;  // prefix tuning
    bool step2_present = false;
    std::string hardware;
};

CostReport cost_report(const SearchTrace* trace, const TuneResult* tune_log);

}  // namespace pq
