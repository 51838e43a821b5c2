#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pq/data.hpp"
#include "pq/model.hpp"
#include "pq/quant.hpp"

namespace pq {

struct TuneConfig {
    double lambda = 0.01;
    int64_t epochs = 2;
    float lr = 1e-3f;
    int64_t batch_size = 4;
    int64_t seq_len = 128;
    int64_t sequences_per_epoch = 256;  // tuning-set size per epoch
    uint64_t seed = 1;
    QuantProfile quant;        // deployment profile the prefix is tuned for
    bool quant_enabled = true;
    const CalibrationStats* stats = nullptr;

    void validate() const;
};

struct TuneLossParts {
    ag::Value total;
    ag::Value l_pred;
    double l_q = 0.0;  // value of the quantization-error term (pre-lambda)
};

// L = L_pred + lambda * L_q over one batch. The prefix leaves are the only
// trainable nodes; scale/zero-point are resolved outside the graph (stop-grad)
// and the rounding inside q uses the straight-through estimator.
TuneLossParts tuning_loss(const TransformerModel& model, const PreparedWeights& prepared,
                          const std::vector<TokenSeq>& batch, PrefixValues& prefix,
                          const TuneConfig& cfg);

struct TuneResult {
    PrefixCache prefix;
    std::vector<double> loss_history;
    std::vector<double> lpred_history;
    std::vector<double> lq_history;
    bool aborted = false;
    std::string diagnostic;
    double seconds = 0.0;
};

// Gradient descent on the prefix K/V entries with frozen model weights.
// Returns the best-so-far prefix with a diagnostic if the loss goes
// non-finite.
TuneResult tune(const TransformerModel& model, const Corpus& corpus, const PrefixCache& init,
                const TuneConfig& cfg);

// Ablation baseline: entries drawn from a gaussian matched to the K/V
// moments of a reference forward pass.
PrefixCache random_init_prefix(const TransformerModel& model, int64_t m, uint64_t seed);

}  // namespace pq
