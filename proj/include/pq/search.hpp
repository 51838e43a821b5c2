#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pq/data.hpp"
#include "pq/model.hpp"
#include "pq/quant.hpp"

namespace pq {

// Greedy search configuration. Seed tokens count against max_len, so the
// budget always means "total prompt tokens".
struct SearchConfig {
    int64_t max_len = 16;
    double tau = 0.5;
    TokenSeq seed_tokens = {kBosToken, kNewlineToken};
    int64_t candidate_batch = 32;
    int64_t text_len = 128;
    uint64_t seed = 1;
    int threads = 1;
    bool fixed_text = false;  // debug: reuse one sampled text for every step
    QuantSpec quant;          // objective spec for the conditional error
    const CalibrationStats* stats = nullptr;  // static range mode only
};

struct SearchStep {
    int64_t step = 0;
    uint64_t text_id = 0;  // hash of the sampled text
    int32_t chosen_token = -1;
    double lq_before = 0.0;
    double lq_after = 0.0;
    bool accepted = false;
    double wall_ms = 0.0;
};

struct SearchTrace {
    std::vector<SearchStep> steps;
    std::string stop_reason;  // "threshold" or "max-length"
    TokenSeq prompt;
    double total_seconds = 0.0;
};

struct SearchResult {
    TokenSeq prompt;
    SearchTrace trace;
    PrefixCache prefix;  // empty (0 layers) when the prompt came out empty
};

// Map seed names ("bos", "newline", "space", single characters, numeric ids)
// to token ids; unknown names are a config error.
TokenSeq parse_seed_tokens(const std::vector<std::string>& names);

// The initial prompt of the greedy loop.
TokenSeq seed_prompt(const SearchConfig& cfg);

// L_q(text | prompt) with the prompt converted to a prefix cache; the
// baseline term of the acceptance rule. Empty prompt means no prefix.
double conditional_lq_for_prompt(const TransformerModel& model, const TokenSeq& text,
                                 const TokenSeq& prompt, const QuantSpec& spec,
                                 const CalibrationStats* stats);

// Conditional quantization error of the text under prompt + one extra
// candidate token, for every candidate; batched inference.
std::vector<double> score_candidates(const TransformerModel& model, const TokenSeq& text,
                                     const TokenSeq& current_prompt,
                                     const std::vector<int32_t>& candidates,
                                     const SearchConfig& cfg);

// Greedy early-stopped search over the embedding table: repeatedly draw a
// text, pick the argmin token (ties to the lowest id), accept while
// L_q(t|p, p*) < tau * L_q(t|p).
SearchResult greedy_search(const TransformerModel& model, const Corpus& corpus,
                           const SearchConfig& cfg);

}  // namespace pq
