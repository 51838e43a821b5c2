#pragma once

#include <string>
#include <vector>

#include "pq/model.hpp"
#include "pq/quant.hpp"
#include "pq/search.hpp"
#include "pq/tune.hpp"

namespace pq {

// Flat key = value configuration with section headers. Unknown sections or
// keys are rejected; parse(serialize(cfg)) round-trips losslessly.
struct RunConfig {
    // [run]
    uint64_t seed = 1;
    std::string out_dir = "runs/out";
    int threads = 1;

    // [data]
    std::string corpus = "data/corpus.txt";
    double split_fraction = 0.9;
    int64_t calib_sequences = 16;
    int64_t eval_sequences = 10;
    int64_t eval_len = 128;

    // [model]
    std::string arch = "llama-ish";  // or "gpt-ish"
    int64_t vocab_size = kVocabSize;
    int64_t d_model = 128;
    int64_t n_layers = 4;
    int64_t n_heads = 4;
    int64_t d_ff = 384;
    int64_t max_seq_len = 512;
    double norm_eps = 1e-5;

    // [train]
    int64_t train_steps = 1500;
    int64_t train_batch = 4;
    int64_t train_seq_len = 128;
    double train_lr = 3e-4;
    double grad_clip = 1.0;

    // [quant]
    int act_bits = 8;
    std::string act_symmetry = "asymmetric";
    std::string act_granularity = "per-tensor";  // or "per-token"
    std::string act_range = "static";            // or "dynamic"
    int weight_bits = 8;
    int64_t weight_group_size = 128;
    bool smoothquant = false;
    double smooth_alpha = 0.8;

    // [search]
    int64_t search_max_len = 16;
    double tau = 0.5;
    std::string seeds = "bos,newline";
    int64_t candidate_batch = 32;
    int64_t search_text_len = 128;
    std::string search_range = "dynamic";  // objective range mode

    // [tune]
    double lambda = 0.01;
    int64_t epochs = 2;
    double tune_lr = 1e-3;
    int64_t tune_batch = 4;
    int64_t tune_seq_len = 128;
    int64_t sequences_per_epoch = 256;

    static RunConfig parse_string(const std::string& text);
    static RunConfig parse_file(const std::string& path);
    std::string serialize() const;
    void validate() const;

    TransformerConfig model_config() const;
    QuantProfile quant_profile() const;
    TrainOptions train_options() const;
    SearchConfig search_config() const;  // stats wired by the caller
    TuneConfig tune_config() const;
    TokenSeq seed_tokens() const;
};

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace pq
