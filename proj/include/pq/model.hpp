#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "pq/autodiff.hpp"
#include "pq/data.hpp"
#include "pq/quant.hpp"
#include "pq/taps.hpp"
#include "pq/tensor.hpp"

namespace pq {

enum class NormStyle { pre_rms, post_ln };
enum class Activation { swiglu, gelu };

struct TransformerConfig {
    int64_t vocab_size = kVocabSize;
    int64_t d_model = 128;
    int64_t n_layers = 4;
    int64_t n_heads = 4;
    int64_t d_ff = 384;
    int64_t max_seq_len = 512;
    NormStyle norm_style = NormStyle::pre_rms;
    Activation activation = Activation::swiglu;
    float norm_eps = 1e-5f;

    int64_t head_dim() const { return d_model / n_heads; }
    void validate() const;

    // Architecture presets: pre-RMSNorm + SwiGLU vs post-LayerNorm + GELU.
    static TransformerConfig llama_ish();
    static TransformerConfig gpt_ish();
};

enum class PrefixProvenance : uint8_t { greedy_init = 1, tuned = 2, random_init = 3 };

// Per-layer trainable key/value blocks prepended at every attention; columns
// are head-major so column slice h*head_dim..(h+1)*head_dim belongs to head h.
struct PrefixCache {
    std::vector<Tensor> k;  // per layer [m, d_model]
    std::vector<Tensor> v;
    PrefixProvenance provenance = PrefixProvenance::greedy_init;

    int64_t len() const { return k.empty() ? 0 : k[0].dim(0); }
    int64_t layers() const { return static_cast<int64_t>(k.size()); }
};

// Append-only per-layer K/V storage for decoded tokens. Row index equals
// absolute position, so a cache seeded from a prefix starts at prefix length.
struct KVCache {
    std::vector<Tensor> k;  // per layer [len, d_model]; empty tensors when len == 0
    std::vector<Tensor> v;
    int64_t len = 0;

    explicit KVCache(int64_t n_layers) : k(static_cast<size_t>(n_layers)), v(static_cast<size_t>(n_layers)) {}
    static KVCache from_prefix(const PrefixCache& prefix);
    int64_t layers() const { return static_cast<int64_t>(k.size()); }
};

// Weight leaves ready for graph use (possibly migrated + fake-quantized).
struct PreparedWeights {
    std::map<std::string, ag::Value> leaves;
    const ag::Value& get(const std::string& name) const;
};

struct TransformerModel {
    TransformerConfig config;
    std::map<std::string, Tensor> weights;

    TransformerModel() = default;
    TransformerModel(const TransformerModel& o) : config(o.config), weights(o.weights) {}
    TransformerModel(TransformerModel&& o) noexcept
        : config(o.config), weights(std::move(o.weights)) {}
    TransformerModel& operator=(const TransformerModel& o) {
        config = o.config;
        weights = o.weights;
        fp_cache_.reset();
        return *this;
    }
    TransformerModel& operator=(TransformerModel&& o) noexcept {
        config = o.config;
        weights = std::move(o.weights);
        fp_cache_.reset();
        return *this;
    }

    const Tensor& weight(const std::string& name) const;
    uint64_t weights_checksum() const;

    // Cached FP leaf set (weights are frozen after training).
    std::shared_ptr<const PreparedWeights> prepared_fp() const;

private:
    mutable std::shared_ptr<const PreparedWeights> fp_cache_;
    mutable std::mutex fp_mutex_;
};

// Canonical weight-tensor names for a config, in construction order.
std::vector<std::string> model_weight_names(const TransformerConfig& cfg);

// Fresh weight tensors, seeded init; requires_grad chooses trainable leaves.
PreparedWeights init_weights(const TransformerConfig& cfg, uint64_t seed, bool requires_grad);

// Builds the (optionally migrated and weight-quantized) leaf set for a
// deployment profile. Migration needs calibration stats for channel absmax;
// quantize_weights=false stops after migration (used by calibration pass 2).
PreparedWeights prepare_weights(const TransformerModel& model, const QuantProfile* profile,
                                const CalibrationStats* stats, bool quantize_weights = true);

struct CaptureFlags {
    bool block_inputs = false;
    bool quant_taps = false;
    bool attention = false;
    bool kv = false;
    bool logits = true;
    bool graph_taps = false;  // keep graph refs to (pre, post) quant pairs
};

// Graph-side prefix: per-layer K/V leaves, trainable when requires_grad.
struct PrefixValues {
    std::vector<ag::Value> k;
    std::vector<ag::Value> v;
    int64_t len = 0;

    static PrefixValues from_cache(const PrefixCache& cache, bool requires_grad = false);
    static PrefixValues from_kvcache(const KVCache& cache);
    PrefixCache to_cache(PrefixProvenance prov) const;
};

struct SeqInput {
    const TokenSeq* tokens = nullptr;
    const PrefixValues* prefix = nullptr;  // may be null
    int64_t literal_prefix_rows = 0;       // leading rows flagged as prefix in the tap record
};

struct QuantTapPair {
    std::string name;
    ag::Value pre;
    ag::Value post;
};

struct SeqOutput {
    TapRecord taps;
    std::vector<Tensor> k_out;  // per layer [T, d_model] when capture.kv
    std::vector<Tensor> v_out;
    std::vector<QuantTapPair> quant_pairs;  // when capture.graph_taps
};

struct BatchResult {
    ag::Value logits;  // [B*T, vocab] when capture.logits, null otherwise
    std::vector<SeqOutput> seqs;
    int64_t seq_len = 0;

    ag::Value logits_for(int64_t b) const;  // row block of one sequence
};

// Causal forward over a batch of equal-length sequences with equal prefix
// lengths. Content positions attend to all prefix rows plus their causal
// past; position ids are shifted by the prefix length. When quant is set the
// tapped activations are fake-quantized before the consuming projections.
BatchResult forward_batch(const TransformerModel& model, const PreparedWeights& prepared,
                          const std::vector<SeqInput>& inputs, const QuantProfile* quant,
                          const CalibrationStats* stats, const CaptureFlags& capture);

struct ForwardResult {
    ag::Value logits;
    TapRecord taps;
    std::vector<Tensor> k_out;
    std::vector<Tensor> v_out;
};

ForwardResult forward(const TransformerModel& model, const TokenSeq& tokens,
                      const PrefixCache* prefix = nullptr, const QuantProfile* quant = nullptr,
                      const CalibrationStats* stats = nullptr, CaptureFlags capture = {});

// Incremental decoding; appends the new tokens' K/V to the cache and returns
// their logits. Empty input is a no-op returning an empty tensor.
Tensor decode_step(const TransformerModel& model, KVCache& cache, const TokenSeq& new_tokens,
                   const QuantProfile* quant = nullptr, const CalibrationStats* stats = nullptr);

// Clean FP forward over the prompt; the captured per-layer K/V become the
// prefix (provenance greedy_init).
PrefixCache extract_prefix_cache(const TransformerModel& model, const TokenSeq& prompt);

// exp(mean next-token cross entropy) over content positions.
double perplexity(const TransformerModel& model, const TokenSeq& text,
                  const PrefixCache* prefix = nullptr, const QuantProfile* quant = nullptr,
                  const CalibrationStats* stats = nullptr);

struct TrainOptions {
    int64_t steps = 2000;
    int64_t batch_size = 4;
    int64_t seq_len = 128;
    float lr = 3e-4f;
    float grad_clip = 1.0f;  // global norm; 0 disables
    uint64_t seed = 1;
    int64_t log_every = 50;
    bool verbose = false;
};

struct TrainResult {
    TransformerModel model;
    std::vector<float> loss_history;
    double final_loss = 0.0;        // mean loss over the last 5% of steps
    double unigram_entropy = 0.0;   // corpus baseline the final loss should beat
};

// Trains the frozen base model in-repo (Adam, cosine decay); deterministic
// for a fixed seed. Throws numeric_error on divergence.
TrainResult train_toy(const TransformerConfig& cfg, const Corpus& corpus, const TrainOptions& opt);

// Calibration: running per-channel min/max per tap over FP forwards of the
// calibration sequences (content positions only when a prefix is present).
// With smooth_alpha > 0 a second pass measures the migrated model.
CalibrationStats calibrate(const TransformerModel& model, const std::vector<TokenSeq>& texts,
                           const QuantProfile& profile, const PrefixCache* prefix = nullptr);

}  // namespace pq
