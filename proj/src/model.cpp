#include "pq/model.hpp"

#include <cmath>

#include "pq/errors.hpp"
#include "pq/rng.hpp"

namespace pq {

void TransformerConfig::validate() const {
    if (vocab_size < 2) throw config_error("vocab_size must be >= 2");
    if (d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1) {
        throw config_error("model dimensions must be positive");
    }
    if (d_model % n_heads != 0) {
        throw config_error("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                           std::to_string(n_heads));
    }
    if (max_seq_len < 2) throw config_error("max_seq_len must be >= 2");
    if (norm_eps <= 0.f) throw config_error("norm_eps must be positive");
}

TransformerConfig TransformerConfig::llama_ish() {
    TransformerConfig c;
    c.norm_style = NormStyle::pre_rms;
    c.activation = Activation::swiglu;
    return c;
}

TransformerConfig TransformerConfig::gpt_ish() {
    TransformerConfig c;
    c.norm_style = NormStyle::post_ln;
    c.activation = Activation::gelu;
    return c;
}

KVCache KVCache::from_prefix(const PrefixCache& prefix) {
    KVCache c(prefix.layers());
    c.k = prefix.k;
    c.v = prefix.v;
    c.len = prefix.len();
    return c;
}

const ag::Value& PreparedWeights::get(const std::string& name) const {
    auto it = leaves.find(name);
    if (it == leaves.end()) throw contract_error("missing weight leaf '" + name + "'");
    return it->second;
}

const Tensor& TransformerModel::weight(const std::string& name) const {
    auto it = weights.find(name);
    if (it == weights.end()) throw contract_error("model has no weight '" + name + "'");
    return it->second;
}

uint64_t TransformerModel::weights_checksum() const {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& [name, t] : weights) {
        mix(name.data(), name.size());
        mix(t.data(), sizeof(float) * static_cast<size_t>(t.numel()));
    }
    return h;
}

std::shared_ptr<const PreparedWeights> TransformerModel::prepared_fp() const {
    std::lock_guard<std::mutex> lock(fp_mutex_);
    if (!fp_cache_) {
        auto pw = std::make_shared<PreparedWeights>();
        for (const auto& [name, t] : weights) pw->leaves.emplace(name, ag::constant(t));
        fp_cache_ = pw;
    }
    return fp_cache_;
}

namespace {

std::vector<std::string> layer_weight_names(const TransformerConfig& cfg, int64_t l) {
    std::string p = "blk" + std::to_string(l) + ".";
    std::vector<std::string> names;
    if (cfg.norm_style == NormStyle::pre_rms) {
        names.push_back(p + "attn_norm");
    }
    names.insert(names.end(), {p + "wq", p + "wk", p + "wv", p + "wo"});
    if (cfg.norm_style == NormStyle::post_ln) {
        names.push_back(p + "ln1");
    } else {
        names.push_back(p + "mlp_norm");
    }
    if (cfg.activation == Activation::swiglu) {
        names.insert(names.end(), {p + "w_gate", p + "w_up", p + "w_down"});
    } else {
        names.insert(names.end(), {p + "w_in", p + "w_out"});
    }
    if (cfg.norm_style == NormStyle::post_ln) names.push_back(p + "ln2");
    return names;
}

Tensor weight_shape_for(const TransformerConfig& cfg, const std::string& name) {
    int64_t d = cfg.d_model, f = cfg.d_ff;
    auto base = name.substr(name.find('.') + 1);
    if (name == "tok_embed" || name == "lm_head") return Tensor({cfg.vocab_size, d});
    if (name == "pos_embed") return Tensor({cfg.max_seq_len, d});
    if (name == "final_norm") return Tensor({d});
    if (base == "attn_norm" || base == "mlp_norm" || base == "ln1" || base == "ln2") {
        return Tensor({d});
    }
    if (base == "wq" || base == "wk" || base == "wv" || base == "wo") return Tensor({d, d});
    if (base == "w_gate" || base == "w_up" || base == "w_in") return Tensor({f, d});
    if (base == "w_down" || base == "w_out") return Tensor({d, f});
    throw contract_error("unknown weight name '" + name + "'");
}

}  // namespace

std::vector<std::string> model_weight_names(const TransformerConfig& cfg) {
    std::vector<std::string> names = {"tok_embed", "pos_embed"};
    for (int64_t l = 0; l < cfg.n_layers; ++l) {
        auto layer = layer_weight_names(cfg, l);
        names.insert(names.end(), layer.begin(), layer.end());
    }
    if (cfg.norm_style == NormStyle::pre_rms) names.push_back("final_norm");
    names.push_back("lm_head");
    return names;
}

PreparedWeights init_weights(const TransformerConfig& cfg, uint64_t seed, bool requires_grad) {
    cfg.validate();
    Rng rng = make_rng(seed, "init_weights");
    const float residual_scale = 1.0f / std::sqrt(2.0f * static_cast<float>(cfg.n_layers));
    PreparedWeights pw;
    for (const auto& name : model_weight_names(cfg)) {
        Tensor t = weight_shape_for(cfg, name);
        auto base = name.substr(name.find('.') + 1);
        bool is_gain = (name == "final_norm" || base == "attn_norm" || base == "mlp_norm" ||
                        base == "ln1" || base == "ln2");
        if (is_gain) {
            for (int64_t i = 0; i < t.numel(); ++i) t[i] = 1.0f;
        } else {
            float std_dev = 0.02f;
            if (name == "pos_embed") std_dev = 0.01f;
            if (base == "wo" || base == "w_down" || base == "w_out") std_dev = 0.02f * residual_scale;
            for (int64_t i = 0; i < t.numel(); ++i) {
                t[i] = static_cast<float>(rng.normal(0.0, std_dev));
            }
        }
        pw.leaves.emplace(name, ag::leaf(std::move(t), requires_grad));
    }
    return pw;
}

namespace {

bool is_projection_weight(const std::string& name) {
    auto dot = name.find('.');
    if (dot == std::string::npos) return false;
    auto base = name.substr(dot + 1);
    return base == "wq" || base == "wk" || base == "wv" || base == "wo" || base == "w_gate" ||
           base == "w_up" || base == "w_down" || base == "w_in" || base == "w_out";
}

// Shared migration divisor for the weights consuming one tap, computed from
// their column-stacked matrix.
std::vector<float> shared_divisor(const std::vector<const Tensor*>& consumers,
                                  const std::vector<float>& absmax, float alpha) {
    int64_t total_rows = 0;
    int64_t in_dim = consumers.front()->dim(1);
    for (const Tensor* w : consumers) total_rows += w->dim(0);
    Tensor stacked({total_rows, in_dim});
    int64_t off = 0;
    for (const Tensor* w : consumers) {
        for (int64_t i = 0; i < w->numel(); ++i) stacked[off + i] = (*w)[i];
        off += w->numel();
    }
    return smooth_migrate(stacked, absmax, alpha).divisor;
}

void apply_divisor_to_weight(Tensor& w, const std::vector<float>& div) {
    int64_t rows = w.dim(0), cols = w.dim(1);
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < cols; ++j) w.at(r, j) *= div[static_cast<size_t>(j)];
    }
}

void fold_divisor_into_gain(Tensor& gain, const std::vector<float>& div) {
    for (int64_t j = 0; j < gain.numel(); ++j) gain[j] /= div[static_cast<size_t>(j)];
}

}  // namespace

PreparedWeights prepare_weights(const TransformerModel& model, const QuantProfile* profile,
                                const CalibrationStats* stats, bool quantize_weights) {
    const TransformerConfig& cfg = model.config;
    std::map<std::string, Tensor> work = model.weights;

    if (profile && profile->smooth_alpha > 0.f) {
        if (!stats) {
            throw contract_error("smooth migration requires calibration stats for channel absmax");
        }
        for (int64_t l = 0; l < cfg.n_layers; ++l) {
            std::string p = "blk" + std::to_string(l) + ".";
            auto attn_stats = stats->base.find(p + "attn_in");
            auto mlp_stats = stats->base.find(p + "mlp_in");
            if (attn_stats == stats->base.end() || mlp_stats == stats->base.end()) {
                throw contract_error("calibration stats are missing taps for layer " +
                                     std::to_string(l));
            }
            // Attention input: fold into the preceding norm gain. gpt-ish
            // block 0 has no preceding norm, so its QKV stay unmigrated.
            Tensor* gain = nullptr;
            if (cfg.norm_style == NormStyle::pre_rms) {
                gain = &work.at(p + "attn_norm");
            } else if (l > 0) {
                gain = &work.at("blk" + std::to_string(l - 1) + ".ln2");
            }
            if (gain) {
                std::vector<const Tensor*> consumers = {&work.at(p + "wq"), &work.at(p + "wk"),
                                                        &work.at(p + "wv")};
                auto div = shared_divisor(consumers, attn_stats->second.absmax(),
                                          profile->smooth_alpha);
                apply_divisor_to_weight(work.at(p + "wq"), div);
                apply_divisor_to_weight(work.at(p + "wk"), div);
                apply_divisor_to_weight(work.at(p + "wv"), div);
                fold_divisor_into_gain(*gain, div);
            }
            Tensor* mlp_gain = cfg.norm_style == NormStyle::pre_rms ? &work.at(p + "mlp_norm")
                                                                    : &work.at(p + "ln1");
            std::vector<const Tensor*> mlp_consumers;
            if (cfg.activation == Activation::swiglu) {
                mlp_consumers = {&work.at(p + "w_gate"), &work.at(p + "w_up")};
            } else {
                mlp_consumers = {&work.at(p + "w_in")};
            }
            auto mdiv = shared_divisor(mlp_consumers, mlp_stats->second.absmax(),
                                       profile->smooth_alpha);
            if (cfg.activation == Activation::swiglu) {
                apply_divisor_to_weight(work.at(p + "w_gate"), mdiv);
                apply_divisor_to_weight(work.at(p + "w_up"), mdiv);
            } else {
                apply_divisor_to_weight(work.at(p + "w_in"), mdiv);
            }
            fold_divisor_into_gain(*mlp_gain, mdiv);
        }
    }

    PreparedWeights pw;
    for (auto& [name, t] : work) {
        if (profile && quantize_weights && is_projection_weight(name)) {
            QuantParams params = resolve_params(t, profile->weights);
            pw.leaves.emplace(name, ag::constant(fake_quant(t, params)));
        } else {
            pw.leaves.emplace(name, ag::constant(std::move(t)));
        }
    }
    return pw;
}

PrefixValues PrefixValues::from_cache(const PrefixCache& cache, bool requires_grad) {
    PrefixValues pv;
    pv.len = cache.len();
    for (size_t l = 0; l < cache.k.size(); ++l) {
        pv.k.push_back(ag::leaf(cache.k[l], requires_grad));
        pv.v.push_back(ag::leaf(cache.v[l], requires_grad));
    }
    return pv;
}

PrefixValues PrefixValues::from_kvcache(const KVCache& cache) {
    PrefixValues pv;
    pv.len = cache.len;
    for (size_t l = 0; l < cache.k.size(); ++l) {
        pv.k.push_back(ag::constant(cache.k[l]));
        pv.v.push_back(ag::constant(cache.v[l]));
    }
    return pv;
}

PrefixCache PrefixValues::to_cache(PrefixProvenance prov) const {
    PrefixCache pc;
    pc.provenance = prov;
    for (size_t l = 0; l < k.size(); ++l) {
        pc.k.push_back(k[l]->value);
        pc.v.push_back(v[l]->value);
    }
    return pc;
}

}  // namespace pq
