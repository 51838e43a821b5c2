#include <cmath>

#include "pq/errors.hpp"
#include "pq/model.hpp"

namespace pq {

namespace {

using ag::Value;

// Additive attention mask [T, m+T]: prefix columns always visible, content
// columns causal. -1e9 underflows to exactly 0 after max-subtracted softmax.
Tensor build_mask(int64_t t, int64_t m) {
    Tensor mask({t, m + t});
    for (int64_t i = 0; i < t; ++i) {
        float* row = mask.data() + i * (m + t);
        for (int64_t j = 0; j < m + t; ++j) {
            bool visible = j < m || (j - m) <= i;
            row[j] = visible ? 0.f : -1e9f;
        }
    }
    return mask;
}

Tensor copy_rows(const Tensor& src, int64_t r0, int64_t r1) {
    int64_t c = src.cols();
    Tensor out({r1 - r0, c});
    const float* p = src.data() + r0 * c;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = p[i];
    return out;
}

struct TapContext {
    const QuantProfile* quant;
    const CalibrationStats* stats;
    const CaptureFlags* capture;
    int64_t batch;
    int64_t seq_len;
    std::vector<SeqOutput>* seqs;
};

// Captures the tap per sequence and, when quantization is on, substitutes the
// fake-quantized activation for the consuming projections.
Value apply_tap(const Value& h, const std::string& name, const TapContext& ctx) {
    const bool record = ctx.capture->quant_taps;
    const bool graph = ctx.capture->graph_taps;
    if (!ctx.quant) {
        if (record) {
            for (int64_t b = 0; b < ctx.batch; ++b) {
                auto& taps = (*ctx.seqs)[static_cast<size_t>(b)].taps;
                taps.activations.emplace(name,
                                         copy_rows(h->value, b * ctx.seq_len, (b + 1) * ctx.seq_len));
                taps.quant_tap_names.push_back(name);
            }
        }
        return h;
    }
    const TapStats* ts = nullptr;
    if (ctx.quant->acts.range_mode == RangeMode::static_range) {
        if (!ctx.stats) throw contract_error("static-range activations need calibration stats");
        ts = ctx.stats->find(name);
        if (!ts) throw contract_error("calibration stats have no entry for tap '" + name + "'");
    }
    std::vector<Value> parts;
    parts.reserve(static_cast<size_t>(ctx.batch));
    for (int64_t b = 0; b < ctx.batch; ++b) {
        Value pre = ctx.batch == 1 ? h : ag::row_slice(h, b * ctx.seq_len, (b + 1) * ctx.seq_len);
        QuantParams params = resolve_params(pre->value, ctx.quant->acts, ts);
        Value post = fake_quant_ste(pre, params);
        auto& out = (*ctx.seqs)[static_cast<size_t>(b)];
        if (record) {
            out.taps.activations.emplace(name, pre->value);
            out.taps.quant_tap_names.push_back(name);
        }
        if (graph) out.quant_pairs.push_back({name, pre, post});
        parts.push_back(post);
    }
    return ctx.batch == 1 ? parts[0] : ag::concat_rows(parts);
}

}  // namespace

ag::Value BatchResult::logits_for(int64_t b) const {
    if (!logits) throw contract_error("logits were not captured");
    return ag::row_slice(logits, b * seq_len, (b + 1) * seq_len);
}

BatchResult forward_batch(const TransformerModel& model, const PreparedWeights& prepared,
                          const std::vector<SeqInput>& inputs, const QuantProfile* quant,
                          const CalibrationStats* stats, const CaptureFlags& capture) {
    const TransformerConfig& cfg = model.config;
    cfg.validate();
    if (inputs.empty()) throw contract_error("forward_batch: empty batch");

    const int64_t batch = static_cast<int64_t>(inputs.size());
    const int64_t t = static_cast<int64_t>(inputs[0].tokens->size());
    const int64_t m = inputs[0].prefix ? inputs[0].prefix->len : 0;
    if (t == 0) throw contract_error("forward_batch: empty token sequence");
    for (const auto& in : inputs) {
        if (static_cast<int64_t>(in.tokens->size()) != t) {
            throw contract_error("forward_batch: sequences must share one length");
        }
        int64_t pm = in.prefix ? in.prefix->len : 0;
        if (pm != m) throw contract_error("forward_batch: prefixes must share one length");
        if (in.prefix && static_cast<int64_t>(in.prefix->k.size()) != cfg.n_layers) {
            throw contract_error("forward_batch: prefix layer count does not match model");
        }
        for (int32_t id : *in.tokens) {
            if (id < 0 || id >= cfg.vocab_size) {
                throw contract_error("token id " + std::to_string(id) + " outside vocab");
            }
        }
    }
    if (m + t > cfg.max_seq_len) {
        throw contract_error("context overflow: prefix " + std::to_string(m) + " + tokens " +
                             std::to_string(t) + " exceeds max_seq_len " +
                             std::to_string(cfg.max_seq_len));
    }

    const int64_t heads = cfg.n_heads, hd = cfg.head_dim();
    const float inv_sqrt_hd = 1.0f / std::sqrt(static_cast<float>(hd));
    const bool pre_rms = cfg.norm_style == NormStyle::pre_rms;
    const bool swiglu = cfg.activation == Activation::swiglu;

    BatchResult res;
    res.seq_len = t;
    res.seqs.resize(static_cast<size_t>(batch));
    for (int64_t b = 0; b < batch; ++b) {
        auto& taps = res.seqs[static_cast<size_t>(b)].taps;
        taps.prefix_len = m + inputs[static_cast<size_t>(b)].literal_prefix_rows;
        taps.attn_prefix_cols = m;
        taps.content_mask.assign(static_cast<size_t>(t), 1);
        for (int64_t r = 0; r < inputs[static_cast<size_t>(b)].literal_prefix_rows && r < t; ++r) {
            taps.content_mask[static_cast<size_t>(r)] = 0;
        }
        if (capture.attention) {
            taps.attention.assign(static_cast<size_t>(cfg.n_layers), {});
        }
        if (capture.kv) {
            res.seqs[static_cast<size_t>(b)].k_out.resize(static_cast<size_t>(cfg.n_layers));
            res.seqs[static_cast<size_t>(b)].v_out.resize(static_cast<size_t>(cfg.n_layers));
        }
    }

    // Token + learned absolute position embeddings (content shifted by m).
    std::vector<int32_t> flat_ids;
    std::vector<int32_t> flat_pos;
    flat_ids.reserve(static_cast<size_t>(batch * t));
    flat_pos.reserve(static_cast<size_t>(batch * t));
    for (const auto& in : inputs) {
        for (int64_t i = 0; i < t; ++i) {
            flat_ids.push_back((*in.tokens)[static_cast<size_t>(i)]);
            flat_pos.push_back(static_cast<int32_t>(m + i));
        }
    }
    Value x = ag::add(ag::embed_lookup(prepared.get("tok_embed"), flat_ids),
                      ag::embed_lookup(prepared.get("pos_embed"), flat_pos));

    Value mask_c = ag::constant(build_mask(t, m));

    TapContext tap_ctx{quant, stats, &capture, batch, t, &res.seqs};

    for (int64_t l = 0; l < cfg.n_layers; ++l) {
        const std::string p = "blk" + std::to_string(l) + ".";
        if (capture.block_inputs) {
            for (int64_t b = 0; b < batch; ++b) {
                res.seqs[static_cast<size_t>(b)].taps.activations.emplace(
                    p + "input", copy_rows(x->value, b * t, (b + 1) * t));
            }
        }

        Value h = pre_rms ? ag::rmsnorm(x, prepared.get(p + "attn_norm"), cfg.norm_eps) : x;
        Value hq = apply_tap(h, p + "attn_in", tap_ctx);

        Value q = ag::linear(hq, prepared.get(p + "wq"));
        Value k = ag::linear(hq, prepared.get(p + "wk"));
        Value v = ag::linear(hq, prepared.get(p + "wv"));

        std::vector<Value> ctx_parts;
        ctx_parts.reserve(static_cast<size_t>(batch));
        for (int64_t b = 0; b < batch; ++b) {
            const auto& in = inputs[static_cast<size_t>(b)];
            Value qb = batch == 1 ? q : ag::row_slice(q, b * t, (b + 1) * t);
            Value kb = batch == 1 ? k : ag::row_slice(k, b * t, (b + 1) * t);
            Value vb = batch == 1 ? v : ag::row_slice(v, b * t, (b + 1) * t);
            if (capture.kv) {
                res.seqs[static_cast<size_t>(b)].k_out[static_cast<size_t>(l)] = kb->value;
                res.seqs[static_cast<size_t>(b)].v_out[static_cast<size_t>(l)] = vb->value;
            }
            std::vector<Value> head_outs;
            head_outs.reserve(static_cast<size_t>(heads));
            for (int64_t hh = 0; hh < heads; ++hh) {
                Value qs = ag::col_slice(qb, hh * hd, (hh + 1) * hd);
                Value ks = ag::col_slice(kb, hh * hd, (hh + 1) * hd);
                Value vs = ag::col_slice(vb, hh * hd, (hh + 1) * hd);
                if (m > 0) {
                    Value pk = ag::col_slice(in.prefix->k[static_cast<size_t>(l)], hh * hd,
                                             (hh + 1) * hd);
                    Value pv = ag::col_slice(in.prefix->v[static_cast<size_t>(l)], hh * hd,
                                             (hh + 1) * hd);
                    ks = ag::concat_rows({pk, ks});
                    vs = ag::concat_rows({pv, vs});
                }
                Value scores = ag::add(ag::scale(ag::linear(qs, ks), inv_sqrt_hd), mask_c);
                Value att = ag::softmax(scores, -1);
                if (capture.attention) {
                    res.seqs[static_cast<size_t>(b)]
                        .taps.attention[static_cast<size_t>(l)]
                        .push_back(att->value);
                }
                head_outs.push_back(ag::matmul(att, vs));
            }
            ctx_parts.push_back(heads == 1 ? head_outs[0] : ag::concat_cols(head_outs));
        }
        Value ctx = batch == 1 ? ctx_parts[0] : ag::concat_rows(ctx_parts);
        x = ag::add(x, ag::linear(ctx, prepared.get(p + "wo")));
        if (!pre_rms) x = ag::layernorm(x, prepared.get(p + "ln1"), cfg.norm_eps);

        Value g = pre_rms ? ag::rmsnorm(x, prepared.get(p + "mlp_norm"), cfg.norm_eps) : x;
        Value gq = apply_tap(g, p + "mlp_in", tap_ctx);

        Value mid;
        if (swiglu) {
            mid = ag::mul(ag::silu(ag::linear(gq, prepared.get(p + "w_gate"))),
                          ag::linear(gq, prepared.get(p + "w_up")));
        } else {
            mid = ag::gelu(ag::linear(gq, prepared.get(p + "w_in")));
        }
        x = ag::add(x, ag::linear(mid, prepared.get(swiglu ? p + "w_down" : p + "w_out")));
        if (!pre_rms) x = ag::layernorm(x, prepared.get(p + "ln2"), cfg.norm_eps);
    }

    if (pre_rms) x = ag::rmsnorm(x, prepared.get("final_norm"), cfg.norm_eps);
    if (capture.logits) res.logits = ag::linear(x, prepared.get("lm_head"));
    return res;
}

ForwardResult forward(const TransformerModel& model, const TokenSeq& tokens,
                      const PrefixCache* prefix, const QuantProfile* quant,
                      const CalibrationStats* stats, CaptureFlags capture) {
    PrefixValues pv;
    SeqInput si{&tokens, nullptr, 0};
    if (prefix && prefix->len() > 0) {
        pv = PrefixValues::from_cache(*prefix);
        si.prefix = &pv;
    }
    std::shared_ptr<const PreparedWeights> fp;
    PreparedWeights prepared;
    const PreparedWeights* pw;
    if (quant) {
        prepared = prepare_weights(model, quant, stats);
        pw = &prepared;
    } else {
        fp = model.prepared_fp();
        pw = fp.get();
    }
    auto batch = forward_batch(model, *pw, {si}, quant, stats, capture);
    ForwardResult out;
    out.taps = std::move(batch.seqs[0].taps);
    out.k_out = std::move(batch.seqs[0].k_out);
    out.v_out = std::move(batch.seqs[0].v_out);
    if (capture.logits) out.logits = batch.logits;
    return out;
}

Tensor decode_step(const TransformerModel& model, KVCache& cache, const TokenSeq& new_tokens,
                   const QuantProfile* quant, const CalibrationStats* stats) {
    if (cache.layers() != model.config.n_layers) {
        throw contract_error("KV cache has " + std::to_string(cache.layers()) +
                             " layers, model expects " + std::to_string(model.config.n_layers));
    }
    if (cache.len > 0 && cache.k[0].cols() != model.config.d_model) {
        throw contract_error("KV cache width does not match model d_model");
    }
    if (new_tokens.empty()) return Tensor();

    PrefixValues pv;
    SeqInput si{&new_tokens, nullptr, 0};
    if (cache.len > 0) {
        pv = PrefixValues::from_kvcache(cache);
        si.prefix = &pv;
    }
    CaptureFlags cf;
    cf.kv = true;
    cf.logits = true;
    std::shared_ptr<const PreparedWeights> fp;
    PreparedWeights prepared;
    const PreparedWeights* pw;
    if (quant) {
        prepared = prepare_weights(model, quant, stats);
        pw = &prepared;
    } else {
        fp = model.prepared_fp();
        pw = fp.get();
    }
    auto res = forward_batch(model, *pw, {si}, quant, stats, cf);

    const int64_t t = static_cast<int64_t>(new_tokens.size());
    for (int64_t l = 0; l < model.config.n_layers; ++l) {
        const Tensor& nk = res.seqs[0].k_out[static_cast<size_t>(l)];
        const Tensor& nv = res.seqs[0].v_out[static_cast<size_t>(l)];
        if (cache.len == 0) {
            cache.k[static_cast<size_t>(l)] = nk;
            cache.v[static_cast<size_t>(l)] = nv;
        } else {
            Tensor merged_k({cache.len + t, model.config.d_model});
            Tensor merged_v({cache.len + t, model.config.d_model});
            const Tensor& ok = cache.k[static_cast<size_t>(l)];
            const Tensor& ov = cache.v[static_cast<size_t>(l)];
            for (int64_t i = 0; i < ok.numel(); ++i) {
                merged_k[i] = ok[i];
                merged_v[i] = ov[i];
            }
            for (int64_t i = 0; i < nk.numel(); ++i) {
                merged_k[ok.numel() + i] = nk[i];
                merged_v[ov.numel() + i] = nv[i];
            }
            cache.k[static_cast<size_t>(l)] = std::move(merged_k);
            cache.v[static_cast<size_t>(l)] = std::move(merged_v);
        }
    }
    cache.len += t;
    return res.logits->value;
}

PrefixCache extract_prefix_cache(const TransformerModel& model, const TokenSeq& prompt) {
    if (prompt.empty()) throw contract_error("cannot extract a prefix cache from an empty prompt");
    CaptureFlags cf;
    cf.kv = true;
    cf.logits = false;
    auto res = forward(model, prompt, nullptr, nullptr, nullptr, cf);
    PrefixCache pc;
    pc.provenance = PrefixProvenance::greedy_init;
    pc.k = std::move(res.k_out);
    pc.v = std::move(res.v_out);
    return pc;
}

double perplexity(const TransformerModel& model, const TokenSeq& text, const PrefixCache* prefix,
                  const QuantProfile* quant, const CalibrationStats* stats) {
    if (text.size() < 2) throw contract_error("perplexity needs at least 2 tokens");
    CaptureFlags cf;
    cf.logits = true;
    auto res = forward(model, text, prefix, quant, stats, cf);
    std::vector<int32_t> targets(text.size());
    for (size_t i = 0; i + 1 < text.size(); ++i) targets[i] = text[i + 1];
    targets.back() = -1;
    auto loss = ag::cross_entropy(res.logits, targets, -1);
    return std::exp(static_cast<double>(loss->value[0]));
}

}  // namespace pq
