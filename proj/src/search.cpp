#include "pq/search.hpp"

#include <chrono>
#include <thread>

#include "pq/errors.hpp"

namespace pq {

namespace {

uint64_t hash_tokens(const TokenSeq& toks) {
    uint64_t h = 1469598103934665603ull;
    for (int32_t t : toks) {
        h ^= static_cast<uint64_t>(t);
        h *= 1099511628211ull;
    }
    return h;
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

// Per-candidate prefixes: the shared prompt KV extended by each candidate's
// own K/V, computed with one batched single-token forward.
std::vector<PrefixCache> extend_prefixes(const TransformerModel& model,
                                         const PreparedWeights& fp, const PrefixCache* base,
                                         const std::vector<int32_t>& candidates) {
    const int64_t n_layers = model.config.n_layers;
    PrefixValues base_values;
    const PrefixValues* pvp = nullptr;
    if (base && base->len() > 0) {
        base_values = PrefixValues::from_cache(*base);
        pvp = &base_values;
    }
    std::vector<TokenSeq> singles(candidates.size());
    std::vector<SeqInput> inputs(candidates.size());
    for (size_t i = 0; i < candidates.size(); ++i) {
        singles[i] = {candidates[i]};
        inputs[i] = {&singles[i], pvp, 0};
    }
    CaptureFlags cf;
    cf.kv = true;
    cf.logits = false;
    auto res = forward_batch(model, fp, inputs, nullptr, nullptr, cf);

    std::vector<PrefixCache> out(candidates.size());
    const int64_t m0 = base ? base->len() : 0;
    const int64_t d = model.config.d_model;
    for (size_t i = 0; i < candidates.size(); ++i) {
        out[i].provenance = PrefixProvenance::greedy_init;
        out[i].k.resize(static_cast<size_t>(n_layers));
        out[i].v.resize(static_cast<size_t>(n_layers));
        for (int64_t l = 0; l < n_layers; ++l) {
            Tensor k({m0 + 1, d});
            Tensor v({m0 + 1, d});
            if (m0 > 0) {
                const Tensor& bk = base->k[static_cast<size_t>(l)];
                const Tensor& bv = base->v[static_cast<size_t>(l)];
                for (int64_t j = 0; j < bk.numel(); ++j) {
                    k[j] = bk[j];
                    v[j] = bv[j];
                }
            }
            const Tensor& nk = res.seqs[i].k_out[static_cast<size_t>(l)];
            const Tensor& nv = res.seqs[i].v_out[static_cast<size_t>(l)];
            for (int64_t j = 0; j < d; ++j) {
                k[m0 * d + j] = nk[j];
                v[m0 * d + j] = nv[j];
            }
            out[i].k[static_cast<size_t>(l)] = std::move(k);
            out[i].v[static_cast<size_t>(l)] = std::move(v);
        }
    }
    return out;
}

// Conditional L_q of the text under each prefix, batched.
void score_chunk(const TransformerModel& model, const PreparedWeights& fp, const TokenSeq& text,
                 const std::vector<PrefixCache>& prefixes, const QuantSpec& spec,
                 const CalibrationStats* stats, int64_t chunk_size, double* out) {
    CaptureFlags cf;
    cf.quant_taps = true;
    cf.logits = false;
    for (size_t off = 0; off < prefixes.size(); off += static_cast<size_t>(chunk_size)) {
        size_t end = std::min(prefixes.size(), off + static_cast<size_t>(chunk_size));
        std::vector<PrefixValues> values(end - off);
        std::vector<SeqInput> inputs(end - off);
        for (size_t i = off; i < end; ++i) {
            values[i - off] = PrefixValues::from_cache(prefixes[i]);
            inputs[i - off] = {&text, &values[i - off], 0};
        }
        auto res = forward_batch(model, fp, inputs, nullptr, nullptr, cf);
        for (size_t i = off; i < end; ++i) {
            out[i] = conditional_quant_error(res.seqs[i - off].taps, spec, stats);
        }
    }
}

}  // namespace

TokenSeq parse_seed_tokens(const std::vector<std::string>& names) {
    TokenSeq out;
    for (const auto& raw : names) {
        if (raw.empty()) continue;
        if (raw == "bos") {
            out.push_back(kBosToken);
        } else if (raw == "newline") {
            out.push_back(kNewlineToken);
        } else if (raw == "space") {
            out.push_back(32);
        } else if (raw == "tab") {
            out.push_back(9);
        } else if (raw.size() == 1) {
            out.push_back(static_cast<int32_t>(static_cast<unsigned char>(raw[0])));
        } else {
            bool numeric = true;
            for (char c : raw) numeric = numeric && (c >= '0' && c <= '9');
            if (!numeric) throw config_error("unknown seed token name '" + raw + "'");
            int v = std::stoi(raw);
            if (v < 0 || v >= kVocabSize) {
                throw config_error("seed token id " + raw + " outside vocabulary");
            }
            out.push_back(v);
        }
    }
    return out;
}

TokenSeq seed_prompt(const SearchConfig& cfg) { return cfg.seed_tokens; }

double conditional_lq_for_prompt(const TransformerModel& model, const TokenSeq& text,
                                 const TokenSeq& prompt, const QuantSpec& spec,
                                 const CalibrationStats* stats) {
    CaptureFlags cf;
    cf.quant_taps = true;
    cf.logits = false;
    if (prompt.empty()) {
        auto res = forward(model, text, nullptr, nullptr, nullptr, cf);
        return conditional_quant_error(res.taps, spec, stats);
    }
    PrefixCache prefix = extract_prefix_cache(model, prompt);
    auto res = forward(model, text, &prefix, nullptr, nullptr, cf);
    return conditional_quant_error(res.taps, spec, stats);
}

std::vector<double> score_candidates(const TransformerModel& model, const TokenSeq& text,
                                     const TokenSeq& current_prompt,
                                     const std::vector<int32_t>& candidates,
                                     const SearchConfig& cfg) {
    if (candidates.empty()) return {};
    if (cfg.candidate_batch < 1) throw config_error("candidate batch size must be >= 1");
    auto fp = model.prepared_fp();
    PrefixCache base;
    const PrefixCache* basep = nullptr;
    if (!current_prompt.empty()) {
        base = extract_prefix_cache(model, current_prompt);
        basep = &base;
    }
    auto prefixes = extend_prefixes(model, *fp, basep, candidates);

    std::vector<double> scores(candidates.size(), 0.0);
    int threads = std::max(1, cfg.threads);
    if (threads == 1 || candidates.size() < 2) {
        score_chunk(model, *fp, text, prefixes, cfg.quant, cfg.stats, cfg.candidate_batch,
                    scores.data());
        return scores;
    }
    size_t per = (candidates.size() + static_cast<size_t>(threads) - 1) / static_cast<size_t>(threads);
    std::vector<std::thread> pool;
    for (int ti = 0; ti < threads; ++ti) {
        size_t lo = static_cast<size_t>(ti) * per;
        if (lo >= candidates.size()) break;
        size_t hi = std::min(candidates.size(), lo + per);
        pool.emplace_back([&, lo, hi]() {
            std::vector<PrefixCache> part(prefixes.begin() + static_cast<ptrdiff_t>(lo),
                                          prefixes.begin() + static_cast<ptrdiff_t>(hi));
            score_chunk(model, *fp, text, part, cfg.quant, cfg.stats, cfg.candidate_batch,
                        scores.data() + lo);
        });
    }
    for (auto& t : pool) t.join();
    return scores;
}

SearchResult greedy_search(const TransformerModel& model, const Corpus& corpus,
                           const SearchConfig& cfg) {
    if (cfg.tau <= 0.0) throw config_error("tau must be positive");
    if (cfg.max_len < 0) throw config_error("max_len must be >= 0");

    SearchResult result;
    result.prompt = seed_prompt(cfg);
    double t_start = now_seconds();

    std::vector<int32_t> all_candidates(static_cast<size_t>(model.config.vocab_size));
    for (size_t i = 0; i < all_candidates.size(); ++i) all_candidates[i] = static_cast<int32_t>(i);

    SequenceSampler sampler(corpus.train, make_rng(cfg.seed, "search.texts"));
    TokenSeq fixed;
    if (cfg.fixed_text) fixed = sampler.draw(cfg.text_len);

    int64_t step_idx = 0;
    result.trace.stop_reason = "max-length";
    while (static_cast<int64_t>(result.prompt.size()) < cfg.max_len) {
        TokenSeq text = cfg.fixed_text ? fixed : sampler.draw(cfg.text_len);
        double t0 = now_seconds();

        double lq_before = conditional_lq_for_prompt(model, text, result.prompt, cfg.quant, cfg.stats);
        std::vector<double> scores = score_candidates(model, text, result.prompt, all_candidates, cfg);

        size_t best = 0;
        for (size_t i = 1; i < scores.size(); ++i) {
            if (scores[i] < scores[best]) best = i;  // ties keep the lowest token id
        }
        double lq_after = scores[best];
        bool accepted = lq_after < cfg.tau * lq_before;

        SearchStep rec;
        rec.step = step_idx++;
        rec.text_id = hash_tokens(text);
        rec.chosen_token = all_candidates[best];
        rec.lq_before = lq_before;
        rec.lq_after = lq_after;
        rec.accepted = accepted;
        rec.wall_ms = (now_seconds() - t0) * 1e3;
        result.trace.steps.push_back(rec);

        if (!accepted) {
            result.trace.stop_reason = "threshold";
            break;
        }
        result.prompt.push_back(all_candidates[best]);
    }

    result.trace.prompt = result.prompt;
    result.trace.total_seconds = now_seconds() - t_start;
    if (!result.prompt.empty()) {
        result.prefix = extract_prefix_cache(model, result.prompt);
    }
    return result;
}

}  // namespace pq
