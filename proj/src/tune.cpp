#include "pq/tune.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "pq/errors.hpp"
#include "pq/optim.hpp"

namespace pq {

void TuneConfig::validate() const {
    if (lambda < 0.0) throw config_error("lambda must be nonnegative");
    if (epochs < 1) throw config_error("epochs must be >= 1");
    if (batch_size < 1 || seq_len < 2) throw config_error("bad tuning batch shape");
    if (sequences_per_epoch < 0) throw config_error("sequences_per_epoch must be >= 0");
}

TuneLossParts tuning_loss(const TransformerModel& model, const PreparedWeights& prepared,
                          const std::vector<TokenSeq>& batch, PrefixValues& prefix,
                          const TuneConfig& cfg) {
    if (batch.empty()) throw contract_error("tuning_loss: empty batch");
    if (prefix.len == 0) throw contract_error("tuning_loss: prefix is empty");
    if (static_cast<int64_t>(prefix.k.size()) != model.config.n_layers) {
        throw contract_error("tuning_loss: prefix does not match model layer count");
    }

    std::vector<TokenSeq> inputs_tok(batch.size());
    std::vector<SeqInput> inputs(batch.size());
    std::vector<int32_t> targets;
    for (size_t b = 0; b < batch.size(); ++b) {
        if (batch[b].size() < 2) throw contract_error("tuning sequences need >= 2 tokens");
        inputs_tok[b].assign(batch[b].begin(), batch[b].end() - 1);
        inputs[b] = {&inputs_tok[b], &prefix, 0};
        targets.insert(targets.end(), batch[b].begin() + 1, batch[b].end());
    }

    CaptureFlags cf;
    cf.logits = true;
    cf.graph_taps = cfg.quant_enabled;
    const QuantProfile* qp = cfg.quant_enabled ? &cfg.quant : nullptr;
    auto res = forward_batch(model, prepared, inputs, qp, cfg.stats, cf);

    TuneLossParts parts;
    parts.l_pred = ag::cross_entropy(res.logits, targets);

    if (cfg.quant_enabled) {
        ag::Value lq_sum;
        for (auto& seq : res.seqs) {
            for (auto& pair : seq.quant_pairs) {
                auto term = ag::sum(ag::square(ag::sub(pair.pre, pair.post)));
                lq_sum = lq_sum ? ag::add(lq_sum, term) : term;
            }
        }
        if (lq_sum) {
            ag::Value lq_mean = ag::scale(lq_sum, 1.0f / static_cast<float>(batch.size()));
            parts.l_q = static_cast<double>(lq_mean->value[0]);
            parts.total = ag::add(parts.l_pred, ag::scale(lq_mean, static_cast<float>(cfg.lambda)));
            return parts;
        }
    }
    parts.total = parts.l_pred;
    return parts;
}

TuneResult tune(const TransformerModel& model, const Corpus& corpus, const PrefixCache& init,
                const TuneConfig& cfg) {
    cfg.validate();
    if (init.len() == 0) throw contract_error("tune: initial prefix is empty");
    using clock = std::chrono::steady_clock;
    auto t_start = clock::now();

    PrefixValues prefix = PrefixValues::from_cache(init, /*requires_grad=*/true);
    std::vector<ag::Value> params;
    for (auto& k : prefix.k) params.push_back(k);
    for (auto& v : prefix.v) params.push_back(v);

    PreparedWeights prepared =
        cfg.quant_enabled ? prepare_weights(model, &cfg.quant, cfg.stats) : PreparedWeights{};
    const PreparedWeights* pw;
    std::shared_ptr<const PreparedWeights> fp;
    if (cfg.quant_enabled) {
        pw = &prepared;
    } else {
        fp = model.prepared_fp();
        pw = fp.get();
    }

    const int64_t steps_per_epoch = cfg.sequences_per_epoch / cfg.batch_size;
    SequenceSampler sampler(corpus.train, make_rng(cfg.seed, "tune.batches"));
    Adam adam;
    TuneResult result;
    result.prefix = init;

    double best_loss = std::numeric_limits<double>::infinity();
    PrefixCache best = init;
    bool stepped = false;

    const int64_t total_steps = cfg.epochs * steps_per_epoch;
    for (int64_t step = 0; step < total_steps; ++step) {
        std::vector<TokenSeq> batch;
        for (int64_t b = 0; b < cfg.batch_size; ++b) batch.push_back(sampler.draw(cfg.seq_len + 1));

        auto parts = tuning_loss(model, *pw, batch, prefix, cfg);
        double loss = static_cast<double>(parts.total->value[0]);
        if (!std::isfinite(loss)) {
            result.aborted = true;
            result.diagnostic = "loss became non-finite at step " + std::to_string(step) +
                                "; returning best prefix seen so far";
            result.prefix = best;
            result.seconds = std::chrono::duration<double>(clock::now() - t_start).count();
            return result;
        }
        result.loss_history.push_back(loss);
        result.lpred_history.push_back(static_cast<double>(parts.l_pred->value[0]));
        result.lq_history.push_back(parts.l_q);

        ag::backward(parts.total);
        adam.step(params, cfg.lr);
        zero_grads(params);
        stepped = true;

        if (loss < best_loss) {
            best_loss = loss;
            best = prefix.to_cache(PrefixProvenance::tuned);
        }
    }

    result.prefix = stepped ? prefix.to_cache(PrefixProvenance::tuned) : init;
    result.seconds = std::chrono::duration<double>(clock::now() - t_start).count();
    return result;
}

PrefixCache random_init_prefix(const TransformerModel& model, int64_t m, uint64_t seed) {
    if (m < 1) throw contract_error("random prefix length must be >= 1");
    const TransformerConfig& cfg = model.config;

    // Reference forward over seed-derived tokens to measure K/V moments.
    Rng tok_rng = make_rng(seed, "random_prefix.tokens");
    int64_t ref_len = std::min<int64_t>(64, cfg.max_seq_len - 1);
    TokenSeq ref(static_cast<size_t>(ref_len));
    for (auto& t : ref) t = static_cast<int32_t>(tok_rng.index(static_cast<uint64_t>(cfg.vocab_size)));
    CaptureFlags cf;
    cf.kv = true;
    cf.logits = false;
    auto res = forward(model, ref, nullptr, nullptr, nullptr, cf);

    Rng rng = make_rng(seed, "random_prefix.entries");
    PrefixCache pc;
    pc.provenance = PrefixProvenance::random_init;
    auto moments = [](const Tensor& t) {
        double mean = 0.0;
        for (int64_t i = 0; i < t.numel(); ++i) mean += t[i];
        mean /= static_cast<double>(t.numel());
        double var = 0.0;
        for (int64_t i = 0; i < t.numel(); ++i) {
            double c = t[i] - mean;
            var += c * c;
        }
        var /= static_cast<double>(t.numel());
        return std::pair<double, double>(mean, std::sqrt(var));
    };
    for (int64_t l = 0; l < cfg.n_layers; ++l) {
        auto [km, ks] = moments(res.k_out[static_cast<size_t>(l)]);
        auto [vm, vs] = moments(res.v_out[static_cast<size_t>(l)]);
        Tensor k({m, cfg.d_model});
        Tensor v({m, cfg.d_model});
        for (int64_t i = 0; i < k.numel(); ++i) k[i] = static_cast<float>(rng.normal(km, ks));
        for (int64_t i = 0; i < v.numel(); ++i) v[i] = static_cast<float>(rng.normal(vm, vs));
        pc.k.push_back(std::move(k));
        pc.v.push_back(std::move(v));
    }
    return pc;
}

}  // namespace pq
