#include <cmath>
#include <cstdio>

#include "pq/errors.hpp"
#include "pq/model.hpp"
#include "pq/optim.hpp"

namespace pq {

TrainResult train_toy(const TransformerConfig& cfg, const Corpus& corpus, const TrainOptions& opt) {
    cfg.validate();
    if (corpus.train.empty()) throw contract_error("training corpus is empty");
    if (opt.steps < 1 || opt.batch_size < 1 || opt.seq_len < 2) {
        throw config_error("train options: steps/batch_size must be >= 1, seq_len >= 2");
    }

    PreparedWeights pw = init_weights(cfg, opt.seed, /*requires_grad=*/true);
    std::vector<ag::Value> params;
    for (auto& [name, leaf] : pw.leaves) params.push_back(leaf);

    TransformerModel shell;
    shell.config = cfg;

    SequenceSampler sampler(corpus.train, make_rng(opt.seed, "train.batches"));
    Adam adam;
    TrainResult result;
    result.unigram_entropy = unigram_entropy(corpus.train);

    CaptureFlags cf;
    cf.logits = true;

    for (int64_t step = 0; step < opt.steps; ++step) {
        std::vector<TokenSeq> windows;
        std::vector<SeqInput> inputs;
        std::vector<int32_t> targets;
        windows.reserve(static_cast<size_t>(opt.batch_size));
        for (int64_t b = 0; b < opt.batch_size; ++b) {
            windows.push_back(sampler.draw(opt.seq_len + 1));
        }
        std::vector<TokenSeq> trimmed(windows.size());
        for (size_t b = 0; b < windows.size(); ++b) {
            trimmed[b].assign(windows[b].begin(), windows[b].end() - 1);
            inputs.push_back({&trimmed[b], nullptr, 0});
            targets.insert(targets.end(), windows[b].begin() + 1, windows[b].end());
        }

        auto res = forward_batch(shell, pw, inputs, nullptr, nullptr, cf);
        auto loss = ag::cross_entropy(res.logits, targets);
        float loss_val = loss->value[0];
        if (!std::isfinite(loss_val)) {
            throw numeric_error("training diverged: loss is not finite at step " +
                                std::to_string(step));
        }
        result.loss_history.push_back(loss_val);

        ag::backward(loss);
        if (opt.grad_clip > 0.f) {
            double norm = grad_global_norm(params);
            if (norm > opt.grad_clip) {
                scale_grads(params, static_cast<float>(opt.grad_clip / norm));
            }
        }
        const float lr_now =
            opt.lr * 0.5f *
            (1.0f + std::cos(3.14159265358979f * static_cast<float>(step) /
                             static_cast<float>(opt.steps)));
        adam.step(params, lr_now);
        zero_grads(params);

        if (opt.verbose && (step % opt.log_every == 0 || step + 1 == opt.steps)) {
            std::fprintf(stderr, "step %5lld  loss %.4f  lr %.2e\n",
                         static_cast<long long>(step), static_cast<double>(loss_val),
                         static_cast<double>(lr_now));
        }
    }

    result.model.config = cfg;
    for (auto& [name, leaf] : pw.leaves) result.model.weights.emplace(name, leaf->value);

    const size_t tail = std::max<size_t>(1, result.loss_history.size() / 20);
    double acc = 0.0;
    for (size_t i = result.loss_history.size() - tail; i < result.loss_history.size(); ++i) {
        acc += result.loss_history[i];
    }
    result.final_loss = acc / static_cast<double>(tail);
    return result;
}

namespace {

void collect_pass(const TransformerModel& model, const PreparedWeights& prepared,
                  const std::vector<TokenSeq>& texts, const PrefixCache* prefix,
                  std::map<std::string, TapStats>& out) {
    CaptureFlags cf;
    cf.quant_taps = true;
    cf.logits = false;
    PrefixValues pv;
    const PrefixValues* pvp = nullptr;
    if (prefix && prefix->len() > 0) {
        pv = PrefixValues::from_cache(*prefix);
        pvp = &pv;
    }
    for (const auto& text : texts) {
        SeqInput si{&text, pvp, 0};
        auto res = forward_batch(model, prepared, {si}, nullptr, nullptr, cf);
        const TapRecord& taps = res.seqs[0].taps;
        for (const auto& name : taps.quant_tap_names) {
            out[name].update(taps.activations.at(name), &taps.content_mask);
        }
    }
}

}  // namespace

CalibrationStats calibrate(const TransformerModel& model, const std::vector<TokenSeq>& texts,
                           const QuantProfile& profile, const PrefixCache* prefix) {
    if (texts.empty()) throw contract_error("calibration needs at least one sequence");
    CalibrationStats stats;
    stats.smooth_alpha = profile.smooth_alpha;

    auto fp = model.prepared_fp();
    collect_pass(model, *fp, texts, prefix, stats.base);

    if (profile.smooth_alpha > 0.f) {
        // Second pass on the migrated (still unquantized) model so static
        // ranges describe what the quantizer will actually see.
        PreparedWeights migrated = prepare_weights(model, &profile, &stats,
                                                   /*quantize_weights=*/false);
        collect_pass(model, migrated, texts, prefix, stats.final);
    } else {
        stats.final = stats.base;
    }
    return stats;
}

}  // namespace pq
