#include "pq/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "pq/errors.hpp"

namespace pq {

OutlierLayerStats order_stats_of(std::vector<float> magnitudes) {
    if (magnitudes.empty()) throw contract_error("order statistics of an empty sample");
    std::sort(magnitudes.begin(), magnitudes.end());
    const int64_t n = static_cast<int64_t>(magnitudes.size());
    auto nearest_rank = [&](double pct) {
        int64_t rank = static_cast<int64_t>(std::ceil(pct * static_cast<double>(n)));
        rank = std::max<int64_t>(1, std::min(n, rank));
        return static_cast<double>(magnitudes[static_cast<size_t>(rank - 1)]);
    };
    OutlierLayerStats s;
    s.top1 = magnitudes[static_cast<size_t>(n - 1)];
    s.top2 = n >= 2 ? magnitudes[static_cast<size_t>(n - 2)] : s.top1;
    s.top3 = n >= 3 ? magnitudes[static_cast<size_t>(n - 3)] : s.top2;
    s.p90 = nearest_rank(0.90);
    s.median = nearest_rank(0.50);
    return s;
}

namespace {

std::string provenance_name(const PrefixCache* prefix) {
    if (!prefix || prefix->len() == 0) return "none";
    switch (prefix->provenance) {
        case PrefixProvenance::greedy_init: return "greedy-init";
        case PrefixProvenance::tuned: return "tuned";
        case PrefixProvenance::random_init: return "random-init";
    }
    return "unknown";
}

}  // namespace

OutlierReport outlier_stats(const TransformerModel& model, const std::vector<TokenSeq>& texts,
                            const PrefixCache* prefix, int64_t layer) {
    if (texts.empty()) throw contract_error("outlier_stats needs at least one text");
    const int64_t n_layers = model.config.n_layers;
    if (layer >= n_layers) throw contract_error("layer index out of range");
    std::vector<int64_t> layers;
    if (layer < 0) {
        for (int64_t l = 0; l < n_layers; ++l) layers.push_back(l);
    } else {
        layers.push_back(layer);
    }

    CaptureFlags cf;
    cf.block_inputs = true;
    cf.logits = false;

    OutlierReport report;
    report.samples = static_cast<int64_t>(texts.size());
    report.seq_len = static_cast<int64_t>(texts[0].size());
    report.prefix_provenance = provenance_name(prefix);
    report.layers.resize(layers.size());
    for (size_t i = 0; i < layers.size(); ++i) report.layers[i].layer = layers[i];

    for (const auto& text : texts) {
        auto res = forward(model, text, prefix, nullptr, nullptr, cf);
        for (size_t i = 0; i < layers.size(); ++i) {
            const Tensor& act =
                res.taps.activations.at("blk" + std::to_string(layers[i]) + ".input");
            std::vector<float> mags;
            mags.reserve(static_cast<size_t>(act.numel()));
            int64_t cols = act.cols();
            for (int64_t r = 0; r < act.rows(); ++r) {
                if (!res.taps.content_mask[static_cast<size_t>(r)]) continue;
                const float* row = act.data() + r * cols;
                for (int64_t j = 0; j < cols; ++j) mags.push_back(std::fabs(row[j]));
            }
            OutlierLayerStats s = order_stats_of(std::move(mags));
            report.layers[i].top1 += s.top1;
            report.layers[i].top2 += s.top2;
            report.layers[i].top3 += s.top3;
            report.layers[i].p90 += s.p90;
            report.layers[i].median += s.median;
        }
    }
    const double inv = 1.0 / static_cast<double>(texts.size());
    for (auto& s : report.layers) {
        s.top1 *= inv;
        s.top2 *= inv;
        s.top3 *= inv;
        s.p90 *= inv;
        s.median *= inv;
    }
    return report;
}

SinkReport sink_from_taps(const TapRecord& taps) {
    if (taps.attention.empty()) throw contract_error("tap record has no captured attention");
    SinkReport report;
    report.prefix_len = taps.attn_prefix_cols;
    double mass_acc = 0.0;
    double first_acc = 0.0;
    for (size_t l = 0; l < taps.attention.size(); ++l) {
        for (size_t h = 0; h < taps.attention[l].size(); ++h) {
            const Tensor& att = taps.attention[l][h];
            const int64_t rows = att.dim(0), ctx = att.dim(1);
            report.ctx_len = ctx;
            const int64_t m = taps.attn_prefix_cols;
            SinkHeadStats hs;
            hs.layer = static_cast<int64_t>(l);
            hs.head = static_cast<int64_t>(h);
            std::vector<double> mean_row(static_cast<size_t>(ctx), 0.0);
            int64_t content_rows = 0;
            for (int64_t r = 0; r < rows; ++r) {
                if (r < static_cast<int64_t>(taps.content_mask.size()) &&
                    !taps.content_mask[static_cast<size_t>(r)]) {
                    continue;
                }
                ++content_rows;
                const float* row = att.data() + r * ctx;
                double pmass = 0.0;
                for (int64_t j = 0; j < m; ++j) pmass += row[j];
                hs.prefix_mass += pmass;
                if (m < ctx) hs.first_content_mass += row[m];
                for (int64_t j = 0; j < ctx; ++j) mean_row[static_cast<size_t>(j)] += row[j];
            }
            if (content_rows == 0) throw contract_error("attention capture has no content rows");
            hs.prefix_mass /= static_cast<double>(content_rows);
            hs.first_content_mass /= static_cast<double>(content_rows);
            double norm = 0.0;
            for (double x : mean_row) norm += x;
            for (double x : mean_row) {
                if (x <= 0.0) continue;
                double p = x / norm;
                hs.entropy -= p * std::log(p);
            }
            mass_acc += hs.prefix_mass;
            first_acc += hs.first_content_mass;
            report.heads.push_back(hs);
        }
    }
    report.mean_prefix_mass = mass_acc / static_cast<double>(report.heads.size());
    report.mean_first_content_mass = first_acc / static_cast<double>(report.heads.size());
    report.uniform_baseline =
        report.ctx_len > 0 ? static_cast<double>(report.prefix_len) / static_cast<double>(report.ctx_len)
                           : 0.0;
    return report;
}

SinkReport sink_report(const TransformerModel& model, const TokenSeq& text,
                       const PrefixCache* prefix) {
    CaptureFlags cf;
    cf.attention = true;
    cf.logits = false;
    auto res = forward(model, text, prefix, nullptr, nullptr, cf);
    return sink_from_taps(res.taps);
}

namespace {

struct ArmEval {
    double lq = 0.0;
    double ppl = 0.0;
};

ArmEval evaluate_arm(const TransformerModel& model, const std::vector<TokenSeq>& texts,
                     const std::vector<TokenSeq>& calib_texts, const PrefixCache* prefix,
                     const AblationConfig& cfg) {
    // Deployment perplexity: per-arm calibration when the profile is static.
    CalibrationStats stats;
    const CalibrationStats* sp = nullptr;
    if (cfg.profile.acts.range_mode == RangeMode::static_range || cfg.profile.smooth_alpha > 0.f) {
        stats = calibrate(model, calib_texts, cfg.profile, prefix);
        sp = &stats;
    }
    CaptureFlags cf;
    cf.quant_taps = true;
    cf.logits = false;
    ArmEval ev;
    double ce_acc = 0.0;
    for (const auto& text : texts) {
        double ppl = perplexity(model, text, prefix, &cfg.profile, sp);
        ce_acc += std::log(ppl);
        auto res = forward(model, text, prefix, nullptr, nullptr, cf);
        ev.lq += conditional_quant_error(res.taps, cfg.lq_spec, nullptr);
    }
    ev.lq /= static_cast<double>(texts.size());
    ev.ppl = std::exp(ce_acc / static_cast<double>(texts.size()));
    return ev;
}

}  // namespace

AblationTable ablation_run(const TransformerModel& model, const Corpus& corpus,
                           const AblationConfig& cfg) {
    if (!cfg.greedy || cfg.greedy->len() == 0) {
        throw contract_error("ablation needs a greedy-init prefix");
    }
    std::vector<TokenSeq> eval_texts;
    SequenceSampler eval_sampler(corpus.heldout, make_rng(cfg.seed, "ablation.eval"));
    for (int64_t i = 0; i < cfg.eval_texts; ++i) eval_texts.push_back(eval_sampler.draw(cfg.eval_len));
    std::vector<TokenSeq> calib_texts;
    SequenceSampler calib_sampler(corpus.train, make_rng(cfg.seed, "ablation.calib"));
    for (int64_t i = 0; i < cfg.calib_texts; ++i) {
        calib_texts.push_back(calib_sampler.draw(cfg.eval_len));
    }

    AblationTable table;
    auto push_arm = [&](const std::string& name, const PrefixCache* prefix) {
        ArmEval ev = evaluate_arm(model, eval_texts, calib_texts, prefix, cfg);
        table.arms.push_back({name, ev.lq, ev.ppl});
    };

    push_arm("no-prefix", nullptr);
    push_arm("greedy-init", cfg.greedy);

    TuneConfig t0 = cfg.tune;
    t0.lambda = 0.0;
    CalibrationStats greedy_stats;
    if (t0.quant_enabled && (t0.quant.acts.range_mode == RangeMode::static_range ||
                             t0.quant.smooth_alpha > 0.f)) {
        greedy_stats = calibrate(model, calib_texts, t0.quant, cfg.greedy);
        t0.stats = &greedy_stats;
    }
    TuneResult r_plain = tune(model, corpus, *cfg.greedy, t0);
    push_arm("greedy+tune", &r_plain.prefix);

    if (cfg.tuned && cfg.tuned->len() > 0) {
        push_arm("greedy+tune+quant-loss", cfg.tuned);
    } else {
        TuneConfig t1 = cfg.tune;
        t1.stats = t0.stats;
        TuneResult r_q = tune(model, corpus, *cfg.greedy, t1);
        push_arm("greedy+tune+quant-loss", &r_q.prefix);
    }

    for (size_t i = 1; i < table.arms.size(); ++i) {
        if (table.arms[i].lq > table.arms[i - 1].lq) table.lq_monotone = false;
    }
    table.note = table.lq_monotone
                     ? "held-out conditional error decreased monotonically across arms"
                     : "warning: held-out conditional error was not monotone across arms";
    return table;
}

CostReport cost_report(const SearchTrace* trace, const TuneResult* tune_log) {
    CostReport report;
    if (trace) {
        report.step1_present = true;
        if (trace->total_seconds > 0) {
            report.step1_seconds = trace->total_seconds;
        } else {
            for (const auto& s : trace->steps) report.step1_seconds += s.wall_ms * 1e-3;
        }
    }
    if (tune_log) {
        report.step2_present = true;
        report.step2_seconds = tune_log->seconds;
    }
    return report;
}

}  // namespace pq
