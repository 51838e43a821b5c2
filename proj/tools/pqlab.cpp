// Command-line entry point: train | calibrate | search | tune | eval |
// analyze | demo. Every command is deterministic under a fixed seed; all
// reports are JSON with a schema_version field.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pq/analysis.hpp"
#include "pq/data.hpp"
#include "pq/errors.hpp"
#include "pq/model.hpp"
#include "pq/report.hpp"
#include "pq/runconfig.hpp"
#include "pq/search.hpp"
#include "pq/serialize.hpp"
#include "pq/tune.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pq;

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

RunConfig load_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return RunConfig::parse_file(path);
}

TransformerModel load_model_checked(const std::string& path) {
    if (peek_artifact_kind(path) != ArtifactKind::model) {
        throw artifact_error(path + " is not a model artifact");
    }
    return load_model(path);
}

PrefixCache load_prefix_checked(const std::string& path) {
    if (peek_artifact_kind(path) != ArtifactKind::prefix) {
        throw artifact_error(path + " is not a prefix artifact");
    }
    return load_prefix(path);
}

CalibrationStats load_stats_checked(const std::string& path) {
    if (peek_artifact_kind(path) != ArtifactKind::stats) {
        throw artifact_error(path + " is not a calibration-stats artifact");
    }
    return load_stats(path);
}

std::vector<TokenSeq> sample_texts(const TokenSeq& split, int64_t count, int64_t len,
                                   uint64_t seed, const std::string& tag) {
    SequenceSampler sampler(split, make_rng(seed, tag));
    std::vector<TokenSeq> out;
    for (int64_t i = 0; i < count; ++i) out.push_back(sampler.draw(len));
    return out;
}

double mean_ppl(const TransformerModel& model, const std::vector<TokenSeq>& texts,
                const PrefixCache* prefix, const QuantProfile* profile,
                const CalibrationStats* stats) {
    double ce = 0.0;
    for (const auto& t : texts) ce += std::log(perplexity(model, t, prefix, profile, stats));
    return std::exp(ce / static_cast<double>(texts.size()));
}

double mean_conditional_lq(const TransformerModel& model, const std::vector<TokenSeq>& texts,
                           const PrefixCache* prefix, const QuantSpec& spec,
                           const CalibrationStats* stats) {
    CaptureFlags cf;
    cf.quant_taps = true;
    cf.logits = false;
    double acc = 0.0;
    for (const auto& t : texts) {
        auto res = forward(model, t, prefix, nullptr, nullptr, cf);
        acc += conditional_quant_error(res.taps, spec, stats);
    }
    return acc / static_cast<double>(texts.size());
}

// Evaluation block shared by `eval` and `demo`: perplexities under the
// deployment profile plus the conditional error the pipeline optimizes.
json eval_block(const TransformerModel& model, const std::vector<TokenSeq>& texts,
                const PrefixCache* prefix, const QuantProfile& profile,
                const CalibrationStats* stats) {
    QuantSpec dyn = profile.acts;
    dyn.range_mode = RangeMode::dynamic;
    json j;
    j["ppl_fp"] = mean_ppl(model, texts, prefix, nullptr, nullptr);
    j["ppl_quant"] = mean_ppl(model, texts, prefix, &profile, stats);
    j["lq_conditional"] = mean_conditional_lq(model, texts, prefix, dyn, nullptr);
    if (stats && profile.acts.range_mode == RangeMode::static_range) {
        j["lq_static"] = mean_conditional_lq(model, texts, prefix, profile.acts, stats);
    }
    return j;
}

CalibrationStats run_calibration(const TransformerModel& model, const Corpus& corpus,
                                 const RunConfig& cfg, const PrefixCache* prefix) {
    auto texts = sample_texts(corpus.train, cfg.calib_sequences, cfg.eval_len, cfg.seed,
                              "calibrate.texts");
    return calibrate(model, texts, cfg.quant_profile(), prefix);
}

struct DemoArtifacts {
    fs::path dir;
    json summary;
};

DemoArtifacts run_demo(const RunConfig& cfg, bool verbose) {
    double t0 = now_s();
    DemoArtifacts out;
    out.dir = fs::path(cfg.out_dir);
    fs::create_directories(out.dir);
    fs::create_directories(out.dir / "analysis");

    write_text((out.dir / "config.ini").string(), cfg.serialize());
    Corpus corpus = Corpus::load(cfg.corpus, cfg.split_fraction);

    // 1. base model
    if (verbose) std::fprintf(stderr, "[demo] training base model (%lld steps)\n",
                              static_cast<long long>(cfg.train_steps));
    TrainOptions topt = cfg.train_options();
    topt.verbose = verbose;
    TrainResult trained = train_toy(cfg.model_config(), corpus, topt);
    save_model((out.dir / "model.cclb").string(), trained.model);
    const TransformerModel& model = trained.model;

    // 2. greedy prefix search
    if (verbose) std::fprintf(stderr, "[demo] greedy prefix search\n");
    SearchConfig scfg = cfg.search_config();
    CalibrationStats search_stats;
    if (scfg.quant.range_mode == RangeMode::static_range) {
        search_stats = run_calibration(model, corpus, cfg, nullptr);
        scfg.stats = &search_stats;
    }
    SearchResult search = greedy_search(model, corpus, scfg);
    write_json((out.dir / "search_trace.json").string(), trace_to_json(search.trace));
    if (search.prompt.empty()) {
        throw numeric_error("greedy search produced an empty prompt; nothing to tune");
    }
    save_prefix((out.dir / "greedy_prefix.cclb").string(), search.prefix);

    // 3. calibration with the greedy prefix; quantization-aware tuning
    if (verbose) std::fprintf(stderr, "[demo] tuning prefix (%lld epochs)\n",
                              static_cast<long long>(cfg.epochs));
    CalibrationStats stats_greedy = run_calibration(model, corpus, cfg, &search.prefix);
    save_stats((out.dir / "stats_greedy.ccst").string(), stats_greedy);
    TuneConfig tcfg = cfg.tune_config();
    tcfg.stats = &stats_greedy;
    TuneResult tuned = tune(model, corpus, search.prefix, tcfg);
    save_prefix((out.dir / "tuned_prefix.cclb").string(), tuned.prefix);
    write_json((out.dir / "tune_log.json").string(), tune_log_to_json(tuned, tcfg));

    // 4. per-arm calibration + evaluation
    if (verbose) std::fprintf(stderr, "[demo] evaluation\n");
    CalibrationStats stats_none = run_calibration(model, corpus, cfg, nullptr);
    save_stats((out.dir / "stats_noprefix.ccst").string(), stats_none);
    CalibrationStats stats_tuned = run_calibration(model, corpus, cfg, &tuned.prefix);
    save_stats((out.dir / "stats_tuned.ccst").string(), stats_tuned);

    auto eval_texts =
        sample_texts(corpus.heldout, cfg.eval_sequences, cfg.eval_len, cfg.seed, "eval.texts");
    QuantProfile profile = cfg.quant_profile();
    json eval;
    eval["schema_version"] = kReportSchemaVersion;
    eval["profile"] = profile.fingerprint();
    eval["no_prefix"] = eval_block(model, eval_texts, nullptr, profile, &stats_none);
    eval["greedy_prefix"] = eval_block(model, eval_texts, &search.prefix, profile, &stats_greedy);
    eval["tuned_prefix"] = eval_block(model, eval_texts, &tuned.prefix, profile, &stats_tuned);
    double lq_none = eval["no_prefix"]["lq_conditional"].get<double>();
    double lq_tuned = eval["tuned_prefix"]["lq_conditional"].get<double>();
    eval["lq_drop_pct"] = lq_none > 0 ? 100.0 * (1.0 - lq_tuned / lq_none) : 0.0;
    write_json((out.dir / "eval.json").string(), eval);

    // 5. analysis suite
    if (verbose) std::fprintf(stderr, "[demo] analysis\n");
    auto outlier_texts =
        sample_texts(corpus.heldout, 10, cfg.eval_len, cfg.seed, "analysis.outliers");
    OutlierReport out_before = outlier_stats(model, outlier_texts, nullptr, -1);
    OutlierReport out_after = outlier_stats(model, outlier_texts, &tuned.prefix, -1);
    write_json((out.dir / "analysis" / "outliers_noprefix.json").string(),
               outlier_to_json(out_before));
    write_json((out.dir / "analysis" / "outliers_prefix.json").string(),
               outlier_to_json(out_after));
    write_text((out.dir / "analysis" / "outliers_noprefix.csv").string(),
               outlier_to_csv(out_before));
    write_text((out.dir / "analysis" / "outliers_prefix.csv").string(), outlier_to_csv(out_after));
    write_text((out.dir / "analysis" / "outliers_noprefix.svg").string(),
               outlier_to_svg(out_before));
    write_text((out.dir / "analysis" / "outliers_prefix.svg").string(), outlier_to_svg(out_after));

    TokenSeq sink_text = sample_sequence(corpus.heldout, cfg.eval_len, cfg.seed ^ 0x51ee);
    CaptureFlags att_cf;
    att_cf.attention = true;
    att_cf.logits = false;
    auto att_before = forward(model, sink_text, nullptr, nullptr, nullptr, att_cf);
    auto att_after = forward(model, sink_text, &tuned.prefix, nullptr, nullptr, att_cf);
    SinkReport sink_before = sink_from_taps(att_before.taps);
    SinkReport sink_after = sink_from_taps(att_after.taps);
    write_json((out.dir / "analysis" / "sinks_noprefix.json").string(), sink_to_json(sink_before));
    write_json((out.dir / "analysis" / "sinks_prefix.json").string(), sink_to_json(sink_after));
    write_text((out.dir / "analysis" / "sinks_noprefix.csv").string(), sink_to_csv(sink_before));
    write_text((out.dir / "analysis" / "sinks_prefix.csv").string(), sink_to_csv(sink_after));
    write_text((out.dir / "analysis" / "attention_noprefix.svg").string(),
               attention_heatmap_svg(att_before.taps));
    write_text((out.dir / "analysis" / "attention_prefix.svg").string(),
               attention_heatmap_svg(att_after.taps));

    if (verbose) std::fprintf(stderr, "[demo] ablation\n");
    AblationConfig acfg;
    acfg.profile = profile;
    acfg.lq_spec = profile.acts;
    acfg.lq_spec.range_mode = RangeMode::dynamic;
    acfg.tune = tcfg;
    acfg.tune.stats = nullptr;  // per-arm wiring happens inside ablation_run
    acfg.eval_texts = std::min<int64_t>(cfg.eval_sequences, 5);
    acfg.eval_len = cfg.eval_len;
    acfg.calib_texts = std::min<int64_t>(cfg.calib_sequences, 8);
    acfg.seed = cfg.seed;
    acfg.greedy = &search.prefix;
    acfg.tuned = &tuned.prefix;
    AblationTable ablation = ablation_run(model, corpus, acfg);
    write_json((out.dir / "analysis" / "ablation.json").string(), ablation_to_json(ablation));
    write_text((out.dir / "analysis" / "ablation.csv").string(), ablation_to_csv(ablation));

    CostReport cost = cost_report(&search.trace, &tuned);
    cost.hardware = "single-threaded CPU";
    write_json((out.dir / "analysis" / "cost.json").string(), cost_to_json(cost));

    // summary
    json summary;
    summary["schema_version"] = kReportSchemaVersion;
    summary["train_final_loss"] = trained.final_loss;
    summary["train_unigram_entropy"] = trained.unigram_entropy;
    summary["prompt_rendered"] = render_tokens(search.prompt);
    summary["prompt_len"] = search.prompt.size();
    summary["stop_reason"] = search.trace.stop_reason;
    summary["ppl_static_no_prefix"] = eval["no_prefix"]["ppl_quant"];
    summary["ppl_static_tuned_prefix"] = eval["tuned_prefix"]["ppl_quant"];
    summary["ppl_fp_no_prefix"] = eval["no_prefix"]["ppl_fp"];
    summary["lq_drop_pct"] = eval["lq_drop_pct"];
    summary["mean_prefix_attention_mass"] = sink_after.mean_prefix_mass;
    summary["uniform_baseline"] = sink_after.uniform_baseline;
    summary["timing"] = {{"total_seconds", now_s() - t0},
                         {"search_seconds", search.trace.total_seconds},
                         {"tune_seconds", tuned.seconds}};
    write_json((out.dir / "demo_summary.json").string(), summary);
    out.summary = summary;
    return out;
}

int dispatch(CLI::App& app) {
    if (app.got_subcommand("train")) return 10;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantization-friendly prefix laboratory"};
    app.require_subcommand(1);

    std::string config_path, model_path, prefix_path, tuned_path, stats_path, out_path;
    std::string out_prefix, out_trace, out_dir, log_path;
    double tau_override = -1.0, lambda_override = -1.0;
    int threads_override = 0;
    bool verbose = false;
    bool plot = false;

    auto* c_train = app.add_subcommand("train", "train the toy base model");
    c_train->add_option("--config", config_path);
    c_train->add_option("--out", out_path)->required();
    c_train->add_flag("--verbose", verbose);

    auto* c_calib = app.add_subcommand("calibrate", "collect static-range calibration stats");
    c_calib->add_option("--config", config_path);
    c_calib->add_option("--model", model_path)->required();
    c_calib->add_option("--prefix", prefix_path);
    c_calib->add_option("--out", out_path)->required();

    auto* c_search = app.add_subcommand("search", "greedy prefix search");
    c_search->add_option("--config", config_path);
    c_search->add_option("--model", model_path)->required();
    c_search->add_option("--stats", stats_path);
    c_search->add_option("--out-prefix", out_prefix)->required();
    c_search->add_option("--out-trace", out_trace)->required();
    c_search->add_option("--tau", tau_override);
    c_search->add_option("--threads", threads_override);

    auto* c_tune = app.add_subcommand("tune", "quantization-aware prefix tuning");
    c_tune->add_option("--config", config_path);
    c_tune->add_option("--model", model_path)->required();
    c_tune->add_option("--prefix", prefix_path)->required();
    c_tune->add_option("--stats", stats_path);
    c_tune->add_option("--out", out_path)->required();
    c_tune->add_option("--log", log_path)->required();
    c_tune->add_option("--lambda", lambda_override);

    auto* c_eval = app.add_subcommand("eval", "perplexity + quantization error");
    c_eval->add_option("--config", config_path);
    c_eval->add_option("--model", model_path)->required();
    c_eval->add_option("--prefix", prefix_path);
    c_eval->add_option("--stats", stats_path);
    c_eval->add_option("--out", out_path)->required();

    auto* c_analyze = app.add_subcommand("analyze", "outlier / sink / ablation / cost reports");
    c_analyze->add_option("--config", config_path);
    c_analyze->add_option("--model", model_path)->required();
    c_analyze->add_option("--prefix", prefix_path)->required();
    c_analyze->add_option("--tuned", tuned_path);
    c_analyze->add_option("--out-dir", out_dir)->required();
    c_analyze->add_flag("--plot", plot);

    auto* c_demo = app.add_subcommand("demo", "full pipeline on the bundled corpus");
    c_demo->add_option("--config", config_path);
    c_demo->add_option("--out-dir", out_dir);
    c_demo->add_flag("--verbose", verbose);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        json err{{"error", {{"type", "config"}, {"message", e.what()}}}};
        std::printf("%s\n", err.dump().c_str());
        return 2;
    }

    try {
        RunConfig cfg = load_config(config_path);

        if (app.got_subcommand(c_train)) {
            Corpus corpus = Corpus::load(cfg.corpus, cfg.split_fraction);
            TrainOptions topt = cfg.train_options();
            topt.verbose = verbose;
            TrainResult res = train_toy(cfg.model_config(), corpus, topt);
            save_model(out_path, res.model);
            json j{{"final_loss", res.final_loss},
                   {"unigram_entropy", res.unigram_entropy},
                   {"steps", res.loss_history.size()},
                   {"out", out_path}};
            std::printf("%s\n", j.dump().c_str());
        } else if (app.got_subcommand(c_calib)) {
            TransformerModel model = load_model_checked(model_path);
            Corpus corpus = Corpus::load(cfg.corpus, cfg.split_fraction);
            PrefixCache prefix;
            const PrefixCache* pp = nullptr;
            if (!prefix_path.empty()) {
                prefix = load_prefix_checked(prefix_path);
                pp = &prefix;
            }
            CalibrationStats stats = run_calibration(model, corpus, cfg, pp);
            save_stats(out_path, stats);
            json j{{"taps", stats.final.size()}, {"out", out_path}};
            std::printf("%s\n", j.dump().c_str());
        } else if (app.got_subcommand(c_search)) {
            TransformerModel model = load_model_checked(model_path);
            Corpus corpus = Corpus::load(cfg.corpus, cfg.split_fraction);
            SearchConfig scfg = cfg.search_config();
            if (tau_override > 0) scfg.tau = tau_override;
            if (threads_override > 0) scfg.threads = threads_override;
            CalibrationStats stats;
            if (!stats_path.empty()) {
                stats = load_stats_checked(stats_path);
                scfg.stats = &stats;
            } else if (scfg.quant.range_mode == RangeMode::static_range) {
                throw config_error("search.range = static requires --stats");
            }
            SearchResult res = greedy_search(model, corpus, scfg);
            write_json(out_trace, trace_to_json(res.trace));
            if (!res.prompt.empty()) save_prefix(out_prefix, res.prefix);
            json j{{"prompt_tokens", res.prompt},
                   {"prompt_rendered", render_tokens(res.prompt)},
                   {"stop_reason", res.trace.stop_reason},
                   {"prefix_written", !res.prompt.empty()}};
            std::printf("%s\n", j.dump().c_str());
        } else if (app.got_subcommand(c_tune)) {
            TransformerModel model = load_model_checked(model_path);
            Corpus corpus = Corpus::load(cfg.corpus, cfg.split_fraction);
            PrefixCache prefix = load_prefix_checked(prefix_path);
            TuneConfig tcfg = cfg.tune_config();
            if (lambda_override >= 0) tcfg.lambda = lambda_override;
            CalibrationStats stats;
            if (!stats_path.empty()) {
                stats = load_stats_checked(stats_path);
                tcfg.stats = &stats;
            } else if (tcfg.quant.acts.range_mode == RangeMode::static_range ||
                       tcfg.quant.smooth_alpha > 0.f) {
                throw config_error("static-range or migrated tuning requires --stats");
            }
            TuneResult res = tune(model, corpus, prefix, tcfg);
            save_prefix(out_path, res.prefix);
            write_json(log_path, tune_log_to_json(res, tcfg));
            json j{{"steps", res.loss_history.size()},
                   {"aborted", res.aborted},
                   {"out", out_path}};
            std::printf("%s\n", j.dump().c_str());
            if (res.aborted) return 4;
        } else if (app.got_subcommand(c_eval)) {
            TransformerModel model = load_model_checked(model_path);
            Corpus corpus = Corpus::load(cfg.corpus, cfg.split_fraction);
            PrefixCache prefix;
            const PrefixCache* pp = nullptr;
            if (!prefix_path.empty()) {
                prefix = load_prefix_checked(prefix_path);
                pp = &prefix;
            }
            CalibrationStats stats;
            const CalibrationStats* sp = nullptr;
            QuantProfile profile = cfg.quant_profile();
            if (!stats_path.empty()) {
                stats = load_stats_checked(stats_path);
                sp = &stats;
            } else if (profile.acts.range_mode == RangeMode::static_range ||
                       profile.smooth_alpha > 0.f) {
                throw config_error("static-range or migrated eval requires --stats");
            }
            auto texts = sample_texts(corpus.heldout, cfg.eval_sequences, cfg.eval_len, cfg.seed,
                                      "eval.texts");
            json j;
            j["schema_version"] = kReportSchemaVersion;
            j["profile"] = profile.fingerprint();
            j["prefix"] = pp ? "present" : "none";
            j["result"] = eval_block(model, texts, pp, profile, sp);
            write_json(out_path, j);
            std::printf("%s\n", j["result"].dump().c_str());
        } else if (app.got_subcommand(c_analyze)) {
            TransformerModel model = load_model_checked(model_path);
            Corpus corpus = Corpus::load(cfg.corpus, cfg.split_fraction);
            PrefixCache greedy = load_prefix_checked(prefix_path);
            PrefixCache tuned;
            const PrefixCache* tp = nullptr;
            if (!tuned_path.empty()) {
                tuned = load_prefix_checked(tuned_path);
                tp = &tuned;
            }
            fs::create_directories(out_dir);
            const PrefixCache* best = tp ? tp : &greedy;

            auto texts = sample_texts(corpus.heldout, 10, cfg.eval_len, cfg.seed,
                                      "analysis.outliers");
            OutlierReport ob = outlier_stats(model, texts, nullptr, -1);
            OutlierReport oa = outlier_stats(model, texts, best, -1);
            write_json((fs::path(out_dir) / "outliers_noprefix.json").string(), outlier_to_json(ob));
            write_json((fs::path(out_dir) / "outliers_prefix.json").string(), outlier_to_json(oa));
            write_text((fs::path(out_dir) / "outliers_noprefix.csv").string(), outlier_to_csv(ob));
            write_text((fs::path(out_dir) / "outliers_prefix.csv").string(), outlier_to_csv(oa));
            if (plot) {
                write_text((fs::path(out_dir) / "outliers_noprefix.svg").string(), outlier_to_svg(ob));
                write_text((fs::path(out_dir) / "outliers_prefix.svg").string(), outlier_to_svg(oa));
            }

            TokenSeq sink_text = sample_sequence(corpus.heldout, cfg.eval_len, cfg.seed ^ 0x51ee);
            SinkReport sb = sink_report(model, sink_text, nullptr);
            SinkReport sa = sink_report(model, sink_text, best);
            write_json((fs::path(out_dir) / "sinks_noprefix.json").string(), sink_to_json(sb));
            write_json((fs::path(out_dir) / "sinks_prefix.json").string(), sink_to_json(sa));
            write_text((fs::path(out_dir) / "sinks_noprefix.csv").string(), sink_to_csv(sb));
            write_text((fs::path(out_dir) / "sinks_prefix.csv").string(), sink_to_csv(sa));
            if (plot) {
                CaptureFlags att_cf;
                att_cf.attention = true;
                att_cf.logits = false;
                auto ta = forward(model, sink_text, best, nullptr, nullptr, att_cf);
                write_text((fs::path(out_dir) / "attention_prefix.svg").string(),
                           attention_heatmap_svg(ta.taps));
            }

            AblationConfig acfg;
            acfg.profile = cfg.quant_profile();
            acfg.lq_spec = acfg.profile.acts;
            acfg.lq_spec.range_mode = RangeMode::dynamic;
            acfg.tune = cfg.tune_config();
            acfg.eval_texts = std::min<int64_t>(cfg.eval_sequences, 5);
            acfg.eval_len = cfg.eval_len;
            acfg.calib_texts = std::min<int64_t>(cfg.calib_sequences, 8);
            acfg.seed = cfg.seed;
            acfg.greedy = &greedy;
            acfg.tuned = tp;
            AblationTable table = ablation_run(model, corpus, acfg);
            write_json((fs::path(out_dir) / "ablation.json").string(), ablation_to_json(table));
            write_text((fs::path(out_dir) / "ablation.csv").string(), ablation_to_csv(table));
            std::printf("{\"out_dir\": \"%s\"}\n", out_dir.c_str());
        } else if (app.got_subcommand(c_demo)) {
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            DemoArtifacts res = run_demo(cfg, verbose);
            std::printf("%s\n", res.summary.dump(2).c_str());
        }
    } catch (const config_error& e) {
        json err{{"error", {{"type", "config"}, {"message", e.what()}}}};
        std::printf("%s\n", err.dump().c_str());
        return 2;
    } catch (const contract_error& e) {
        json err{{"error", {{"type", "contract"}, {"message", e.what()}}}};
        std::printf("%s\n", err.dump().c_str());
        return 2;
    } catch (const artifact_error& e) {
        json err{{"error", {{"type", "artifact"}, {"message", e.what()}}}};
        std::printf("%s\n", err.dump().c_str());
        return 3;
    } catch (const numeric_error& e) {
        json err{{"error", {{"type", "numeric"}, {"message", e.what()}}}};
        std::printf("%s\n", err.dump().c_str());
        return 4;
    } catch (const std::exception& e) {
        json err{{"error", {{"type", "internal"}, {"message", e.what()}}}};
        std::printf("%s\n", err.dump().c_str());
        return 1;
    }
    return 0;
}
