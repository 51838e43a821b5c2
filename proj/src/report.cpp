#include "pq/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pq/data.hpp"
#include "pq/errors.hpp"

namespace pq {

using nlohmann::json;

nlohmann::json trace_to_json(const SearchTrace& trace) {
    json steps = json::array();
    json per_step_ms = json::array();
    for (const auto& s : trace.steps) {
        char idbuf[20];
        std::snprintf(idbuf, sizeof(idbuf), "%016llx", static_cast<unsigned long long>(s.text_id));
        steps.push_back({{"step", s.step},
                         {"text_id", idbuf},
                         {"token", s.chosen_token},
                         {"lq_before", s.lq_before},
                         {"lq_after", s.lq_after},
                         {"accepted", s.accepted}});
        per_step_ms.push_back(s.wall_ms);
    }
    return json{{"schema_version", kReportSchemaVersion},
                {"prompt_tokens", trace.prompt},
                {"prompt_rendered", render_tokens(trace.prompt)},
                {"stop_reason", trace.stop_reason},
                {"steps", steps},
                {"timing", {{"total_seconds", trace.total_seconds}, {"per_step_ms", per_step_ms}}}};
}

nlohmann::json tune_log_to_json(const TuneResult& result, const TuneConfig& cfg) {
    return json{{"schema_version", kReportSchemaVersion},
                {"lambda", cfg.lambda},
                {"epochs", cfg.epochs},
                {"lr", cfg.lr},
                {"batch_size", cfg.batch_size},
                {"steps", result.loss_history.size()},
                {"loss", result.loss_history},
                {"l_pred", result.lpred_history},
                {"l_q", result.lq_history},
                {"aborted", result.aborted},
                {"diagnostic", result.diagnostic},
                {"timing", {{"seconds", result.seconds}}}};
}

nlohmann::json outlier_to_json(const OutlierReport& report) {
    json layers = json::array();
    for (const auto& l : report.layers) {
        layers.push_back({{"layer", l.layer},
                          {"top1", l.top1},
                          {"top2", l.top2},
                          {"top3", l.top3},
                          {"p90", l.p90},
                          {"median", l.median}});
    }
    return json{{"schema_version", kReportSchemaVersion},
                {"samples", report.samples},
                {"seq_len", report.seq_len},
                {"prefix", report.prefix_provenance},
                {"layers", layers}};
}

nlohmann::json sink_to_json(const SinkReport& report) {
    json heads = json::array();
    for (const auto& h : report.heads) {
        heads.push_back({{"layer", h.layer},
                         {"head", h.head},
                         {"prefix_mass", h.prefix_mass},
                         {"first_content_mass", h.first_content_mass},
                         {"entropy", h.entropy}});
    }
    return json{{"schema_version", kReportSchemaVersion},
                {"prefix_len", report.prefix_len},
                {"ctx_len", report.ctx_len},
                {"uniform_baseline", report.uniform_baseline},
                {"mean_prefix_mass", report.mean_prefix_mass},
                {"mean_first_content_mass", report.mean_first_content_mass},
                {"heads", heads}};
}

nlohmann::json ablation_to_json(const AblationTable& table) {
    json arms = json::array();
    for (const auto& a : table.arms) {
        arms.push_back({{"arm", a.name}, {"lq", a.lq}, {"ppl", a.ppl}});
    }
    return json{{"schema_version", kReportSchemaVersion},
                {"arms", arms},
                {"lq_monotone", table.lq_monotone},
                {"note", table.note}};
}

nlohmann::json cost_to_json(const CostReport& report) {
    json j{{"schema_version", kReportSchemaVersion},
           {"hardware", report.hardware},
           {"timing",
            {{"step1_search_seconds", report.step1_present ? json(report.step1_seconds) : json()},
             {"step2_tune_seconds", report.step2_present ? json(report.step2_seconds) : json()}}}};
    j["step1_present"] = report.step1_present;
    j["step2_present"] = report.step2_present;
    return j;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw artifact_error("cannot write report: " + path);
    out << j.dump(2) << "\n";
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw artifact_error("cannot open report: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw artifact_error("malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw artifact_error("cannot write file: " + path);
    out << text;
}

std::string outlier_to_csv(const OutlierReport& report) {
    std::ostringstream os;
    os << "layer,top1,top2,top3,p90,median\n";
    char buf[160];
    for (const auto& l : report.layers) {
        std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                      static_cast<long long>(l.layer), l.top1, l.top2, l.top3, l.p90, l.median);
        os << buf;
    }
    return os.str();
}

std::string sink_to_csv(const SinkReport& report) {
    std::ostringstream os;
    os << "layer,head,prefix_mass,first_content_mass,entropy\n";
    char buf[160];
    for (const auto& h : report.heads) {
        std::snprintf(buf, sizeof(buf), "%lld,%lld,%.9g,%.9g,%.9g\n",
                      static_cast<long long>(h.layer), static_cast<long long>(h.head),
                      h.prefix_mass, h.first_content_mass, h.entropy);
        os << buf;
    }
    return os.str();
}

std::string ablation_to_csv(const AblationTable& table) {
    std::ostringstream os;
    os << "arm,lq,ppl\n";
    char buf[160];
    for (const auto& a : table.arms) {
        std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g\n", a.name.c_str(), a.lq, a.ppl);
        os << buf;
    }
    return os.str();
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace

std::string outlier_to_svg(const OutlierReport& report) {
    const int w = 640, h = 400, ml = 70, mr = 20, mt = 30, mb = 50;
    const int pw = w - ml - mr, ph = h - mt - mb;
    double lo = 1e30, hi = -1e30;
    for (const auto& l : report.layers) {
        lo = std::min(lo, std::max(1e-8, l.median));
        hi = std::max(hi, l.top1);
    }
    if (!(hi > lo)) hi = lo * 10.0;
    double llo = std::log10(lo), lhi = std::log10(hi);
    if (lhi - llo < 0.5) lhi = llo + 0.5;
    auto xf = [&](size_t i) {
        size_t n = std::max<size_t>(report.layers.size(), 2);
        return ml + static_cast<double>(pw) * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    auto yf = [&](double v) {
        double lv = std::log10(std::max(v, 1e-8));
        return mt + ph - ph * (lv - llo) / (lhi - llo);
    };
    std::ostringstream os;
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << w / 2 << "' y='18' text-anchor='middle' font-size='13'>"
       << "activation magnitude by layer (prefix: " << report.prefix_provenance << ")</text>\n";
    const char* colors[5] = {"#c0392b", "#e67e22", "#f1c40f", "#2980b9", "#27ae60"};
    const char* names[5] = {"top1", "top2", "top3", "p90", "median"};
    for (int series = 0; series < 5; ++series) {
        os << "<polyline fill='none' stroke='" << colors[series] << "' stroke-width='1.5' points='";
        for (size_t i = 0; i < report.layers.size(); ++i) {
            const auto& l = report.layers[i];
            double v = series == 0   ? l.top1
                       : series == 1 ? l.top2
                       : series == 2 ? l.top3
                       : series == 3 ? l.p90
                                     : l.median;
            os << fmt(xf(i)) << "," << fmt(yf(v)) << " ";
        }
        os << "'/>\n";
        os << "<text x='" << w - mr - 60 << "' y='" << mt + 16 * (series + 1) << "' fill='"
           << colors[series] << "' font-size='11'>" << names[series] << "</text>\n";
    }
    for (size_t i = 0; i < report.layers.size(); ++i) {
        os << "<text x='" << fmt(xf(i)) << "' y='" << h - mb + 16
           << "' text-anchor='middle' font-size='10'>" << report.layers[i].layer << "</text>\n";
    }
    os << "<text x='" << w / 2 << "' y='" << h - 12
       << "' text-anchor='middle' font-size='11'>layer</text>\n";
    os << "<text x='14' y='" << mt + ph / 2
       << "' font-size='11' transform='rotate(-90 14 " << mt + ph / 2 << ")'>|activation| (log)</text>\n";
    os << "</svg>\n";
    return os.str();
}

std::string attention_heatmap_svg(const TapRecord& taps) {
    if (taps.attention.empty()) throw contract_error("no attention captured for heatmap");
    const int max_cells = 96;
    const int cell = 4;
    std::ostringstream os;
    const size_t n_layers = taps.attention.size();
    const Tensor& first = taps.attention[0][0];
    int64_t rows = first.dim(0), ctx = first.dim(1);
    int64_t rstep = std::max<int64_t>(1, (rows + max_cells - 1) / max_cells);
    int64_t cstep = std::max<int64_t>(1, (ctx + max_cells - 1) / max_cells);
    int64_t gr = (rows + rstep - 1) / rstep, gc = (ctx + cstep - 1) / cstep;
    const int panel_w = static_cast<int>(gc) * cell + 20;
    const int panel_h = static_cast<int>(gr) * cell + 34;
    const int w = panel_w * static_cast<int>(n_layers) + 20;
    const int h = panel_h + 20;
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    for (size_t l = 0; l < n_layers; ++l) {
        const auto& heads = taps.attention[l];
        const int ox = 10 + static_cast<int>(l) * panel_w;
        const int oy = 28;
        os << "<text x='" << ox << "' y='18' font-size='11'>layer " << l
           << " (mean over heads)</text>\n";
        for (int64_t rb = 0; rb < gr; ++rb) {
            for (int64_t cb = 0; cb < gc; ++cb) {
                double acc = 0.0;
                int64_t cnt = 0;
                for (const auto& att : heads) {
                    for (int64_t r = rb * rstep; r < std::min(rows, (rb + 1) * rstep); ++r) {
                        for (int64_t c = cb * cstep; c < std::min(ctx, (cb + 1) * cstep); ++c) {
                            acc += att.at(r, c);
                            ++cnt;
                        }
                    }
                }
                double v = cnt ? acc / static_cast<double>(cnt) : 0.0;
                double shade = std::min(1.0, std::pow(v * static_cast<double>(ctx), 0.5) * 0.6);
                int g = static_cast<int>(255.0 * (1.0 - shade));
                os << "<rect x='" << ox + cb * cell << "' y='" << oy + rb * cell << "' width='"
                   << cell << "' height='" << cell << "' fill='rgb(" << 255 - (255 - g) / 2 << ","
                   << g << "," << g << ")'/>\n";
            }
        }
        if (taps.attn_prefix_cols > 0) {
            int64_t px = (taps.attn_prefix_cols + cstep - 1) / cstep;
            os << "<rect x='" << ox << "' y='" << oy << "' width='" << px * cell << "' height='"
               << gr * cell << "' fill='none' stroke='#2980b9' stroke-width='1.5'/>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace pq
