#include "pq/quant.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pq/errors.hpp"

namespace pq {

void QuantSpec::validate() const {
    if (bits < 2 || bits > 16) {
        throw contract_error("quant bits must be in [2, 16], got " + std::to_string(bits));
    }
    if (granularity == Granularity::per_channel_group && group_size < 1) {
        throw contract_error("group_size must be >= 1");
    }
}

float QuantSpec::qlo() const {
    return symmetry == Symmetry::symmetric ? -(std::ldexp(1.f, bits - 1) - 1.f) : 0.f;
}

float QuantSpec::qhi() const {
    return symmetry == Symmetry::symmetric ? std::ldexp(1.f, bits - 1) - 1.f
                                           : std::ldexp(1.f, bits) - 1.f;
}

std::string QuantProfile::fingerprint() const {
    auto spec_str = [](const QuantSpec& s) {
        std::ostringstream os;
        os << s.bits << (s.symmetry == Symmetry::symmetric ? "s" : "a")
           << static_cast<int>(s.granularity) << "g" << s.group_size
           << (s.range_mode == RangeMode::dynamic ? "d" : "c");
        return os.str();
    };
    std::ostringstream os;
    os << "w" << spec_str(weights) << "_a" << spec_str(acts) << "_m" << smooth_alpha;
    return os.str();
}

void TapStats::update_row(const float* row, int64_t width) {
    if (ch_min.empty()) {
        ch_min.assign(static_cast<size_t>(width), row[0]);
        ch_max.assign(static_cast<size_t>(width), row[0]);
        for (int64_t j = 0; j < width; ++j) {
            ch_min[static_cast<size_t>(j)] = row[j];
            ch_max[static_cast<size_t>(j)] = row[j];
        }
    } else {
        if (static_cast<int64_t>(ch_min.size()) != width) {
            throw contract_error("calibration tap width changed between batches");
        }
        for (int64_t j = 0; j < width; ++j) {
            ch_min[static_cast<size_t>(j)] = std::min(ch_min[static_cast<size_t>(j)], row[j]);
            ch_max[static_cast<size_t>(j)] = std::max(ch_max[static_cast<size_t>(j)], row[j]);
        }
    }
    ++observations;
}

void TapStats::update(const Tensor& x, const std::vector<uint8_t>* content_mask) {
    int64_t rows = x.rows(), cols = x.cols();
    for (int64_t r = 0; r < rows; ++r) {
        if (content_mask && !(*content_mask)[static_cast<size_t>(r)]) continue;
        update_row(x.data() + r * cols, cols);
    }
}

void TapStats::merge(const TapStats& other) {
    if (other.ch_min.empty()) return;
    if (ch_min.empty()) {
        *this = other;
        return;
    }
    if (ch_min.size() != other.ch_min.size()) {
        throw contract_error("cannot merge calibration stats of different widths");
    }
    for (size_t j = 0; j < ch_min.size(); ++j) {
        ch_min[j] = std::min(ch_min[j], other.ch_min[j]);
        ch_max[j] = std::max(ch_max[j], other.ch_max[j]);
    }
    observations += other.observations;
}

float TapStats::tensor_min() const {
    if (ch_min.empty()) throw contract_error("calibration stats are empty");
    return *std::min_element(ch_min.begin(), ch_min.end());
}

float TapStats::tensor_max() const {
    if (ch_max.empty()) throw contract_error("calibration stats are empty");
    return *std::max_element(ch_max.begin(), ch_max.end());
}

std::vector<float> TapStats::absmax() const {
    std::vector<float> out(ch_min.size());
    for (size_t j = 0; j < ch_min.size(); ++j) {
        out[j] = std::max(std::fabs(ch_min[j]), std::fabs(ch_max[j]));
    }
    return out;
}

namespace {

// (s, z) for one unit from its observed range.
void unit_params(float mn, float mx, const QuantSpec& spec, float& s, float& z) {
    if (spec.symmetry == Symmetry::symmetric) {
        float absmax = std::max(std::fabs(mn), std::fabs(mx));
        float denom = std::ldexp(1.f, spec.bits - 1) - 1.f;
        s = absmax / denom;
        z = 0.f;
    } else {
        float denom = std::ldexp(1.f, spec.bits) - 1.f;
        s = (mx - mn) / denom;
        z = mn;
    }
    if (!(s > 0.f) || !std::isfinite(s)) {
        s = 1.f;  // degenerate range: constant tensors quantize losslessly
    }
}

}  // namespace

QuantParams resolve_params(const Tensor& x, const QuantSpec& spec, const TapStats* stats) {
    spec.validate();
    QuantParams p;
    p.cols = x.cols();
    p.qlo = spec.qlo();
    p.qhi = spec.qhi();

    switch (spec.granularity) {
        case Granularity::per_tensor: {
            p.rows = 1;
            p.groups = 1;
            p.group_size = p.cols;
            float mn, mx;
            if (spec.range_mode == RangeMode::static_range) {
                if (!stats) {
                    throw contract_error("static-range quantization requires calibration stats");
                }
                mn = stats->tensor_min();
                mx = stats->tensor_max();
            } else {
                mn = x[0];
                mx = x[0];
                for (int64_t i = 1; i < x.numel(); ++i) {
                    mn = std::min(mn, x[i]);
                    mx = std::max(mx, x[i]);
                }
            }
            p.scale.resize(1);
            p.zero.resize(1);
            unit_params(mn, mx, spec, p.scale[0], p.zero[0]);
            // per-tensor params apply to every element regardless of row split
            p.rows = x.rows();
            p.groups = 1;
            p.group_size = p.cols;
            p.scale.assign(static_cast<size_t>(p.rows), p.scale[0]);
            p.zero.assign(static_cast<size_t>(p.rows), p.zero[0]);
            return p;
        }
        case Granularity::per_token: {
            if (spec.range_mode == RangeMode::static_range) {
                throw contract_error("per-token quantization is dynamic by construction");
            }
            p.rows = x.rows();
            p.groups = 1;
            p.group_size = p.cols;
            p.scale.resize(static_cast<size_t>(p.rows));
            p.zero.resize(static_cast<size_t>(p.rows));
            for (int64_t r = 0; r < p.rows; ++r) {
                const float* row = x.data() + r * p.cols;
                float mn = row[0], mx = row[0];
                for (int64_t j = 1; j < p.cols; ++j) {
                    mn = std::min(mn, row[j]);
                    mx = std::max(mx, row[j]);
                }
                unit_params(mn, mx, spec, p.scale[static_cast<size_t>(r)],
                            p.zero[static_cast<size_t>(r)]);
            }
            return p;
        }
        case Granularity::per_channel_group: {
            if (spec.range_mode == RangeMode::static_range) {
                throw contract_error("static range is not supported for per-channel-group");
            }
            int64_t gs = std::min<int64_t>(spec.group_size, p.cols);
            if (p.cols % gs != 0) {
                throw contract_error("group_size " + std::to_string(gs) +
                                     " does not divide channel dim " + std::to_string(p.cols));
            }
            p.rows = x.rows();
            p.groups = p.cols / gs;
            p.group_size = gs;
            p.scale.resize(static_cast<size_t>(p.rows * p.groups));
            p.zero.resize(static_cast<size_t>(p.rows * p.groups));
            for (int64_t r = 0; r < p.rows; ++r) {
                for (int64_t g = 0; g < p.groups; ++g) {
                    const float* seg = x.data() + r * p.cols + g * gs;
                    float mn = seg[0], mx = seg[0];
                    for (int64_t j = 1; j < gs; ++j) {
                        mn = std::min(mn, seg[j]);
                        mx = std::max(mx, seg[j]);
                    }
                    unit_params(mn, mx, spec, p.scale[static_cast<size_t>(r * p.groups + g)],
                                p.zero[static_cast<size_t>(r * p.groups + g)]);
                }
            }
            return p;
        }
    }
    throw contract_error("unreachable granularity");
}

namespace {

inline float fq_element(float x, float s, float z, float qlo, float qhi) {
    float idx = std::nearbyintf((x - z) / s);  // round-half-to-even (default FP env)
    idx = std::min(std::max(idx, qlo), qhi);
    return s * idx + z;
}

inline bool in_grid(float x, float s, float z, float qlo, float qhi) {
    float idx = std::nearbyintf((x - z) / s);
    return idx >= qlo && idx <= qhi;
}

}  // namespace

Tensor fake_quant(const Tensor& x, const QuantParams& params) {
    Tensor out(x.shape());
    const float* px = x.data();
    float* po = out.data();
    for (int64_t i = 0; i < x.numel(); ++i) {
        int64_t u = params.unit_of(i);
        po[i] = fq_element(px[i], params.scale[static_cast<size_t>(u)],
                           params.zero[static_cast<size_t>(u)], params.qlo, params.qhi);
    }
    return out;
}

ag::Value fake_quant_ste(const ag::Value& x, const QuantParams& params) {
    Tensor out = fake_quant(x->value, params);
    std::vector<uint8_t> mask(static_cast<size_t>(x->value.numel()));
    const float* px = x->value.data();
    for (int64_t i = 0; i < x->value.numel(); ++i) {
        int64_t u = params.unit_of(i);
        mask[static_cast<size_t>(i)] = in_grid(px[i], params.scale[static_cast<size_t>(u)],
                                               params.zero[static_cast<size_t>(u)], params.qlo,
                                               params.qhi)
                                           ? 1
                                           : 0;
    }
    return ag::make_op(std::move(out), {x}, [mask](ag::Node& nd) {
        Tensor g(nd.parents[0]->value.shape());
        for (int64_t i = 0; i < g.numel(); ++i) {
            g[i] = mask[static_cast<size_t>(i)] ? (*nd.grad)[i] : 0.f;
        }
        nd.parents[0]->add_grad(g);
    });
}

namespace {

// Shared core: ranges and error restricted to rows where mask != 0 (or all
// rows when mask is null).
double masked_tap_error(const Tensor& x, const std::vector<uint8_t>* mask, const QuantSpec& spec,
                        const TapStats* stats) {
    int64_t rows = x.rows(), cols = x.cols();
    int64_t kept = 0;
    Tensor sel;
    const Tensor* src = &x;
    if (mask) {
        std::vector<float> buf;
        buf.reserve(static_cast<size_t>(rows * cols));
        for (int64_t r = 0; r < rows; ++r) {
            if (!(*mask)[static_cast<size_t>(r)]) continue;
            const float* row = x.data() + r * cols;
            buf.insert(buf.end(), row, row + cols);
            ++kept;
        }
        sel = Tensor({kept, cols}, std::move(buf));
        src = &sel;
    }
    QuantParams params = resolve_params(*src, spec, stats);
    double err = 0.0;
    const float* p = src->data();
    for (int64_t i = 0; i < src->numel(); ++i) {
        int64_t u = params.unit_of(i);
        float q = fq_element(p[i], params.scale[static_cast<size_t>(u)],
                             params.zero[static_cast<size_t>(u)], params.qlo, params.qhi);
        double d = static_cast<double>(p[i]) - q;
        err += d * d;
    }
    return err;
}

}  // namespace

QuantErrorResult quant_error(const TapRecord& taps, const QuantSpec& act_spec,
                             const CalibrationStats* stats) {
    QuantErrorResult res;
    if (taps.quant_tap_names.empty()) {
        res.empty_taps = true;
        return res;
    }
    for (const auto& name : taps.quant_tap_names) {
        auto it = taps.activations.find(name);
        if (it == taps.activations.end()) {
            throw contract_error("tap record is missing activation '" + name + "'");
        }
        const TapStats* ts = stats ? stats->find(name) : nullptr;
        if (stats && act_spec.range_mode == RangeMode::static_range && !ts) {
            throw contract_error("calibration stats have no entry for tap '" + name + "'");
        }
        res.value += masked_tap_error(it->second, nullptr, act_spec, ts);
    }
    return res;
}

double conditional_quant_error(const TapRecord& taps, const QuantSpec& act_spec,
                               const CalibrationStats* stats) {
    if (taps.quant_tap_names.empty()) {
        throw contract_error("conditional quantization error needs at least one tap");
    }
    bool all_content = true;
    int64_t content = 0;
    for (uint8_t m : taps.content_mask) {
        if (m) {
            ++content;
        } else {
            all_content = false;
        }
    }
    if (content == 0) {
        throw contract_error("tap record has no content positions");
    }
    double err = 0.0;
    for (const auto& name : taps.quant_tap_names) {
        auto it = taps.activations.find(name);
        if (it == taps.activations.end()) {
            throw contract_error("tap record is missing activation '" + name + "'");
        }
        const TapStats* ts = stats ? stats->find(name) : nullptr;
        if (stats && act_spec.range_mode == RangeMode::static_range && !ts) {
            throw contract_error("calibration stats have no entry for tap '" + name + "'");
        }
        err += masked_tap_error(it->second, all_content ? nullptr : &taps.content_mask, act_spec, ts);
    }
    return err;
}

MigrationResult smooth_migrate(const Tensor& weight, const std::vector<float>& act_absmax,
                               float alpha) {
    if (alpha < 0.f || alpha > 1.f) {
        throw contract_error("migration strength must lie in [0, 1], got " + std::to_string(alpha));
    }
    if (weight.rank() != 2) throw contract_error("smooth_migrate expects a rank-2 weight");
    int64_t out_dim = weight.dim(0), in_dim = weight.dim(1);
    if (static_cast<int64_t>(act_absmax.size()) != in_dim) {
        throw contract_error("act_absmax size does not match weight input dim");
    }
    MigrationResult res;
    res.divisor.resize(static_cast<size_t>(in_dim), 1.f);
    for (int64_t j = 0; j < in_dim; ++j) {
        float wmax = 0.f;
        for (int64_t o = 0; o < out_dim; ++o) wmax = std::max(wmax, std::fabs(weight.at(o, j)));
        float amax = act_absmax[static_cast<size_t>(j)];
        if (amax < 1e-8f || wmax < 1e-8f) continue;  // zero_channel guard
        float div = std::pow(amax, alpha) / std::pow(wmax, 1.f - alpha);
        if (!std::isfinite(div) || div < 1e-8f) div = 1.f;
        res.divisor[static_cast<size_t>(j)] = div;
    }
    res.scaled_weight = weight;
    for (int64_t o = 0; o < out_dim; ++o) {
        for (int64_t j = 0; j < in_dim; ++j) {
            res.scaled_weight.at(o, j) = weight.at(o, j) * res.divisor[static_cast<size_t>(j)];
        }
    }
    return res;
}

}  // namespace pq
