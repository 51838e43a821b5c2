#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pq/autodiff.hpp"
#include "pq/taps.hpp"
#include "pq/tensor.hpp"

namespace pq {

enum class Symmetry { symmetric, asymmetric };
enum class Granularity { per_tensor, per_token, per_channel_group };
enum class RangeMode { dynamic, static_range };

// Linear quantization configuration for one tensor class.
struct QuantSpec {
    int bits = 8;
    Symmetry symmetry = Symmetry::asymmetric;
    Granularity granularity = Granularity::per_tensor;
    int64_t group_size = 128;  // per_channel_group only; clamped to the channel dim
    RangeMode range_mode = RangeMode::dynamic;

    void validate() const;
    // Integer grid bounds. Symmetric uses the restricted range
    // [-(2^(N-1)-1), 2^(N-1)-1] so the grid is mirror-symmetric around 0.
    float qlo() const;
    float qhi() const;
};

// Resolved (scale, zero-point) values. Units are laid out row-major as
// (row, group); per-tensor collapses to a single unit, per-token to one unit
// per row.
struct QuantParams {
    int64_t rows = 1;
    int64_t groups = 1;
    int64_t group_size = 0;  // channel elements per group
    int64_t cols = 0;        // channel dimension of the source tensor
    std::vector<float> scale;
    std::vector<float> zero;
    float qlo = 0.f;
    float qhi = 0.f;

    int64_t unit_count() const { return rows * groups; }
    int64_t unit_of(int64_t flat_idx) const {
        int64_t r = flat_idx / cols;
        int64_t g = (flat_idx % cols) / group_size;
        return r * groups + g;
    }
};

// Running per-channel min/max for one tap, accumulated over calibration
// batches. Channel = last tensor dimension.
struct TapStats {
    std::vector<float> ch_min;
    std::vector<float> ch_max;
    int64_t observations = 0;  // rows seen

    void update_row(const float* row, int64_t width);
    void update(const Tensor& x, const std::vector<uint8_t>* content_mask = nullptr);
    void merge(const TapStats& other);

    float tensor_min() const;
    float tensor_max() const;
    std::vector<float> absmax() const;
};

struct CalibrationStats {
    float smooth_alpha = 0.f;                // alpha the stats were collected for
    std::map<std::string, TapStats> base;    // unmigrated model
    std::map<std::string, TapStats> final;   // post-migration when alpha > 0, else == base

    const TapStats* find(const std::string& tap) const {
        auto it = final.find(tap);
        return it == final.end() ? nullptr : &it->second;
    }
};

// Weight + activation quantization bundle for one deployment configuration.
struct QuantProfile {
    QuantSpec weights;
    QuantSpec acts;
    float smooth_alpha = 0.f;  // 0 disables migration

    QuantProfile() {
        weights.symmetry = Symmetry::symmetric;
        weights.granularity = Granularity::per_channel_group;
        weights.range_mode = RangeMode::dynamic;
        acts.symmetry = Symmetry::asymmetric;
        acts.granularity = Granularity::per_tensor;
        acts.range_mode = RangeMode::dynamic;
    }

    std::string fingerprint() const;
};

// Scale/zero-point selection. Dynamic mode reads ranges from x itself;
// static mode requires stats for the tap. Degenerate ranges fall back to
// s = 1 so constant tensors quantize losslessly.
QuantParams resolve_params(const Tensor& x, const QuantSpec& spec, const TapStats* stats = nullptr);

// q(x) = s * clamp(round((x - z)/s)) + z, elementwise, round-half-to-even.
Tensor fake_quant(const Tensor& x, const QuantParams& params);

// Graph op with the straight-through estimator: d q(x)/dx = 1 where the
// pre-clamp index lies inside the grid, 0 outside. Params are constants.
ag::Value fake_quant_ste(const ag::Value& x, const QuantParams& params);

struct QuantErrorResult {
    double value = 0.0;
    bool empty_taps = false;
};

// Sum of ||X - q(X)||^2 over the quant taps, all rows.
QuantErrorResult quant_error(const TapRecord& taps, const QuantSpec& act_spec,
                             const CalibrationStats* stats = nullptr);

// L_q(t|p): error restricted to content rows; dynamic ranges come from
// content rows only. Equals quant_error bit-for-bit when nothing is masked.
double conditional_quant_error(const TapRecord& taps, const QuantSpec& act_spec,
                               const CalibrationStats* stats = nullptr);

struct MigrationResult {
    Tensor scaled_weight;          // divisor folded into the weight columns
    std::vector<float> divisor;    // per input channel
};

// Shift per-channel activation magnitude into the weights:
// divisor_j = absmax_j^alpha / max_o |W[o,j]|^(1-alpha), guarded for
// near-zero channels. (X / div) * (div .* W)^T reproduces X * W^T.
MigrationResult smooth_migrate(const Tensor& weight, const std::vector<float>& act_absmax,
                               float alpha);

}  // namespace pq
