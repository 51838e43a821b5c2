#include "pq/tensor.hpp"

#include <cmath>
#include <sstream>

#include "pq/errors.hpp"

namespace pq {

namespace {
int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d <= 0) throw contract_error("tensor dimension must be positive, got " + shape_str(shape));
        n *= d;
    }
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0f);
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != static_cast<int64_t>(data_.size())) {
        throw contract_error("tensor data size " + std::to_string(data_.size()) +
                             " does not match shape " + pq::shape_str(shape_));
    }
}

Tensor Tensor::full(std::vector<int64_t> shape, float v) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = v;
    return t;
}

Tensor Tensor::reshaped(std::vector<int64_t> new_shape) const {
    if (shape_numel(new_shape) != numel()) {
        throw contract_error("reshape from " + pq::shape_str(shape_) + " to " + pq::shape_str(new_shape) +
                             " changes element count");
    }
    return Tensor(std::move(new_shape), data_);
}

bool Tensor::all_finite() const {
    for (float v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const { return pq::shape_str(shape_); }

std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace {

inline float dot(const float* __restrict a, const float* __restrict b, int64_t k) {
    float s0 = 0.f, s1 = 0.f, s2 = 0.f, s3 = 0.f;
    int64_t i = 0;
    for (; i + 4 <= k; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < k; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

inline void axpy(float alpha, const float* __restrict x, float* __restrict y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

void mm_nt(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const float* ai = a + i * k;
        float* ci = c + i * n;
        for (int64_t j = 0; j < n; ++j) ci[j] = dot(ai, b + j * k, k);
    }
}

void mm_nt_acc(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const float* ai = a + i * k;
        float* ci = c + i * n;
        for (int64_t j = 0; j < n; ++j) ci[j] += dot(ai, b + j * k, k);
    }
}

void mm_nn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m * n; ++i) c[i] = 0.f;
    mm_nn_acc(a, b, c, m, k, n);
}

void mm_nn_acc(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const float* ai = a + i * k;
        float* ci = c + i * n;
        for (int64_t t = 0; t < k; ++t) axpy(ai[t], b + t * n, ci, n);
    }
}

void mm_tn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n) {
    // a is [k, m] interpreted transposed: c[i,j] = sum_t a[t,i] * b[t,j]
    for (int64_t i = 0; i < m * n; ++i) c[i] = 0.f;
    mm_tn_acc(a, b, c, m, k, n);
}

void mm_tn_acc(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t t = 0; t < k; ++t) {
        const float* at = a + t * m;
        const float* bt = b + t * n;
        for (int64_t i = 0; i < m; ++i) axpy(at[i], bt, c + i * n, n);
    }
}

}  // namespace pq
