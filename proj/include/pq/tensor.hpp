#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pq {

// Dense FP32 tensor, row-major. The single value carrier of the project;
// scalars are shape {1}.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int64_t> shape);
    Tensor(std::vector<int64_t> shape, std::vector<float> data);

    static Tensor scalar(float v) { return Tensor({1}, {v}); }
    static Tensor full(std::vector<int64_t> shape, float v);

    const std::vector<int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Row/column view of the trailing dimension: rows() * cols() == numel().
    int64_t cols() const { return shape_.empty() ? 1 : shape_.back(); }
    int64_t rows() const { return cols() == 0 ? 0 : numel() / cols(); }
    float& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * cols() + c)]; }
    float at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * cols() + c)]; }

    // Same data, new shape (element count must match).
    Tensor reshaped(std::vector<int64_t> new_shape) const;

    bool all_finite() const;
    std::string shape_str() const;

private:
    std::vector<int64_t> shape_;
    std::vector<float> data_;
};

std::string shape_str(const std::vector<int64_t>& shape);

// Raw kernels. C = A*B variants; all buffers must be distinct.
// nn: A[m,k] * B[k,n]; nt: A[m,k] * B[n,k]^T; tn: A[k,m]^T * B[k,n].
void mm_nn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n);
void mm_nt(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n);
void mm_tn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n);

// Accumulating variants (c += ...), used by backward rules.
void mm_nn_acc(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n);
void mm_nt_acc(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n);
void mm_tn_acc(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n);

}  // namespace pq
