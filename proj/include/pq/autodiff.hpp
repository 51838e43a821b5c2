#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "pq/tensor.hpp"

namespace pq::ag {

struct Node;
using Value = std::shared_ptr<Node>;

// One node of the reverse-mode computation graph. requires_grad marks nodes
// on a path from a trainable leaf; backward populates grad for exactly those.
struct Node {
    Tensor value;
    std::optional<Tensor> grad;
    bool requires_grad = false;
    std::vector<Value> parents;
    std::function<void(Node&)> backward_fn;

    void add_grad(const Tensor& g);
};

Value leaf(Tensor v, bool requires_grad = false);
inline Value constant(Tensor v) { return leaf(std::move(v), false); }

// Build an op node. When no parent requires grad the parent links and the
// backward rule are dropped, so inference-mode graphs free intermediates as
// soon as they go out of scope.
Value make_op(Tensor out, std::vector<Value> parents, std::function<void(Node&)> bw);

// Reverse-mode sweep from a scalar root (shape {1}).
void backward(const Value& root);

// Gradient of a node after backward(); empty when the node was not reached.
std::optional<Tensor> grad_of(const Value& v);

// --- differentiable ops ---

Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value scale(const Value& a, float c);
Value square(const Value& a);
Value sum(const Value& a);  // -> scalar

Value matmul(const Value& a, const Value& b);     // [m,k] x [k,n]
Value linear(const Value& x, const Value& w);     // [*,in] x [out,in]^T -> [*,out]

Value softmax(const Value& x, int axis);
Value rmsnorm(const Value& x, const Value& gain, float eps);
Value layernorm(const Value& x, const Value& gain, float eps);
Value gelu(const Value& x);
Value silu(const Value& x);

Value embed_lookup(const Value& table, const std::vector<int32_t>& ids);

// Mean cross entropy over rows whose target is not ignore_index.
Value cross_entropy(const Value& logits, const std::vector<int32_t>& targets,
                    int32_t ignore_index = -1);

Value reshape(const Value& x, std::vector<int64_t> shape);
Value row_slice(const Value& x, int64_t r0, int64_t r1);   // rank-2
Value col_slice(const Value& x, int64_t c0, int64_t c1);   // rank-2
Value concat_rows(const std::vector<Value>& parts);        // rank-2, same cols
Value concat_cols(const std::vector<Value>& parts);        // rank-2, same rows

}  // namespace pq::ag
