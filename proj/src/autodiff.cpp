#include "pq/autodiff.hpp"

#include <cmath>
#include <unordered_set>

#include "pq/errors.hpp"

namespace pq::ag {

void Node::add_grad(const Tensor& g) {
    if (!requires_grad) return;
    if (!grad) {
        grad = g;
        return;
    }
    if (!grad->same_shape(g)) throw contract_error("gradient shape mismatch");
    float* dst = grad->data();
    const float* src = g.data();
    for (int64_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
}

Value leaf(Tensor v, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    return n;
}

Value make_op(Tensor out, std::vector<Value> parents, std::function<void(Node&)> bw) {
    bool needs = false;
    for (const auto& p : parents) {
        if (p && p->requires_grad) {
            needs = true;
            break;
        }
    }
    auto n = std::make_shared<Node>();
    n->value = std::move(out);
    if (needs) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(bw);
    }
    return n;
}

void backward(const Value& root) {
    if (!root) throw contract_error("backward on null node");
    if (root->value.numel() != 1) {
        throw contract_error("backward requires a scalar root, got shape " + root->value.shape_str());
    }
    // Iterative post-order topological sort.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    if (root->requires_grad) stack.emplace_back(root.get(), 0);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx == 0 && seen.count(node)) {
            stack.pop_back();
            continue;
        }
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx].get();
            ++idx;
            if (p && p->requires_grad && !seen.count(p)) stack.emplace_back(p, 0);
        } else {
            seen.insert(node);
            order.push_back(node);
            stack.pop_back();
        }
    }
    if (root->requires_grad) {
        root->grad = Tensor({1}, {1.0f});
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* n = *it;
            if (n->backward_fn && n->grad) n->backward_fn(*n);
        }
    }
}

std::optional<Tensor> grad_of(const Value& v) {
    if (!v || !v->grad) return std::nullopt;
    return *v->grad;
}

namespace {

void check_same_shape(const Value& a, const Value& b, const char* op) {
    if (!a->value.same_shape(b->value)) {
        throw contract_error(std::string(op) + ": shape mismatch " + a->value.shape_str() + " vs " +
                             b->value.shape_str());
    }
}

}  // namespace

Value add(const Value& a, const Value& b) {
    check_same_shape(a, b, "add");
    Tensor out(a->value.shape());
    const float* pa = a->value.data();
    const float* pb = b->value.data();
    float* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] + pb[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        n.parents[0]->add_grad(*n.grad);
        n.parents[1]->add_grad(*n.grad);
    });
}

Value sub(const Value& a, const Value& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a->value.shape());
    const float* pa = a->value.data();
    const float* pb = b->value.data();
    float* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] - pb[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        n.parents[0]->add_grad(*n.grad);
        if (n.parents[1]->requires_grad) {
            Tensor g(n.grad->shape());
            for (int64_t i = 0; i < g.numel(); ++i) g[i] = -(*n.grad)[i];
            n.parents[1]->add_grad(g);
        }
    });
}

Value mul(const Value& a, const Value& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a->value.shape());
    const float* pa = a->value.data();
    const float* pb = b->value.data();
    float* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * pb[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        const Tensor& av = n.parents[0]->value;
        const Tensor& bv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
            Tensor g(av.shape());
            for (int64_t i = 0; i < g.numel(); ++i) g[i] = (*n.grad)[i] * bv[i];
            n.parents[0]->add_grad(g);
        }
        if (n.parents[1]->requires_grad) {
            Tensor g(bv.shape());
            for (int64_t i = 0; i < g.numel(); ++i) g[i] = (*n.grad)[i] * av[i];
            n.parents[1]->add_grad(g);
        }
    });
}

Value scale(const Value& a, float c) {
    Tensor out(a->value.shape());
    const float* pa = a->value.data();
    float* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * c;
    return make_op(std::move(out), {a}, [c](Node& n) {
        Tensor g(n.grad->shape());
        for (int64_t i = 0; i < g.numel(); ++i) g[i] = (*n.grad)[i] * c;
        n.parents[0]->add_grad(g);
    });
}

Value square(const Value& a) {
    Tensor out(a->value.shape());
    const float* pa = a->value.data();
    float* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * pa[i];
    return make_op(std::move(out), {a}, [](Node& n) {
        const Tensor& av = n.parents[0]->value;
        Tensor g(av.shape());
        for (int64_t i = 0; i < g.numel(); ++i) g[i] = 2.0f * av[i] * (*n.grad)[i];
        n.parents[0]->add_grad(g);
    });
}

Value sum(const Value& a) {
    double s = 0.0;
    const float* pa = a->value.data();
    for (int64_t i = 0; i < a->value.numel(); ++i) s += pa[i];
    return make_op(Tensor::scalar(static_cast<float>(s)), {a}, [](Node& n) {
        float g = (*n.grad)[0];
        n.parents[0]->add_grad(Tensor::full(n.parents[0]->value.shape(), g));
    });
}

Value matmul(const Value& a, const Value& b) {
    const Tensor& av = a->value;
    const Tensor& bv = b->value;
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
        throw contract_error("matmul: incompatible shapes " + av.shape_str() + " x " + bv.shape_str());
    }
    int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor out({m, n});
    mm_nn(av.data(), bv.data(), out.data(), m, k, n);
    return make_op(std::move(out), {a, b}, [m, k, n](Node& nd) {
        const Tensor& A = nd.parents[0]->value;
        const Tensor& B = nd.parents[1]->value;
        const Tensor& G = *nd.grad;
        if (nd.parents[0]->requires_grad) {
            Tensor ga({m, k});
            mm_nt(G.data(), B.data(), ga.data(), m, n, k);  // dA = G * B^T
            nd.parents[0]->add_grad(ga);
        }
        if (nd.parents[1]->requires_grad) {
            Tensor gb({k, n});
            mm_tn(A.data(), G.data(), gb.data(), k, m, n);  // dB = A^T * G
            nd.parents[1]->add_grad(gb);
        }
    });
}

Value linear(const Value& x, const Value& w) {
    const Tensor& xv = x->value;
    const Tensor& wv = w->value;
    if (wv.rank() != 2 || xv.cols() != wv.dim(1)) {
        throw contract_error("linear: input cols " + xv.shape_str() + " do not match weight " +
                             wv.shape_str());
    }
    int64_t rows = xv.rows(), in = wv.dim(1), out_dim = wv.dim(0);
    std::vector<int64_t> out_shape(xv.shape().begin(), xv.shape().end());
    if (out_shape.empty()) out_shape.push_back(1);
    out_shape.back() = out_dim;
    Tensor out(out_shape);
    mm_nt(xv.data(), wv.data(), out.data(), rows, in, out_dim);
    return make_op(std::move(out), {x, w}, [rows, in, out_dim](Node& nd) {
        const Tensor& X = nd.parents[0]->value;
        const Tensor& W = nd.parents[1]->value;
        const Tensor& G = *nd.grad;
        if (nd.parents[0]->requires_grad) {
            Tensor gx(X.shape());
            mm_nn(G.data(), W.data(), gx.data(), rows, out_dim, in);  // dX = G * W
            nd.parents[0]->add_grad(gx);
        }
        if (nd.parents[1]->requires_grad) {
            Tensor gw(W.shape());
            mm_tn(G.data(), X.data(), gw.data(), out_dim, rows, in);  // dW = G^T * X
            nd.parents[1]->add_grad(gw);
        }
    });
}

namespace {

struct AxisSpan {
    int64_t outer, len, inner;
};

AxisSpan axis_span(const Tensor& t, int axis) {
    int r = t.rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw contract_error("invalid softmax axis for shape " + t.shape_str());
    AxisSpan s{1, t.dim(axis), 1};
    for (int i = 0; i < axis; ++i) s.outer *= t.dim(i);
    for (int i = axis + 1; i < r; ++i) s.inner *= t.dim(i);
    return s;
}

}  // namespace

Value softmax(const Value& x, int axis) {
    const Tensor& xv = x->value;
    AxisSpan sp = axis_span(xv, axis);
    Tensor out(xv.shape());
    const float* px = xv.data();
    float* po = out.data();
    for (int64_t o = 0; o < sp.outer; ++o) {
        for (int64_t in = 0; in < sp.inner; ++in) {
            const int64_t base = o * sp.len * sp.inner + in;
            float mx = px[base];
            for (int64_t j = 1; j < sp.len; ++j) mx = std::max(mx, px[base + j * sp.inner]);
            double denom = 0.0;
            for (int64_t j = 0; j < sp.len; ++j) {
                float e = std::exp(px[base + j * sp.inner] - mx);
                po[base + j * sp.inner] = e;
                denom += e;
            }
            float inv = static_cast<float>(1.0 / denom);
            for (int64_t j = 0; j < sp.len; ++j) po[base + j * sp.inner] *= inv;
        }
    }
    return make_op(std::move(out), {x}, [sp](Node& nd) {
        const Tensor& Y = nd.value;
        const Tensor& G = *nd.grad;
        Tensor gx(Y.shape());
        const float* py = Y.data();
        const float* pg = G.data();
        float* pgx = gx.data();
        for (int64_t o = 0; o < sp.outer; ++o) {
            for (int64_t in = 0; in < sp.inner; ++in) {
                const int64_t base = o * sp.len * sp.inner + in;
                double dot = 0.0;
                for (int64_t j = 0; j < sp.len; ++j) {
                    const int64_t idx = base + j * sp.inner;
                    dot += static_cast<double>(pg[idx]) * py[idx];
                }
                for (int64_t j = 0; j < sp.len; ++j) {
                    const int64_t idx = base + j * sp.inner;
                    pgx[idx] = py[idx] * (pg[idx] - static_cast<float>(dot));
                }
            }
        }
        nd.parents[0]->add_grad(gx);
    });
}

Value rmsnorm(const Value& x, const Value& gain, float eps) {
    const Tensor& xv = x->value;
    const Tensor& gv = gain->value;
    if (eps <= 0.f) throw contract_error("rmsnorm: eps must be positive");
    int64_t d = xv.cols(), rows = xv.rows();
    if (gv.numel() != d) {
        throw contract_error("rmsnorm: gain " + gv.shape_str() + " does not match feature dim " +
                             std::to_string(d));
    }
    Tensor out(xv.shape());
    std::vector<float> inv_rms(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const float* row = xv.data() + r * d;
        double ss = 0.0;
        for (int64_t j = 0; j < d; ++j) ss += static_cast<double>(row[j]) * row[j];
        float inv = static_cast<float>(1.0 / std::sqrt(ss / static_cast<double>(d) + eps));
        inv_rms[static_cast<size_t>(r)] = inv;
        float* orow = out.data() + r * d;
        for (int64_t j = 0; j < d; ++j) orow[j] = row[j] * inv * gv[j];
    }
    return make_op(std::move(out), {x, gain}, [d, rows, inv_rms](Node& nd) {
        const Tensor& X = nd.parents[0]->value;
        const Tensor& Gn = nd.parents[1]->value;
        const Tensor& G = *nd.grad;
        Tensor gx(X.shape());
        Tensor gg(Gn.shape());
        for (int64_t r = 0; r < rows; ++r) {
            const float* xr = X.data() + r * d;
            const float* gr = G.data() + r * d;
            float* gxr = gx.data() + r * d;
            const float inv = inv_rms[static_cast<size_t>(r)];
            double dot = 0.0;  // sum_j g_j * gain_j * x_j
            for (int64_t j = 0; j < d; ++j) dot += static_cast<double>(gr[j]) * Gn[j] * xr[j];
            const float c = static_cast<float>(dot) * inv * inv * inv / static_cast<float>(d);
            for (int64_t j = 0; j < d; ++j) {
                gxr[j] = gr[j] * Gn[j] * inv - xr[j] * c;
                gg[j] += gr[j] * xr[j] * inv;
            }
        }
        nd.parents[0]->add_grad(gx);
        nd.parents[1]->add_grad(gg);
    });
}

Value layernorm(const Value& x, const Value& gain, float eps) {
    const Tensor& xv = x->value;
    const Tensor& gv = gain->value;
    if (eps <= 0.f) throw contract_error("layernorm: eps must be positive");
    int64_t d = xv.cols(), rows = xv.rows();
    if (gv.numel() != d) {
        throw contract_error("layernorm: gain " + gv.shape_str() + " does not match feature dim " +
                             std::to_string(d));
    }
    Tensor out(xv.shape());
    Tensor xhat(xv.shape());
    std::vector<float> inv_std(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const float* row = xv.data() + r * d;
        double mu = 0.0;
        for (int64_t j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t j = 0; j < d; ++j) {
            double c = row[j] - mu;
            var += c * c;
        }
        var /= static_cast<double>(d);
        float inv = static_cast<float>(1.0 / std::sqrt(var + eps));
        inv_std[static_cast<size_t>(r)] = inv;
        float* hrow = xhat.data() + r * d;
        float* orow = out.data() + r * d;
        for (int64_t j = 0; j < d; ++j) {
            hrow[j] = static_cast<float>((row[j] - mu)) * inv;
            orow[j] = hrow[j] * gv[j];
        }
    }
    auto xhat_keep = std::make_shared<Tensor>(std::move(xhat));
    return make_op(std::move(out), {x, gain}, [d, rows, inv_std, xhat_keep](Node& nd) {
        const Tensor& Gn = nd.parents[1]->value;
        const Tensor& G = *nd.grad;
        Tensor gx(nd.parents[0]->value.shape());
        Tensor gg(Gn.shape());
        for (int64_t r = 0; r < rows; ++r) {
            const float* gr = G.data() + r * d;
            const float* hr = xhat_keep->data() + r * d;
            float* gxr = gx.data() + r * d;
            const float inv = inv_std[static_cast<size_t>(r)];
            double sum_h = 0.0, sum_hx = 0.0;
            for (int64_t j = 0; j < d; ++j) {
                const double h = static_cast<double>(gr[j]) * Gn[j];
                sum_h += h;
                sum_hx += h * hr[j];
                gg[j] += gr[j] * hr[j];
            }
            const float mh = static_cast<float>(sum_h / d);
            const float mhx = static_cast<float>(sum_hx / d);
            for (int64_t j = 0; j < d; ++j) {
                gxr[j] = inv * (gr[j] * Gn[j] - mh - hr[j] * mhx);
            }
        }
        nd.parents[0]->add_grad(gx);
        nd.parents[1]->add_grad(gg);
    });
}

Value gelu(const Value& x) {
    const Tensor& xv = x->value;
    Tensor out(xv.shape());
    const float* px = xv.data();
    float* po = out.data();
    constexpr float inv_sqrt2 = 0.7071067811865476f;
    for (int64_t i = 0; i < out.numel(); ++i) {
        po[i] = 0.5f * px[i] * (1.0f + std::erf(px[i] * inv_sqrt2));
    }
    return make_op(std::move(out), {x}, [](Node& nd) {
        const Tensor& X = nd.parents[0]->value;
        Tensor g(X.shape());
        constexpr float inv_sqrt2 = 0.7071067811865476f;
        constexpr float inv_sqrt2pi = 0.3989422804014327f;
        for (int64_t i = 0; i < g.numel(); ++i) {
            float v = X[i];
            float cdf = 0.5f * (1.0f + std::erf(v * inv_sqrt2));
            float pdf = inv_sqrt2pi * std::exp(-0.5f * v * v);
            g[i] = (*nd.grad)[i] * (cdf + v * pdf);
        }
        nd.parents[0]->add_grad(g);
    });
}

Value silu(const Value& x) {
    const Tensor& xv = x->value;
    Tensor out(xv.shape());
    const float* px = xv.data();
    float* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) {
        float s = 1.0f / (1.0f + std::exp(-px[i]));
        po[i] = px[i] * s;
    }
    return make_op(std::move(out), {x}, [](Node& nd) {
        const Tensor& X = nd.parents[0]->value;
        Tensor g(X.shape());
        for (int64_t i = 0; i < g.numel(); ++i) {
            float s = 1.0f / (1.0f + std::exp(-X[i]));
            g[i] = (*nd.grad)[i] * (s + X[i] * s * (1.0f - s));
        }
        nd.parents[0]->add_grad(g);
    });
}

Value embed_lookup(const Value& table, const std::vector<int32_t>& ids) {
    const Tensor& tv = table->value;
    if (tv.rank() != 2) throw contract_error("embed_lookup: table must be rank 2");
    int64_t v = tv.dim(0), d = tv.dim(1);
    for (int32_t id : ids) {
        if (id < 0 || id >= v) {
            throw contract_error("embed_lookup: id " + std::to_string(id) + " out of range [0, " +
                                 std::to_string(v) + ")");
        }
    }
    int64_t t = static_cast<int64_t>(ids.size());
    Tensor out({t, d});
    for (int64_t i = 0; i < t; ++i) {
        const float* src = tv.data() + static_cast<int64_t>(ids[static_cast<size_t>(i)]) * d;
        float* dst = out.data() + i * d;
        for (int64_t j = 0; j < d; ++j) dst[j] = src[j];
    }
    auto ids_copy = ids;
    return make_op(std::move(out), {table}, [ids_copy, d](Node& nd) {
        Tensor g(nd.parents[0]->value.shape());
        for (size_t i = 0; i < ids_copy.size(); ++i) {
            const float* src = nd.grad->data() + static_cast<int64_t>(i) * d;
            float* dst = g.data() + static_cast<int64_t>(ids_copy[i]) * d;
            for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
        }
        nd.parents[0]->add_grad(g);
    });
}

Value cross_entropy(const Value& logits, const std::vector<int32_t>& targets, int32_t ignore_index) {
    const Tensor& lv = logits->value;
    if (lv.rank() != 2) throw contract_error("cross_entropy: logits must be rank 2");
    int64_t rows = lv.dim(0), v = lv.dim(1);
    if (static_cast<int64_t>(targets.size()) != rows) {
        throw contract_error("cross_entropy: targets size does not match logit rows");
    }
    int64_t valid = 0;
    double loss = 0.0;
    std::vector<float> log_z(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        int32_t tgt = targets[static_cast<size_t>(r)];
        if (tgt == ignore_index) continue;
        if (tgt < 0 || tgt >= v) throw contract_error("cross_entropy: target out of range");
        const float* row = lv.data() + r * v;
        float mx = row[0];
        for (int64_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int64_t j = 0; j < v; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
        float lz = mx + static_cast<float>(std::log(denom));
        log_z[static_cast<size_t>(r)] = lz;
        loss += static_cast<double>(lz) - row[tgt];
        ++valid;
    }
    if (valid == 0) throw contract_error("cross_entropy: no valid target positions");
    auto tcopy = targets;
    float out = static_cast<float>(loss / static_cast<double>(valid));
    return make_op(Tensor::scalar(out), {logits}, [tcopy, ignore_index, v, valid, log_z](Node& nd) {
        const Tensor& L = nd.parents[0]->value;
        Tensor g(L.shape());
        const float gscale = (*nd.grad)[0] / static_cast<float>(valid);
        for (int64_t r = 0; r < L.dim(0); ++r) {
            int32_t tgt = tcopy[static_cast<size_t>(r)];
            if (tgt == ignore_index) continue;
            const float* row = L.data() + r * v;
            float* grow = g.data() + r * v;
            const float lz = log_z[static_cast<size_t>(r)];
            for (int64_t j = 0; j < v; ++j) grow[j] = std::exp(row[j] - lz) * gscale;
            grow[tgt] -= gscale;
        }
        nd.parents[0]->add_grad(g);
    });
}

Value reshape(const Value& x, std::vector<int64_t> shape) {
    Tensor out = x->value.reshaped(shape);
    return make_op(std::move(out), {x}, [](Node& nd) {
        nd.parents[0]->add_grad(nd.grad->reshaped(nd.parents[0]->value.shape()));
    });
}

Value row_slice(const Value& x, int64_t r0, int64_t r1) {
    const Tensor& xv = x->value;
    if (xv.rank() != 2 || r0 < 0 || r1 > xv.dim(0) || r0 >= r1) {
        throw contract_error("row_slice: bad range on " + xv.shape_str());
    }
    int64_t c = xv.dim(1);
    Tensor out({r1 - r0, c});
    const float* src = xv.data() + r0 * c;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = src[i];
    return make_op(std::move(out), {x}, [r0, c](Node& nd) {
        Tensor g(nd.parents[0]->value.shape());
        float* dst = g.data() + r0 * c;
        for (int64_t i = 0; i < nd.grad->numel(); ++i) dst[i] = (*nd.grad)[i];
        nd.parents[0]->add_grad(g);
    });
}

Value col_slice(const Value& x, int64_t c0, int64_t c1) {
    const Tensor& xv = x->value;
    if (xv.rank() != 2 || c0 < 0 || c1 > xv.dim(1) || c0 >= c1) {
        throw contract_error("col_slice: bad range on " + xv.shape_str());
    }
    int64_t rows = xv.dim(0), cols = xv.dim(1), w = c1 - c0;
    Tensor out({rows, w});
    for (int64_t r = 0; r < rows; ++r) {
        const float* src = xv.data() + r * cols + c0;
        float* dst = out.data() + r * w;
        for (int64_t j = 0; j < w; ++j) dst[j] = src[j];
    }
    return make_op(std::move(out), {x}, [c0, cols, w](Node& nd) {
        Tensor g(nd.parents[0]->value.shape());
        for (int64_t r = 0; r < g.dim(0); ++r) {
            const float* src = nd.grad->data() + r * w;
            float* dst = g.data() + r * cols + c0;
            for (int64_t j = 0; j < w; ++j) dst[j] = src[j];
        }
        nd.parents[0]->add_grad(g);
    });
}

Value concat_rows(const std::vector<Value>& parts) {
    if (parts.empty()) throw contract_error("concat_rows: no parts");
    int64_t cols = parts[0]->value.cols();
    int64_t rows = 0;
    for (const auto& p : parts) {
        if (p->value.rank() != 2 || p->value.cols() != cols) {
            throw contract_error("concat_rows: column mismatch");
        }
        rows += p->value.dim(0);
    }
    Tensor out({rows, cols});
    int64_t off = 0;
    for (const auto& p : parts) {
        const Tensor& pv = p->value;
        float* dst = out.data() + off * cols;
        for (int64_t i = 0; i < pv.numel(); ++i) dst[i] = pv[i];
        off += pv.dim(0);
    }
    return make_op(std::move(out), parts, [cols](Node& nd) {
        int64_t off = 0;
        for (auto& p : nd.parents) {
            int64_t r = p->value.dim(0);
            if (p->requires_grad) {
                Tensor g(p->value.shape());
                const float* src = nd.grad->data() + off * cols;
                for (int64_t i = 0; i < g.numel(); ++i) g[i] = src[i];
                p->add_grad(g);
            }
            off += r;
        }
    });
}

Value concat_cols(const std::vector<Value>& parts) {
    if (parts.empty()) throw contract_error("concat_cols: no parts");
    int64_t rows = parts[0]->value.rows();
    int64_t cols = 0;
    for (const auto& p : parts) {
        if (p->value.rank() != 2 || p->value.dim(0) != rows) {
            throw contract_error("concat_cols: row mismatch");
        }
        cols += p->value.dim(1);
    }
    Tensor out({rows, cols});
    int64_t off = 0;
    for (const auto& p : parts) {
        const Tensor& pv = p->value;
        int64_t w = pv.dim(1);
        for (int64_t r = 0; r < rows; ++r) {
            const float* src = pv.data() + r * w;
            float* dst = out.data() + r * cols + off;
            for (int64_t j = 0; j < w; ++j) dst[j] = src[j];
        }
        off += w;
    }
    return make_op(std::move(out), parts, [rows, cols](Node& nd) {
        int64_t off = 0;
        for (auto& p : nd.parents) {
            int64_t w = p->value.dim(1);
            if (p->requires_grad) {
                Tensor g(p->value.shape());
                for (int64_t r = 0; r < rows; ++r) {
                    const float* src = nd.grad->data() + r * cols + off;
                    float* dst = g.data() + r * w;
                    for (int64_t j = 0; j < w; ++j) dst[j] = src[j];
                }
                p->add_grad(g);
            }
            off += w;
        }
    });
}

}  // namespace pq::ag
