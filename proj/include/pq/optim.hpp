#pragma once

#include <cmath>
#include <vector>

#include "pq/autodiff.hpp"

namespace pq {

// Adam with bias correction over a fixed list of trainable leaves.
struct Adam {
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;

    std::vector<Tensor> m;
    std::vector<Tensor> v;
    int64_t t = 0;

    void step(std::vector<ag::Value>& params, float lr) {
        if (m.empty()) {
            for (auto& p : params) {
                m.emplace_back(p->value.shape());
                v.emplace_back(p->value.shape());
            }
        }
        ++t;
        const float bc1 = 1.0f - std::pow(beta1, static_cast<float>(t));
        const float bc2 = 1.0f - std::pow(beta2, static_cast<float>(t));
        for (size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            if (!p->grad) continue;
            const Tensor& g = *p->grad;
            Tensor& mi = m[i];
            Tensor& vi = v[i];
            for (int64_t j = 0; j < g.numel(); ++j) {
                mi[j] = beta1 * mi[j] + (1.0f - beta1) * g[j];
                vi[j] = beta2 * vi[j] + (1.0f - beta2) * g[j] * g[j];
                float mhat = mi[j] / bc1;
                float vhat = vi[j] / bc2;
                p->value[j] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

inline void zero_grads(std::vector<ag::Value>& params) {
    for (auto& p : params) p->grad.reset();
}

inline double grad_global_norm(const std::vector<ag::Value>& params) {
    double ss = 0.0;
    for (const auto& p : params) {
        if (!p->grad) continue;
        for (int64_t j = 0; j < p->grad->numel(); ++j) {
            ss += static_cast<double>((*p->grad)[j]) * (*p->grad)[j];
        }
    }
    return std::sqrt(ss);
}

inline void scale_grads(std::vector<ag::Value>& params, float factor) {
    for (auto& p : params) {
        if (!p->grad) continue;
        for (int64_t j = 0; j < p->grad->numel(); ++j) (*p->grad)[j] *= factor;
    }
}

}  // namespace pq
