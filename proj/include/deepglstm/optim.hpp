#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "autodiff.hpp"

namespace deepglstm::ad {

struct AdamOptions {
    double lr = 0.0005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct AdamState {
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    std::uint64_t step = 0;
};

/// One bias-corrected Adam update of every parameter from its accumulated gradient.
/// Moment buffers are created on the first call.
template <class T>
void adam_step(std::span<Value<T>> params, AdamState<T>& state, const AdamOptions& opt = {}) {
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.shape());
            state.v.emplace_back(p.shape());
        }
    }
    if (state.m.size() != params.size()) throw ShapeMismatch("adam: state holds a different parameter count");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (state.m[i].shape() != params[i].shape() || state.v[i].shape() != params[i].shape())
            throw ShapeMismatch("adam: moment " + state.m[i].shape().str() + " vs parameter " + params[i].shape().str());

    ++state.step;
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
    const T b1 = static_cast<T>(opt.beta1), b2 = static_cast<T>(opt.beta2);
    const T step_size = static_cast<T>(opt.lr / c1);
    const T inv_c2 = static_cast<T>(1.0 / c2);
    const T eps = static_cast<T>(opt.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& w = params[i].mutable_data();
        const auto& g = params[i].grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = b1 * m[j] + (T{1} - b1) * g[j];
            v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
            w[j] -= step_size * m[j] / (std::sqrt(v[j] * inv_c2) + eps);
        }
    }
}

}  // namespace deepglstm::ad
