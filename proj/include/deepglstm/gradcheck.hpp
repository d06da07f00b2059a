#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "autodiff.hpp"
#include "rng.hpp"

namespace deepglstm::ad {

struct GradCheckOptions {
    double eps = 1e-5;
    std::size_t max_coordinates = 200;
    std::uint64_t seed = 0;
    /// Denominator floor of the relative error, so coordinates whose true
    /// derivative is ~0 are judged on absolute error.
    double abs_floor = 1e-6;
    /// A coordinate is treated as sitting on a kink (e.g. relu at 0) when its
    /// one-sided slopes differ by more than this fraction of their magnitude.
    double kink_tolerance = 1e-2;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped_kinks = 0;
};

/// Compares reverse-mode gradients of `loss_fn` with central differences on a
/// seeded random subsample of at most max_coordinates parameter coordinates
/// (kink coordinates are skipped and do not count). `loss_fn` must be
/// deterministic and return a 1x1 value built from `params`.
inline GradCheckResult finite_difference_check(const std::function<Value<double>()>& loss_fn,
                                               std::span<Value<double>> params, const GradCheckOptions& opt = {}) {
    for (auto& p : params) p.zero_grad();
    const Value<double> base = loss_fn();
    backward(base);
    const double f0 = base.item();

    // Coordinates are shuffled within each tensor and then interleaved across
    // tensors, so small tensors are sampled as well as the large ones.
    Rng rng(opt.seed);
    std::vector<std::vector<std::size_t>> per_tensor(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        per_tensor[i].resize(params[i].data().size());
        for (std::size_t j = 0; j < per_tensor[i].size(); ++j) per_tensor[i][j] = j;
        shuffle(std::span(per_tensor[i]), rng);
    }
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t round = 0, added = 1; added; ++round) {
        added = 0;
        for (std::size_t i = 0; i < params.size(); ++i)
            if (round < per_tensor[i].size()) {
                coords.emplace_back(i, per_tensor[i][round]);
                ++added;
            }
        if (coords.size() >= opt.max_coordinates * 4) break;
    }

    GradCheckResult res;
    for (const auto& [pi, j] : coords) {
        if (res.checked >= opt.max_coordinates) break;
        auto& w = params[pi].mutable_data();
        const double x0 = w[j];
        w[j] = x0 + opt.eps;
        const double fp = loss_fn().item();
        w[j] = x0 - opt.eps;
        const double fm = loss_fn().item();
        w[j] = x0;

        const double fwd = (fp - f0) / opt.eps;
        const double bwd = (f0 - fm) / opt.eps;
        if (std::abs(fwd - bwd) > opt.kink_tolerance * std::max({std::abs(fwd), std::abs(bwd), opt.abs_floor})) {
            ++res.skipped_kinks;
            continue;
        }
        const double numeric = (fp - fm) / (2.0 * opt.eps);
        const double analytic = params[pi].grad()[j];
        const double denom = std::max({std::abs(numeric), std::abs(analytic), opt.abs_floor});
        res.max_relative_error = std::max(res.max_relative_error, std::abs(numeric - analytic) / denom);
        ++res.checked;
    }
    return res;
}

}  // namespace deepglstm::ad
