#pragma once

// Regression and ranking metrics over (prediction, truth) lists. All sums run
// left to right over the input order so results are reproducible bit for bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace deepglstm::metrics {

class LengthMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class EmptyInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NoComparablePairs : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DegenerateInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using Values = std::span<const double>;

namespace detail {

inline void check_pair(Values pred, Values truth, std::size_t min_len, const char* what) {
    if (pred.size() != truth.size())
        throw LengthMismatch(std::string(what) + ": " + std::to_string(pred.size()) + " predictions vs " +
                             std::to_string(truth.size()) + " labels");
    if (pred.size() < min_len)
        throw EmptyInput(std::string(what) + " needs at least " + std::to_string(min_len) + " values");
}

inline double mean(Values v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

struct Moments {
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
};

/// Centered second moments, x = pred, y = truth.
inline Moments centered(Values x, Values y) {
    const double mx = mean(x), my = mean(y);
    Moments m;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        m.sxx += dx * dx;
        m.syy += dy * dy;
        m.sxy += dx * dy;
    }
    return m;
}

}  // namespace detail

inline double mse(Values pred, Values truth) {
    detail::check_pair(pred, truth, 1, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

/// Counts for the concordance index: `z` ordered pairs with truth[i] > truth[j],
/// and their score in half units (2 = concordant, 1 = tied prediction).
struct ConcordanceCounts {
    std::uint64_t z = 0;
    std::uint64_t half_score = 0;

    double value() const { return static_cast<double>(half_score) / (2.0 * static_cast<double>(z)); }
};

/// Exhaustive O(n^2) pair count.
inline ConcordanceCounts concordance_counts(Values pred, Values truth) {
    detail::check_pair(pred, truth, 2, "concordance_index");
    ConcordanceCounts c;
    const std::size_t n = pred.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (!(truth[i] > truth[j])) continue;
            ++c.z;
            if (pred[i] > pred[j]) c.half_score += 2;
            else if (pred[i] == pred[j]) c.half_score += 1;
        }
    return c;
}

inline double concordance_index(Values pred, Values truth) {
    const auto c = concordance_counts(pred, truth);
    if (c.z == 0) throw NoComparablePairs("concordance_index: all truth values are equal");
    return c.value();
}

/// Sort-based O(n log n) count: truth-ascending sweep over a Fenwick tree of
/// prediction ranks. Returns the same counts as concordance_counts.
inline ConcordanceCounts concordance_counts_fast(Values pred, Values truth) {
    detail::check_pair(pred, truth, 2, "concordance_index");
    const std::size_t n = pred.size();
    std::vector<double> ranks(pred.begin(), pred.end());
    std::sort(ranks.begin(), ranks.end());
    ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
    auto rank_of = [&](double v) {
        return static_cast<std::size_t>(std::lower_bound(ranks.begin(), ranks.end(), v) - ranks.begin());
    };
    std::vector<std::uint64_t> tree(ranks.size() + 1, 0);
    auto add = [&](std::size_t r) {
        for (std::size_t i = r + 1; i < tree.size(); i += i & (~i + 1)) ++tree[i];
    };
    auto below = [&](std::size_t r) {  // inserted predictions with rank < r
        std::uint64_t s = 0;
        for (std::size_t i = r; i > 0; i -= i & (~i + 1)) s += tree[i];
        return s;
    };

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return truth[a] < truth[b]; });

    ConcordanceCounts c;
    std::uint64_t inserted = 0;
    for (std::size_t g = 0; g < n;) {
        std::size_t end = g;
        while (end < n && truth[order[end]] == truth[order[g]]) ++end;
        // Every element of this truth group outranks everything inserted so far.
        for (std::size_t k = g; k < end; ++k) {
            const std::size_t r = rank_of(pred[order[k]]);
            const std::uint64_t less = below(r);
            const std::uint64_t tied = below(r + 1) - less;
            c.z += inserted;
            c.half_score += 2 * less + tied;
        }
        for (std::size_t k = g; k < end; ++k) add(rank_of(pred[order[k]]));
        inserted += end - g;
        g = end;
    }
    return c;
}

inline double pearson(Values pred, Values truth) {
    detail::check_pair(pred, truth, 2, "pearson");
    const auto m = detail::centered(pred, truth);
    if (m.sxx == 0.0 || m.syy == 0.0) throw DegenerateInput("pearson: constant input");
    return m.sxy / std::sqrt(m.sxx * m.syy);
}

/// Squared correlation of the least-squares fit truth ~ k * pred (+ c).
/// With intercept this is the squared Pearson coefficient; without it is
/// r0^2 = 1 - sum (y - k x)^2 / sum (y - mean y)^2 with k = sum xy / sum x^2.
inline double r_squared(Values pred, Values truth, bool with_intercept) {
    detail::check_pair(pred, truth, 2, "r_squared");
    const auto m = detail::centered(pred, truth);
    if (m.sxx == 0.0) throw DegenerateInput("r_squared: predictions are constant");
    if (m.syy == 0.0) throw DegenerateInput("r_squared: labels are constant");
    if (with_intercept) return (m.sxy * m.sxy) / (m.sxx * m.syy);
    double xy = 0.0, xx = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        xy += pred[i] * truth[i];
        xx += pred[i] * pred[i];
    }
    const double k = xy / xx;
    double rss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = truth[i] - k * pred[i];
        rss += r * r;
    }
    return 1.0 - rss / m.syy;
}

/// r_m^2 = r^2 * (1 - sqrt(|r^2 - r0^2|)).
inline double rm2(Values pred, Values truth) {
    const double r2 = r_squared(pred, truth, true);
    const double r02 = r_squared(pred, truth, false);
    return r2 * (1.0 - std::sqrt(std::abs(r2 - r02)));
}

/// All metrics for one prediction set. Metrics that are undefined on the
/// input (constant predictions, no comparable pairs) are left empty.
struct MetricsReport {
    double mse = 0.0;
    std::optional<double> ci;
    std::optional<double> rm2;
    std::optional<double> pearson;
    std::size_t n_pairs = 0;
    std::uint64_t z_pairs = 0;

    nlohmann::json to_json() const {
        auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
        return {{"mse", mse},       {"ci", opt(ci)},         {"rm2", opt(rm2)},
                {"pearson", opt(pearson)}, {"n_pairs", n_pairs}, {"z_pairs", z_pairs}};
    }
};

inline MetricsReport report(Values pred, Values truth) {
    MetricsReport r;
    r.mse = mse(pred, truth);
    r.n_pairs = pred.size();
    if (pred.size() >= 2) {
        const auto c = concordance_counts(pred, truth);
        r.z_pairs = c.z;
        if (c.z > 0) r.ci = c.value();
        try {
            r.pearson = pearson(pred, truth);
            r.rm2 = rm2(pred, truth);
        } catch (const DegenerateInput&) {
        }
    }
    return r;
}

}  // namespace deepglstm::metrics
