#pragma once

// Hand-rolled generators for property tests and synthetic datasets.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "deepglstm/datasets.hpp"
#include "deepglstm/rng.hpp"
#include "deepglstm/tensor.hpp"

namespace testsupport {

using deepglstm::Rng;

/// A SMILES string together with the graph it was written from.
struct GeneratedSmiles {
    std::string text;
    std::vector<std::string> elements;                    // parse order
    std::set<std::pair<std::size_t, std::size_t>> edges;  // (min, max)
    std::size_t adjacency_tokens = 0;                     // bonds written between neighbouring atom tokens
    std::size_t ring_closures = 0;
};

namespace detail {

inline std::string ring_label(int n) {
    if (n < 10) return std::to_string(n);
    return "%" + std::to_string(n);
}

struct Writer {
    const std::vector<std::vector<std::size_t>>& children;
    const std::vector<std::vector<std::size_t>>& ring_partners;
    const std::vector<std::string>& tokens;
    const std::vector<std::string>& bond_prefix;  // symbol written before each non-root atom
    std::map<std::pair<std::size_t, std::size_t>, int> open;
    std::set<int> free_labels;
    int next_label = 1;
    std::vector<std::size_t> order;  // atom ids in writing order
    std::string out;

    int take_label() {
        if (!free_labels.empty()) {
            const int l = *free_labels.begin();
            free_labels.erase(free_labels.begin());
            return l;
        }
        return next_label++;
    }

    void visit(std::size_t u) {
        out += tokens[u];
        order.push_back(u);
        for (std::size_t v : ring_partners[u]) {
            const auto key = std::minmax(u, v);
            auto it = open.find(key);
            if (it == open.end()) {
                const int l = take_label();
                open.emplace(key, l);
                out += ring_label(l);
            } else {
                out += ring_label(it->second);
                free_labels.insert(it->second);
                open.erase(it);
            }
        }
        const auto& ch = children[u];
        for (std::size_t i = 0; i < ch.size(); ++i) {
            const bool branch = i + 1 < ch.size();
            if (branch) out += '(';
            out += bond_prefix[ch[i]];
            visit(ch[i]);
            if (branch) out += ')';
        }
    }
};

}  // namespace detail

/// Random molecule of 1..max_atoms heavy atoms in up to `max_components`
/// dot-separated parts, written as SMILES from a random spanning tree plus
/// ring-closure edges. Ring bonds never duplicate tree bonds.
inline GeneratedSmiles random_smiles(Rng& rng, std::size_t max_atoms = 24, std::size_t max_components = 2,
                                     bool allow_brackets = true) {
    static const std::vector<std::string> organic = {"C", "C", "C", "C", "N", "N", "O", "O", "S", "F", "Cl", "Br", "I", "P", "B"};
    static const std::vector<std::string> aromatic = {"c", "c", "c", "n", "o", "s"};
    static const std::vector<std::pair<std::string, std::string>> bracket = {
        {"[NH4+]", "N"}, {"[O-]", "O"}, {"[nH]", "N"}, {"[C@@H]", "C"}, {"[C@H]", "C"}, {"[13CH3]", "C"},
        {"[Na+]", "Na"}, {"[Fe+2]", "Fe"}, {"[Se]", "Se"}, {"[N+]", "N"}, {"[Pt]", "Pt"}, {"[Si]", "Si"}};

    GeneratedSmiles g;
    const std::size_t components = 1 + rng.below(max_components);
    for (std::size_t comp = 0; comp < components; ++comp) {
        const std::size_t n = 1 + rng.below(std::max<std::size_t>(1, max_atoms / components));
        std::vector<std::string> tokens(n), elements(n), prefix(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto kind = rng.below(10);
            if (allow_brackets && kind == 0) {
                const auto& [tok, el] = bracket[rng.below(bracket.size())];
                tokens[i] = tok;
                elements[i] = el;
            } else if (kind <= 3) {
                tokens[i] = aromatic[rng.below(aromatic.size())];
                elements[i] = std::string(1, static_cast<char>(tokens[i][0] - 'a' + 'A'));
            } else {
                tokens[i] = organic[rng.below(organic.size())];
                elements[i] = tokens[i];
            }
        }
        // Random tree: parent of node i is some earlier node.
        std::vector<std::vector<std::size_t>> children(n), rings(n);
        std::set<std::pair<std::size_t, std::size_t>> local;
        for (std::size_t i = 1; i < n; ++i) {
            const std::size_t parent = rng.below(i);
            children[parent].push_back(i);
            local.emplace(parent, i);
            static const char* bonds[] = {"", "", "", "", "-", "=", "#", "/", "\\"};
            prefix[i] = bonds[rng.below(9)];
        }
        const std::size_t n_rings = n >= 3 ? rng.below(std::min<std::size_t>(4, n / 2) + 1) : 0;
        for (std::size_t r = 0, tries = 0; r < n_rings && tries < 50; ++tries) {
            std::size_t a = rng.below(n), b = rng.below(n);
            if (a == b) continue;
            if (a > b) std::swap(a, b);
            if (local.count({a, b})) continue;
            local.emplace(a, b);
            rings[a].push_back(b);
            rings[b].push_back(a);
            ++r;
            ++g.ring_closures;
        }
        detail::Writer w{children, rings, tokens, prefix, {}, {}, 1, {}, {}};
        w.visit(0);
        // Parse order is writing order; relabel edges accordingly.
        std::vector<std::size_t> pos(n);
        for (std::size_t k = 0; k < n; ++k) pos[w.order[k]] = k;
        const std::size_t base = g.elements.size();
        for (std::size_t k = 0; k < n; ++k) g.elements.push_back(elements[w.order[k]]);
        for (const auto& [a, b] : local) {
            const std::size_t x = pos[a] + base, y = pos[b] + base;
            g.edges.emplace(std::min(x, y), std::max(x, y));
        }
        g.adjacency_tokens += n - 1;
        if (!g.text.empty()) g.text += '.';
        g.text += w.out;
    }
    return g;
}

/// Random permutation of 0..n-1.
inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    deepglstm::shuffle(std::span(p), rng);
    return p;
}

/// out(perm[i], perm[j]) = m(i, j) for square m; out.row(perm[i]) = m.row(i) otherwise.
template <class T>
deepglstm::Tensor<T> permute_rows(const deepglstm::Tensor<T>& m, const std::vector<std::size_t>& perm) {
    deepglstm::Tensor<T> out(m.shape());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t c = 0; c < m.cols(); ++c) out(perm[i], c) = m(i, c);
    return out;
}

template <class T>
deepglstm::Tensor<T> permute_square(const deepglstm::Tensor<T>& m, const std::vector<std::size_t>& perm) {
    deepglstm::Tensor<T> out(m.shape());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(perm[i], perm[j]) = m(i, j);
    return out;
}

/// Every labelled simple graph on n nodes (2^(n(n-1)/2) of them), as adjacency matrices.
inline std::vector<deepglstm::Tensor<std::uint8_t>> all_graphs(std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> slots;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) slots.emplace_back(i, j);
    std::vector<deepglstm::Tensor<std::uint8_t>> out;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << slots.size()); ++mask) {
        deepglstm::Tensor<std::uint8_t> a(n, n);
        for (std::size_t s = 0; s < slots.size(); ++s)
            if (mask >> s & 1) a(slots[s].first, slots[s].second) = a(slots[s].second, slots[s].first) = 1;
        out.push_back(std::move(a));
    }
    return out;
}

inline bool connected(const deepglstm::Tensor<std::uint8_t>& a) {
    const std::size_t n = a.rows();
    if (n == 0) return true;
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        for (std::size_t v = 0; v < n; ++v)
            if (a(u, v) && !seen[v]) {
                seen[v] = true;
                stack.push_back(v);
            }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool s) { return s; });
}

inline std::string random_protein(Rng& rng, std::size_t min_len, std::size_t max_len) {
    static const std::string residues = "ACDEFGHIKLMNPQRSTVWY";
    const std::size_t len = min_len + rng.below(max_len - min_len + 1);
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s.push_back(residues[rng.below(residues.size())]);
    return s;
}

/// Drug-like SMILES: a ring core led by a linker group, with up to two
/// extra branched carbons in front.
inline std::string random_druglike(Rng& rng) {
    static const std::vector<std::string> cores = {"c1ccccc1", "c1ccncc1", "C1CCNCC1", "c1ccc2ccccc2c1", "c1cnc2ncnc2c1"};
    static const std::vector<std::string> linkers = {"C", "CC", "O", "N", "C(=O)O", "OC", "NC(=O)C", "S(=O)(=O)N",
                                                     "CN1CCNCC1", "c1ccccc1", "OCC(O)CO"};
    static const std::vector<std::string> groups = {"C",    "CC",  "O",      "N",         "F",      "Cl",
                                                    "C(=O)O", "OC", "C(F)(F)F", "NC(=O)C", "S(=O)(=O)N", "C#N",
                                                    "CN1CCNCC1", "c1ccccc1", "OCC(O)CO", "Br"};
    std::string s = linkers[rng.below(linkers.size())] + cores[rng.below(cores.size())];
    const auto extra = rng.below(3);
    for (std::size_t i = 0; i < extra; ++i) s = "C(" + groups[rng.below(groups.size())] + ")" + s;
    return s;
}

struct SyntheticSpec {
    std::size_t drugs = 8;
    std::size_t proteins = 4;
    std::size_t protein_min_len = 60;
    std::size_t protein_max_len = 200;
    std::uint64_t seed = 1;
    double noise = 0.1;
    // Planted pKd offsets above 5 are drawn uniformly from these ranges.
    double drug_effect_lo = -0.6, drug_effect_hi = 1.8;
    double protein_effect_lo = -0.6, protein_effect_hi = 1.2;
};

/// Davis-format directory (raw Kd in nM) whose pKd is a planted drug effect
/// plus a protein effect plus noise, censored at Kd = 10000 nM (pKd 5) like
/// the public Davis set. All drug x protein pairs are present. Returns the
/// planted pKd values.
inline deepglstm::AffinityDataset write_synthetic_davis(const std::filesystem::path& dir, const SyntheticSpec& spec) {
    Rng rng(spec.seed);
    deepglstm::AffinityDataset ds;
    ds.measure = deepglstm::Measure::Kd;
    std::vector<double> drug_effect, protein_effect;
    std::set<std::string> smiles_seen;
    for (std::size_t d = 0; d < spec.drugs; ++d) {
        std::string s;
        do s = random_druglike(rng);
        while (!smiles_seen.insert(s).second);
        char id[32];
        std::snprintf(id, sizeof id, "D%04zu", d);
        ds.drugs.emplace(id, s);
        drug_effect.push_back(rng.uniform(spec.drug_effect_lo, spec.drug_effect_hi));
    }
    for (std::size_t p = 0; p < spec.proteins; ++p) {
        char id[32];
        std::snprintf(id, sizeof id, "P%04zu", p);
        ds.proteins.emplace(id, random_protein(rng, spec.protein_min_len, spec.protein_max_len));
        protein_effect.push_back(rng.uniform(spec.protein_effect_lo, spec.protein_effect_hi));
    }
    std::filesystem::create_directories(dir);
    std::ofstream drugs(dir / "drugs.csv"), proteins(dir / "proteins.csv"), aff(dir / "affinities.csv");
    drugs << "id,smiles\n";
    for (const auto& [id, s] : ds.drugs) drugs << id << ',' << s << '\n';
    proteins << "id,sequence\n";
    for (const auto& [id, s] : ds.proteins) proteins << id << ',' << s << '\n';
    aff << "drug_id,protein_id,value\n";
    aff.precision(17);
    std::size_t d = 0;
    for (const auto& [drug, smi] : ds.drugs) {
        std::size_t p = 0;
        for (const auto& [prot, seq] : ds.proteins) {
            // Box-Muller noise.
            const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
            const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
            const double pkd = std::max(5.0, 5.0 + drug_effect[d] + protein_effect[p] + spec.noise * z);
            const double kd = std::pow(10.0, 9.0 - pkd);
            aff << drug << ',' << prot << ',' << kd << '\n';
            ds.records.push_back({drug, prot, pkd, deepglstm::Measure::Kd});
            ++p;
        }
        ++d;
    }
    return ds;
}

}  // namespace testsupport
