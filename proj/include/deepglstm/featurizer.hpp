#pragma once

// Binary atom features and adjacency for a parsed molecule.
//
// Column layout of each 78-wide row:
//   [0, 44)   atom symbol one-hot (43 listed symbols, slot 43 = other)
//   [44, 55)  heavy-atom degree 0..10
//   [55, 66)  total attached hydrogens 0..10
//   [66, 77)  implicit valence 0..10
//   [77]      aromatic flag
// Counts above 10 land in the last slot of their segment.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <utility>

#include "errors.hpp"
#include "smiles.hpp"
#include "tensor.hpp"

namespace deepglstm::chem {

inline constexpr std::size_t kAtomFeatures = 78;
inline constexpr std::size_t kSymbolSlots = 44;
inline constexpr std::size_t kCountSlots = 11;
inline constexpr std::size_t kDegreeOffset = 44;
inline constexpr std::size_t kHydrogenOffset = 55;
inline constexpr std::size_t kValenceOffset = 66;
inline constexpr std::size_t kAromaticColumn = 77;

inline constexpr std::array<std::string_view, kSymbolSlots - 1> kAtomSymbols = {
    "C",  "N",  "O",  "S",  "F",  "Si", "P",  "Cl", "Br", "Mg", "Na", "Ca", "Fe", "As", "Al",
    "I",  "B",  "V",  "K",  "Tl", "Yb", "Sb", "Sn", "Ag", "Pd", "Co", "Se", "Ti", "Zn", "H",
    "Li", "Ge", "Cu", "Au", "Ni", "Cd", "In", "Mn", "Zr", "Cr", "Pt", "Hg", "Pb"};

using NodeFeatureMatrix = Tensor<std::uint8_t>;
using AdjacencyMatrix = Tensor<std::uint8_t>;

class EmptyGraph : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline std::size_t symbol_slot(std::string_view element) {
    const auto it = std::find(kAtomSymbols.begin(), kAtomSymbols.end(), element);
    return it == kAtomSymbols.end() ? kSymbolSlots - 1 : static_cast<std::size_t>(it - kAtomSymbols.begin());
}

/// Default valence used for implicit hydrogens, shifted by formal charge
/// (N+ -> 4, O- -> 1, C+/C- -> 3, B- -> 4). Zero for elements without a default.
inline int default_valence(std::string_view element, int charge) {
    if (element == "C" || element == "Si") return 4 - std::abs(charge);
    if (element == "B") return 3 - charge;
    if (element == "N" || element == "P") return 3 + charge;
    if (element == "O" || element == "S" || element == "Se") return 2 + charge;
    if (element == "F" || element == "Cl" || element == "Br" || element == "I") return 1 + charge;
    return 0;
}

/// Sum of bond orders at an atom, aromatic bonds counted as 1.5, rounded down.
inline int bond_order_sum(const MolecularGraph& g, std::size_t atom) {
    int twice = 0;
    for (const auto& b : g.bonds) {
        if (b.a != atom && b.b != atom) continue;
        switch (b.order) {
            case BondOrder::Single: twice += 2; break;
            case BondOrder::Double: twice += 4; break;
            case BondOrder::Triple: twice += 6; break;
            case BondOrder::Aromatic: twice += 3; break;
        }
    }
    return twice / 2;
}

/// Implicit hydrogens: zero for bracket atoms, otherwise valence minus bonds, at least 0.
inline int implicit_hydrogens(const MolecularGraph& g, std::size_t atom) {
    const Atom& a = g.atoms[atom];
    if (a.bracketed()) return 0;
    return std::max(0, default_valence(a.element, a.formal_charge) - bond_order_sum(g, atom));
}

inline int total_hydrogens(const MolecularGraph& g, std::size_t atom) {
    const Atom& a = g.atoms[atom];
    return a.bracketed() ? *a.explicit_h : implicit_hydrogens(g, atom);
}

inline std::size_t degree(const MolecularGraph& g, std::size_t atom) {
    return static_cast<std::size_t>(
        std::count_if(g.bonds.begin(), g.bonds.end(), [&](const Bond& b) { return b.a == atom || b.b == atom; }));
}

inline std::array<std::uint8_t, kAtomFeatures> atom_feature_row(std::size_t atom_index, const MolecularGraph& g) {
    if (atom_index >= g.atom_count())
        throw IndexOutOfRange("atom " + std::to_string(atom_index) + " of " + std::to_string(g.atom_count()));
    auto clamp = [](std::size_t v) { return std::min<std::size_t>(v, kCountSlots - 1); };
    std::array<std::uint8_t, kAtomFeatures> row{};
    const Atom& a = g.atoms[atom_index];
    row[symbol_slot(a.element)] = 1;
    row[kDegreeOffset + clamp(degree(g, atom_index))] = 1;
    row[kHydrogenOffset + clamp(static_cast<std::size_t>(total_hydrogens(g, atom_index)))] = 1;
    row[kValenceOffset + clamp(static_cast<std::size_t>(implicit_hydrogens(g, atom_index)))] = 1;
    row[kAromaticColumn] = a.aromatic ? 1 : 0;
    return row;
}

inline std::pair<NodeFeatureMatrix, AdjacencyMatrix> featurize(const MolecularGraph& g) {
    const std::size_t n = g.atom_count();
    if (n == 0) throw EmptyGraph("cannot featurize a graph without atoms");
    NodeFeatureMatrix x(n, kAtomFeatures);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = atom_feature_row(i, g);
        std::copy(row.begin(), row.end(), x.row(i).begin());
    }
    AdjacencyMatrix adj(n, n);
    for (const auto& b : g.bonds) {
        adj(b.a, b.b) = 1;
        adj(b.b, b.a) = 1;
    }
    return {std::move(x), std::move(adj)};
}

}  // namespace deepglstm::chem
