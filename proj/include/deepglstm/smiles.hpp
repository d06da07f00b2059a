#pragma once

// Parser for the SMILES subset used by drug-target affinity datasets.
//
// Grammar: organic-subset atoms (B C N O P S F Cl Br I and aromatic b c n o p s),
// bracket atoms [isotope? symbol chirality? Hcount? charge?], bonds - = # : / \,
// branches, ring closures 1-9 and %nn, and '.' disconnection. Stereo marks are
// read and dropped. Only heavy atoms become graph nodes.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deepglstm::chem {

enum class BondOrder { Single, Double, Triple, Aromatic };

struct Atom {
    std::string element;
    bool aromatic = false;
    int formal_charge = 0;
    std::optional<int> explicit_h;  // set for bracket atoms only
    std::optional<int> isotope;
    std::size_t index = 0;

    bool bracketed() const { return explicit_h.has_value(); }
    bool operator==(const Atom&) const = default;
};

struct Bond {
    std::size_t a = 0;
    std::size_t b = 0;
    BondOrder order = BondOrder::Single;

    bool joins(std::size_t i, std::size_t j) const { return (a == i && b == j) || (a == j && b == i); }
    std::size_t other(std::size_t i) const { return a == i ? b : a; }
    bool operator==(const Bond&) const = default;
};

struct MolecularGraph {
    std::vector<Atom> atoms;
    std::vector<Bond> bonds;

    std::size_t atom_count() const { return atoms.size(); }
    std::size_t bond_count() const { return bonds.size(); }

    bool has_bond(std::size_t i, std::size_t j) const {
        return std::any_of(bonds.begin(), bonds.end(), [&](const Bond& b) { return b.joins(i, j); });
    }

    std::vector<std::size_t> neighbors(std::size_t i) const {
        std::vector<std::size_t> out;
        for (const auto& b : bonds)
            if (b.a == i || b.b == i) out.push_back(b.other(i));
        return out;
    }

    bool operator==(const MolecularGraph&) const = default;
};

enum class SmilesErrorKind {
    EmptyInput,
    UnknownToken,
    UnbalancedBranch,
    UnclosedRing,
    UnexpectedToken,  // a known token in a position the grammar forbids
    InvalidBond,      // self-bond, duplicate bond, or conflicting ring-bond orders
};

inline const char* to_string(SmilesErrorKind k) {
    switch (k) {
        case SmilesErrorKind::EmptyInput: return "EmptyInput";
        case SmilesErrorKind::UnknownToken: return "UnknownToken";
        case SmilesErrorKind::UnbalancedBranch: return "UnbalancedBranch";
        case SmilesErrorKind::UnclosedRing: return "UnclosedRing";
        case SmilesErrorKind::UnexpectedToken: return "UnexpectedToken";
        case SmilesErrorKind::InvalidBond: return "InvalidBond";
    }
    return "?";
}

class SmilesError : public std::runtime_error {
public:
    SmilesError(SmilesErrorKind kind, std::size_t position, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + " at " + std::to_string(position) + ": " + what),
          kind_(kind), position_(position) {}

    SmilesErrorKind kind() const { return kind_; }
    std::size_t position() const { return position_; }

private:
    SmilesErrorKind kind_;
    std::size_t position_;
};

namespace detail {

inline constexpr std::array<std::string_view, 118> kElements = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",  "S",
    "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge",
    "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd",
    "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn",
    "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

inline bool is_element(std::string_view s) {
    return std::find(kElements.begin(), kElements.end(), s) != kElements.end();
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_lower(char c) { return c >= 'a' && c <= 'z'; }

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    MolecularGraph run() {
        if (s_.empty()) throw SmilesError(SmilesErrorKind::EmptyInput, 0, "empty SMILES");
        while (pos_ < s_.size()) step();
        if (pending_) fail(SmilesErrorKind::UnexpectedToken, pending_pos_, "bond symbol without a following atom");
        if (!branches_.empty()) fail(SmilesErrorKind::UnbalancedBranch, s_.size(), "unclosed '('");
        if (!rings_.empty())
            fail(SmilesErrorKind::UnclosedRing, rings_.begin()->second.position,
                 "ring bond " + std::to_string(rings_.begin()->first) + " never closed");
        fold_explicit_hydrogens();
        return std::move(g_);
    }

private:
    struct OpenRing {
        std::size_t atom;
        std::optional<BondOrder> order;
        std::size_t position;
    };

    [[noreturn]] void fail(SmilesErrorKind k, std::size_t at, const std::string& msg) const {
        throw SmilesError(k, at, msg);
    }

    void step() {
        const char c = s_[pos_];
        if (static_cast<unsigned char>(c) > 127) fail(SmilesErrorKind::UnknownToken, pos_, "non-ASCII byte");
        switch (c) {
            case '(':
                if (!prev_) fail(SmilesErrorKind::UnexpectedToken, pos_, "branch before any atom");
                if (pending_) fail(SmilesErrorKind::UnexpectedToken, pos_, "bond symbol before '('");
                if (pos_ + 1 < s_.size() && s_[pos_ + 1] == ')')
                    fail(SmilesErrorKind::UnexpectedToken, pos_, "empty branch");
                branches_.push_back(*prev_);
                ++pos_;
                return;
            case ')':
                if (branches_.empty()) fail(SmilesErrorKind::UnbalancedBranch, pos_, "unmatched ')'");
                if (pending_) fail(SmilesErrorKind::UnexpectedToken, pos_, "bond symbol before ')'");
                prev_ = branches_.back();
                branches_.pop_back();
                ++pos_;
                return;
            case '-': set_bond(BondOrder::Single); return;
            case '=': set_bond(BondOrder::Double); return;
            case '#': set_bond(BondOrder::Triple); return;
            case ':': set_bond(BondOrder::Aromatic); return;
            case '/':
            case '\\': set_bond(BondOrder::Single); return;
            case '.':
                if (!prev_ || pending_) fail(SmilesErrorKind::UnexpectedToken, pos_, "misplaced '.'");
                prev_.reset();
                ++pos_;
                return;
            case '%': {
                if (pos_ + 2 >= s_.size() || !is_digit(s_[pos_ + 1]) || !is_digit(s_[pos_ + 2]))
                    fail(SmilesErrorKind::UnknownToken, pos_, "'%' must be followed by two digits");
                const int n = (s_[pos_ + 1] - '0') * 10 + (s_[pos_ + 2] - '0');
                ring(n, pos_);
                pos_ += 3;
                return;
            }
            case '[': bracket_atom(); return;
            default: break;
        }
        if (is_digit(c)) {
            ring(c - '0', pos_);
            ++pos_;
            return;
        }
        organic_atom();
    }

    void set_bond(BondOrder o) {
        if (!prev_ || pending_) fail(SmilesErrorKind::UnexpectedToken, pos_, "misplaced bond symbol");
        pending_ = o;
        pending_pos_ = pos_;
        ++pos_;
    }

    void ring(int number, std::size_t at) {
        if (!prev_) fail(SmilesErrorKind::UnexpectedToken, at, "ring bond before any atom");
        auto it = rings_.find(number);
        if (it == rings_.end()) {
            rings_.emplace(number, OpenRing{*prev_, pending_, at});
            pending_.reset();
            return;
        }
        const OpenRing open = it->second;
        rings_.erase(it);
        std::optional<BondOrder> order = open.order;
        if (pending_) {
            if (order && *order != *pending_)
                fail(SmilesErrorKind::InvalidBond, at, "conflicting ring-closure bond orders");
            order = pending_;
        }
        pending_.reset();
        add_bond(open.atom, *prev_, order, at);
    }

    void add_bond(std::size_t a, std::size_t b, std::optional<BondOrder> order, std::size_t at) {
        if (a == b) fail(SmilesErrorKind::InvalidBond, at, "atom bonded to itself");
        if (g_.has_bond(a, b)) fail(SmilesErrorKind::InvalidBond, at, "duplicate bond");
        BondOrder o = BondOrder::Single;
        if (order)
            o = *order;
        else if (g_.atoms[a].aromatic && g_.atoms[b].aromatic)
            o = BondOrder::Aromatic;
        g_.bonds.push_back(Bond{std::min(a, b), std::max(a, b), o});
    }

    void attach(Atom atom, std::size_t at) {
        atom.index = g_.atoms.size();
        g_.atoms.push_back(std::move(atom));
        const std::size_t idx = g_.atoms.size() - 1;
        if (prev_) add_bond(*prev_, idx, pending_, at);
        pending_.reset();
        prev_ = idx;
    }

    void organic_atom() {
        const std::size_t at = pos_;
        const char c = s_[pos_];
        Atom atom;
        if (c == 'C' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'l') {
            atom.element = "Cl";
            pos_ += 2;
        } else if (c == 'B' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'r') {
            atom.element = "Br";
            pos_ += 2;
        } else {
            switch (c) {
                case 'B': case 'C': case 'N': case 'O': case 'P': case 'S': case 'F': case 'I':
                    atom.element = std::string(1, c);
                    break;
                case 'b': case 'c': case 'n': case 'o': case 'p': case 's':
                    atom.element = std::string(1, static_cast<char>(c - 'a' + 'A'));
                    atom.aromatic = true;
                    break;
                default:
                    fail(SmilesErrorKind::UnknownToken, pos_, std::string("unsupported character '") + c + "'");
            }
            ++pos_;
        }
        attach(std::move(atom), at);
    }

    int read_int() {
        int v = 0;
        while (pos_ < s_.size() && is_digit(s_[pos_])) {
            v = v * 10 + (s_[pos_] - '0');
            if (v > 999) fail(SmilesErrorKind::UnknownToken, pos_, "number too large");
            ++pos_;
        }
        return v;
    }

    void bracket_atom() {
        const std::size_t at = pos_;
        ++pos_;  // '['
        auto need = [&](const char* what) {
            if (pos_ >= s_.size()) fail(SmilesErrorKind::UnknownToken, at, std::string("unterminated bracket atom, ") + what);
        };
        Atom atom;
        atom.explicit_h = 0;
        need("expected symbol");
        if (is_digit(s_[pos_])) atom.isotope = read_int();
        need("expected symbol");
        const char c = s_[pos_];
        if (c >= 'A' && c <= 'Z') {
            std::string two = pos_ + 1 < s_.size() ? std::string{c, s_[pos_ + 1]} : std::string{};
            if (!two.empty() && is_lower(two[1]) && is_element(two)) {
                atom.element = two;
                pos_ += 2;
            } else if (is_element(std::string(1, c))) {
                atom.element = std::string(1, c);
                ++pos_;
            } else {
                fail(SmilesErrorKind::UnknownToken, pos_, "unknown element symbol");
            }
        } else if (c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's') {
            atom.element = std::string(1, static_cast<char>(c - 'a' + 'A'));
            atom.aromatic = true;
            ++pos_;
        } else {
            fail(SmilesErrorKind::UnknownToken, pos_, std::string("unsupported bracket symbol '") + c + "'");
        }
        need("expected ']'");
        while (pos_ < s_.size() && s_[pos_] == '@') ++pos_;  // chirality, dropped
        need("expected ']'");
        if (s_[pos_] == 'H') {
            ++pos_;
            need("expected ']'");
            atom.explicit_h = is_digit(s_[pos_]) ? read_int() : 1;
        }
        need("expected ']'");
        if (s_[pos_] == '+' || s_[pos_] == '-') {
            const char sign = s_[pos_];
            const int unit = sign == '+' ? 1 : -1;
            ++pos_;
            need("expected ']'");
            if (is_digit(s_[pos_])) {
                atom.formal_charge = unit * read_int();
            } else {
                int n = 1;
                while (pos_ < s_.size() && s_[pos_] == sign) {
                    ++n;
                    ++pos_;
                }
                atom.formal_charge = unit * n;
            }
        }
        need("expected ']'");
        if (s_[pos_] != ']') fail(SmilesErrorKind::UnknownToken, pos_, "unexpected character in bracket atom");
        ++pos_;
        attach(std::move(atom), at);
    }

    // Explicit [H] atoms bound to exactly one heavy atom become hydrogen counts.
    void fold_explicit_hydrogens() {
        std::vector<bool> drop(g_.atoms.size(), false);
        for (std::size_t i = 0; i < g_.atoms.size(); ++i) {
            const Atom& a = g_.atoms[i];
            if (a.element != "H" || a.formal_charge != 0 || a.isotope || a.explicit_h.value_or(0) != 0) continue;
            const auto nb = g_.neighbors(i);
            if (nb.size() != 1 || g_.atoms[nb[0]].element == "H") continue;
            drop[i] = true;
            if (g_.atoms[nb[0]].bracketed()) *g_.atoms[nb[0]].explicit_h += 1;
        }
        if (std::none_of(drop.begin(), drop.end(), [](bool d) { return d; })) return;
        std::vector<std::size_t> remap(g_.atoms.size());
        MolecularGraph out;
        for (std::size_t i = 0; i < g_.atoms.size(); ++i) {
            if (drop[i]) continue;
            remap[i] = out.atoms.size();
            out.atoms.push_back(g_.atoms[i]);
            out.atoms.back().index = remap[i];
        }
        for (const auto& b : g_.bonds)
            if (!drop[b.a] && !drop[b.b]) out.bonds.push_back(Bond{remap[b.a], remap[b.b], b.order});
        g_ = std::move(out);
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    MolecularGraph g_;
    std::optional<std::size_t> prev_;
    std::optional<BondOrder> pending_;
    std::size_t pending_pos_ = 0;
    std::vector<std::size_t> branches_;
    std::map<int, OpenRing> rings_;
};

}  // namespace detail

/// Parses `text` into a heavy-atom graph. Throws SmilesError.
inline MolecularGraph parse_smiles(std::string_view text) { return detail::Parser(text).run(); }

}  // namespace deepglstm::chem
