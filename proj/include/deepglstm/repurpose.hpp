#pragma once

// Combined score over a KIBA model and a pKd model, and per-target ranking.
// Lower KIBA means tighter binding, so that component is inverted:
//   K_i = 1 - KB_i / max KB,  D_i = DB_i / max DB,  cb_i = (K_i + D_i) / 2
// with both maxima taken over the scored batch.

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepglstm {

class EmptyBatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NonPositiveMax : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class UnknownProtein : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct PairPrediction {
    std::string drug_id;
    std::string protein_id;
    double kiba_pred = 0.0;
    double pkd_pred = 0.0;
};

struct CombinedScoreRow {
    std::string drug_id;
    std::string protein_id;
    double kiba_pred = 0.0;
    double pkd_pred = 0.0;
    double k_component = 0.0;
    double d_component = 0.0;
    double cb = 0.0;
    bool clipped = false;  // a negative prediction was raised to 0
};

inline std::vector<CombinedScoreRow> combined_scores(const std::vector<PairPrediction>& rows) {
    if (rows.empty()) throw EmptyBatch("combined_scores: no rows");
    double max_kb = 0.0, max_db = 0.0;
    for (const auto& r : rows) {
        max_kb = std::max(max_kb, r.kiba_pred);
        max_db = std::max(max_db, r.pkd_pred);
    }
    if (!(max_kb > 0.0)) throw NonPositiveMax("combined_scores: max KIBA prediction is not positive");
    if (!(max_db > 0.0)) throw NonPositiveMax("combined_scores: max pKd prediction is not positive");

    std::vector<CombinedScoreRow> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        CombinedScoreRow s{r.drug_id, r.protein_id, r.kiba_pred, r.pkd_pred};
        const double kb = std::max(0.0, r.kiba_pred);
        const double db = std::max(0.0, r.pkd_pred);
        s.clipped = kb != r.kiba_pred || db != r.pkd_pred;
        s.k_component = 1.0 - kb / max_kb;
        s.d_component = db / max_db;
        s.cb = (s.k_component + s.d_component) / 2.0;
        out.push_back(std::move(s));
    }
    return out;
}

/// Descending cb, ties by drug_id ascending.
inline bool ranks_before(const CombinedScoreRow& a, const CombinedScoreRow& b) {
    if (a.cb != b.cb) return a.cb > b.cb;
    return a.drug_id < b.drug_id;
}

inline std::vector<CombinedScoreRow> sort_by_score(std::vector<CombinedScoreRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), ranks_before);
    return rows;
}

/// The k best-scoring rows for `protein_id`, best first.
inline std::vector<CombinedScoreRow> rank_top_k(const std::vector<CombinedScoreRow>& scored,
                                                const std::string& protein_id, std::size_t k) {
    if (k == 0) throw std::invalid_argument("rank_top_k: k must be at least 1");
    std::vector<CombinedScoreRow> mine;
    for (const auto& r : scored)
        if (r.protein_id == protein_id) mine.push_back(r);
    if (mine.empty()) throw UnknownProtein("rank_top_k: no scored rows for protein '" + protein_id + "'");
    mine = sort_by_score(std::move(mine));
    if (mine.size() > k) mine.resize(k);
    return mine;
}

}  // namespace deepglstm
