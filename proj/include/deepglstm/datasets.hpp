#pragma once

// Affinity datasets on disk: a directory holding three CSV files with header rows.
//   drugs.csv       id,smiles
//   proteins.csv    id,sequence
//   affinities.csv  drug_id,protein_id,value
// Values are stored raw (Kd in nM, STITCH scores in 0..1000) and transformed on
// load. save_dataset writes already-transformed values and a dataset.json
// marker so that a reload does not transform them a second time.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "protein_codec.hpp"
#include "rng.hpp"
#include "smiles.hpp"

namespace deepglstm {

enum class Measure { Kd, Kiba, Ki, Ac50, StitchScores };

inline const char* to_string(Measure m) {
    switch (m) {
        case Measure::Kd: return "pKd";
        case Measure::Kiba: return "KIBA";
        case Measure::Ki: return "pKi";
        case Measure::Ac50: return "AC50";
        case Measure::StitchScores: return "STITCH_SCORES";
    }
    return "?";
}

/// Accepts the names printed by to_string, case-insensitively; "kd" and "davis"
/// are aliases of pKd, "stitch" of STITCH_SCORES.
inline Measure parse_measure(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == "pkd" || s == "kd" || s == "davis") return Measure::Kd;
    if (s == "kiba") return Measure::Kiba;
    if (s == "pki" || s == "ki") return Measure::Ki;
    if (s == "ac50") return Measure::Ac50;
    if (s == "stitch_scores" || s == "stitch") return Measure::StitchScores;
    throw std::invalid_argument("unknown measure '" + s + "' (expected pKd|KIBA|pKi|AC50|STITCH_SCORES)");
}

class NonPositiveKd : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class MissingFile : public std::runtime_error {
public:
    explicit MissingFile(const std::filesystem::path& p)
        : std::runtime_error("missing file: " + p.string()), path_(p) {}
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

class MalformedRow : public std::runtime_error {
public:
    MalformedRow(const std::filesystem::path& file, std::size_t line, const std::string& why)
        : std::runtime_error(file.filename().string() + ":" + std::to_string(line) + ": " + why), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class DanglingId : public std::runtime_error {
public:
    DanglingId(const std::string& id, std::size_t line)
        : std::runtime_error("affinities.csv:" + std::to_string(line) + ": unknown id '" + id + "'"), id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

/// pKd = -log10(Kd / 1e9) for Kd in nanomolar.
inline double pkd_transform(double kd_nanomolar) {
    if (!(kd_nanomolar > 0.0) || !std::isfinite(kd_nanomolar))
        throw NonPositiveKd("Kd must be a positive finite number of nM, got " + std::to_string(kd_nanomolar));
    return 9.0 - std::log10(kd_nanomolar);
}

inline double stitch_scale(double score) { return score / 100.0; }

inline double transform_value(Measure m, double raw) {
    switch (m) {
        case Measure::Kd: return pkd_transform(raw);
        case Measure::StitchScores: return stitch_scale(raw);
        default: return raw;
    }
}

struct AffinityRecord {
    std::string drug_id;
    std::string protein_id;
    double value = 0.0;
    Measure measure = Measure::Kd;

    bool operator==(const AffinityRecord&) const = default;
};

struct AffinityDataset {
    Measure measure = Measure::Kd;
    std::map<std::string, std::string> drugs;     // id -> SMILES
    std::map<std::string, std::string> proteins;  // id -> sequence
    std::vector<AffinityRecord> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }

    /// Same registries, records picked by index in the given order.
    AffinityDataset subset(const std::vector<std::size_t>& indices) const {
        AffinityDataset out{measure, drugs, proteins, {}};
        out.records.reserve(indices.size());
        for (auto i : indices) out.records.push_back(records.at(i));
        return out;
    }

    std::vector<double> values() const {
        std::vector<double> v;
        v.reserve(records.size());
        for (const auto& r : records) v.push_back(r.value);
        return v;
    }
};

/// Side-channel counts from load_dataset.
struct LoadReport {
    std::size_t dropped_smiles = 0;   // drugs.csv rows whose SMILES failed to parse
    std::size_t dropped_records = 0;  // affinity rows that referenced a dropped drug
    std::vector<std::string> dropped_drug_ids;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const {
        return {{"dropped_smiles", dropped_smiles},
                {"dropped_records", dropped_records},
                {"dropped_drug_ids", dropped_drug_ids},
                {"warnings", warnings}};
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

struct CsvRow {
    std::size_t line;
    std::vector<std::string> fields;
};

/// Rows after the header, blank lines skipped. Header must match `columns`.
inline std::vector<CsvRow> read_csv(const std::filesystem::path& path, const std::vector<std::string>& columns) {
    std::ifstream in(path);
    if (!in) throw MissingFile(path);
    std::string line;
    std::size_t n = 0;
    std::vector<CsvRow> rows;
    bool header = true;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (n == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        if (header) {
            if (fields != columns) {
                std::string want;
                for (const auto& c : columns) want += (want.empty() ? "" : ",") + c;
                throw MalformedRow(path, n, "expected header '" + want + "'");
            }
            header = false;
            continue;
        }
        if (fields.size() != columns.size())
            throw MalformedRow(path, n,
                               "expected " + std::to_string(columns.size()) + " fields, got " +
                                   std::to_string(fields.size()));
        rows.push_back({n, std::move(fields)});
    }
    if (header) throw MalformedRow(path, n == 0 ? 1 : n, "missing header row");
    return rows;
}

inline double parse_number(const std::filesystem::path& file, std::size_t line, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v))
        throw MalformedRow(file, line, "value '" + text + "' is not a finite number");
    return v;
}

inline std::string format_number(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace detail

/// id -> SMILES from a drugs.csv file. Rows whose SMILES does not parse are
/// skipped and counted in `rep`.
inline std::map<std::string, std::string> load_drug_registry(const std::filesystem::path& drugs_csv, LoadReport& rep) {
    std::map<std::string, std::string> drugs;
    std::set<std::string> dropped;
    for (auto& row : detail::read_csv(drugs_csv, {"id", "smiles"})) {
        const std::string& id = row.fields[0];
        const std::string& smiles = row.fields[1];
        if (id.empty()) throw MalformedRow(drugs_csv, row.line, "empty id");
        if (drugs.count(id) || dropped.count(id)) throw MalformedRow(drugs_csv, row.line, "duplicate id '" + id + "'");
        try {
            chem::parse_smiles(smiles);
        } catch (const chem::SmilesError& e) {
            ++rep.dropped_smiles;
            rep.dropped_drug_ids.push_back(id);
            rep.warnings.push_back("drugs.csv:" + std::to_string(row.line) + ": dropped '" + id + "': " + e.what());
            dropped.insert(id);
            continue;
        }
        drugs.emplace(id, smiles);
    }
    return drugs;
}

/// id -> sequence from a proteins.csv file.
inline std::map<std::string, std::string> load_protein_registry(const std::filesystem::path& proteins_csv) {
    std::map<std::string, std::string> proteins;
    for (auto& row : detail::read_csv(proteins_csv, {"id", "sequence"})) {
        const std::string& id = row.fields[0];
        const std::string& seq = row.fields[1];
        if (id.empty()) throw MalformedRow(proteins_csv, row.line, "empty id");
        if (proteins.count(id)) throw MalformedRow(proteins_csv, row.line, "duplicate id '" + id + "'");
        try {
            tokenize(seq, 0);
        } catch (const InvalidResidue& e) {
            throw MalformedRow(proteins_csv, row.line, e.what());
        }
        proteins.emplace(id, seq);
    }
    return proteins;
}

inline AffinityDataset load_dataset(const std::filesystem::path& dir, Measure measure, LoadReport* report = nullptr) {
    LoadReport local;
    LoadReport& rep = report ? *report : local;
    const auto drugs_csv = dir / "drugs.csv", proteins_csv = dir / "proteins.csv", aff_csv = dir / "affinities.csv";
    for (const auto& p : {drugs_csv, proteins_csv, aff_csv})
        if (!std::filesystem::exists(p)) throw MissingFile(p);

    bool pre_transformed = false;
    if (const auto meta = dir / "dataset.json"; std::filesystem::exists(meta)) {
        std::ifstream in(meta);
        const auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw MalformedRow(meta, 1, "dataset.json is not a JSON object");
        pre_transformed = j.value("values", std::string("raw")) == "transformed";
        if (pre_transformed && j.contains("measure") && parse_measure(j["measure"].get<std::string>()) != measure)
            throw std::invalid_argument("dataset at " + dir.string() + " was saved as " +
                                        j["measure"].get<std::string>() + ", requested " + to_string(measure));
    }

    AffinityDataset ds;
    ds.measure = measure;
    ds.drugs = load_drug_registry(drugs_csv, rep);
    ds.proteins = load_protein_registry(proteins_csv);
    const std::set<std::string> dropped(rep.dropped_drug_ids.begin(), rep.dropped_drug_ids.end());
    std::set<std::pair<std::string, std::string>> seen;
    for (auto& row : detail::read_csv(aff_csv, {"drug_id", "protein_id", "value"})) {
        const auto& drug = row.fields[0];
        const auto& protein = row.fields[1];
        if (dropped.count(drug)) {
            ++rep.dropped_records;
            continue;
        }
        if (!ds.drugs.count(drug)) throw DanglingId(drug, row.line);
        if (!ds.proteins.count(protein)) throw DanglingId(protein, row.line);
        if (!seen.emplace(drug, protein).second)
            throw MalformedRow(aff_csv, row.line, "duplicate pair (" + drug + ", " + protein + ")");
        const double raw = detail::parse_number(aff_csv, row.line, row.fields[2]);
        double value = raw;
        if (!pre_transformed) {
            try {
                value = transform_value(measure, raw);
            } catch (const NonPositiveKd& e) {
                throw MalformedRow(aff_csv, row.line, e.what());
            }
        }
        ds.records.push_back({drug, protein, value, measure});
    }
    return ds;
}

/// Writes the dataset with transformed values and a marker file; load_dataset
/// on the result reproduces `ds` exactly.
inline void save_dataset(const AffinityDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name);
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
        return out;
    };
    {
        auto out = open("drugs.csv");
        out << "id,smiles\n";
        for (const auto& [id, smiles] : ds.drugs) out << id << ',' << smiles << '\n';
    }
    {
        auto out = open("proteins.csv");
        out << "id,sequence\n";
        for (const auto& [id, seq] : ds.proteins) out << id << ',' << seq << '\n';
    }
    {
        auto out = open("affinities.csv");
        out << "drug_id,protein_id,value\n";
        for (const auto& r : ds.records) out << r.drug_id << ',' << r.protein_id << ',' << detail::format_number(r.value) << '\n';
    }
    auto out = open("dataset.json");
    out << nlohmann::json{{"measure", to_string(ds.measure)}, {"values", "transformed"}}.dump() << '\n';
}

/// Seeded record-level split. The test side gets round(n * test_fraction)
/// records, kept within [1, n-1] when n >= 2.
inline std::pair<AffinityDataset, AffinityDataset> split(const AffinityDataset& ds, std::uint64_t seed,
                                                         double test_fraction = 1.0 / 6.0) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("test_fraction must lie in (0, 1)");
    const std::size_t n = ds.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    shuffle(std::span(order), rng);
    auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    if (n >= 2) n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    const std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    const std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    return {ds.subset(train), ds.subset(test)};
}

}  // namespace deepglstm
