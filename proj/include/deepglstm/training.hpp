#pragma once

// Mini-batch training with Adam on the MSE loss, evaluation and per-epoch logs.
//
// Randomness: parameters come from init_params(seed); batch order and dropout
// masks come from two child streams of Rng(seed). A run is therefore fixed by
// (config, seed) down to the last bit.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "checkpoint.hpp"
#include "datasets.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "optim.hpp"

namespace deepglstm {

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    double train_mse = 0.0;  // eval-mode MSE over the whole training set after the epoch
    std::optional<double> test_mse;
    std::optional<double> wall_seconds;

    /// Same epoch, losses bitwise equal; wall time ignored.
    bool same_values(const EpochLog& o) const {
        return epoch == o.epoch && train_mse == o.train_mse && test_mse == o.test_mse;
    }

    std::string jsonl() const {
        nlohmann::json j = {{"epoch", epoch}, {"train_mse", train_mse}};
        j["test_mse"] = test_mse ? nlohmann::json(*test_mse) : nlohmann::json(nullptr);
        if (wall_seconds) j["wall_seconds"] = *wall_seconds;
        return j.dump();
    }
};

struct TrainConfig {
    ModelConfig model;
    ad::AdamOptions adam;
    std::size_t batch_size = 512;
    std::size_t epochs = 1000;
    std::uint64_t seed = 0;

    // Used by the train(config) overload that reads and splits a directory.
    std::filesystem::path data_dir;
    Measure measure = Measure::Kd;
    double test_fraction = 1.0 / 6.0;

    /// Test-set MSE is logged every `eval_every` epochs (0 = only after the last epoch).
    std::size_t eval_every = 0;
    std::optional<std::filesystem::path> checkpoint;
    std::size_t checkpoint_every = 0;  // 0 = only at the end
    std::optional<std::filesystem::path> log_path;
    bool log_wall_time = true;
    std::function<void(const EpochLog&)> on_epoch;

    nlohmann::json hyper_json() const {
        return {{"lr", adam.lr},
                {"beta1", adam.beta1},
                {"beta2", adam.beta2},
                {"eps", adam.eps},
                {"batch_size", batch_size},
                {"epochs", epochs},
                {"measure", to_string(measure)}};
    }
};

/// Graph inputs per drug id and token sequences per protein id.
template <class T>
struct FeatureCache {
    std::map<std::string, GraphInputs<T>> drugs;
    std::map<std::string, TokenSequence> proteins;

    static FeatureCache build(const AffinityDataset& ds, const ModelConfig& config) {
        FeatureCache c;
        for (const auto& [id, smiles] : ds.drugs)
            c.drugs.emplace(id, build_graph_inputs<T>(chem::parse_smiles(smiles), config.power_mode));
        for (const auto& [id, seq] : ds.proteins) c.proteins.emplace(id, tokenize(seq, config.max_len));
        return c;
    }

    const GraphInputs<T>& drug(const std::string& id) const {
        const auto it = drugs.find(id);
        if (it == drugs.end()) throw std::out_of_range("no cached graph for drug '" + id + "'");
        return it->second;
    }
    const TokenSequence& protein(const std::string& id) const {
        const auto it = proteins.find(id);
        if (it == proteins.end()) throw std::out_of_range("no cached tokens for protein '" + id + "'");
        return it->second;
    }
};

namespace detail {

template <class T>
Tensor<T> stack_rows(const std::vector<ad::Value<T>>& parts, std::size_t width) {
    std::size_t rows = 0;
    for (const auto& p : parts) rows += p.shape().rows;
    Tensor<T> out(rows, width);
    std::size_t r = 0;
    for (const auto& p : parts)
        for (std::size_t i = 0; i < p.shape().rows; ++i, ++r) std::copy(p.data().row(i).begin(), p.data().row(i).end(), out.row(r).begin());
    return out;
}

template <class T>
Tensor<T> pick_rows(const Tensor<T>& table, const std::vector<std::int32_t>& idx, std::size_t begin, std::size_t end) {
    Tensor<T> out(end - begin, table.cols());
    for (std::size_t i = begin; i < end; ++i) {
        const auto src = table.row(static_cast<std::size_t>(idx[i]));
        std::copy(src.begin(), src.end(), out.row(i - begin).begin());
    }
    return out;
}

}  // namespace detail

/// Eval-mode predictions for every record, in record order. Each distinct drug
/// and protein is encoded once; the results equal per-pair predict() calls
/// bit for bit because every kernel treats rows independently.
template <class T>
std::vector<double> predict_records(const ModelParameters<T>& p, const AffinityDataset& ds, const FeatureCache<T>& cache,
                                    std::size_t chunk = 256) {
    if (ds.empty()) throw std::invalid_argument("cannot predict on an empty dataset");
    Rng unused(0);
    std::map<std::string, std::int32_t> drug_slot, protein_slot;
    std::vector<std::int32_t> drug_idx, protein_idx;
    std::vector<const GraphInputs<T>*> drugs;
    std::vector<const TokenSequence*> proteins;
    for (const auto& r : ds.records) {
        auto [d, dnew] = drug_slot.emplace(r.drug_id, static_cast<std::int32_t>(drugs.size()));
        if (dnew) drugs.push_back(&cache.drug(r.drug_id));
        drug_idx.push_back(d->second);
        auto [q, qnew] = protein_slot.emplace(r.protein_id, static_cast<std::int32_t>(proteins.size()));
        if (qnew) proteins.push_back(&cache.protein(r.protein_id));
        protein_idx.push_back(q->second);
    }

    std::vector<ad::Value<T>> parts;
    for (std::size_t b = 0; b < drugs.size(); b += chunk) {
        std::vector<ad::Value<T>> pooled;
        for (std::size_t i = b; i < std::min(drugs.size(), b + chunk); ++i) pooled.push_back(drug_graph_features(p, *drugs[i]));
        parts.push_back(drug_projection(p, pooled.size() == 1 ? pooled[0] : ad::concat(pooled, 0), Mode::Eval, unused));
    }
    const Tensor<T> drug_table = detail::stack_rows(parts, widths::kDrugOut);

    const bool with_protein = p.config.encoder == ProteinEncoderKind::BiLstm;
    Tensor<T> protein_table;
    if (with_protein) {
        parts.clear();
        constexpr std::size_t kProteinChunk = 32;
        for (std::size_t b = 0; b < proteins.size(); b += kProteinChunk) {
            const std::vector<const TokenSequence*> group(proteins.begin() + static_cast<std::ptrdiff_t>(b),
                                                          proteins.begin() + static_cast<std::ptrdiff_t>(std::min(proteins.size(), b + kProteinChunk)));
            parts.push_back(protein_encoder(p, make_token_batch(group)));
        }
        protein_table = detail::stack_rows(parts, widths::kProteinOut);
    }

    std::vector<double> out;
    out.reserve(ds.size());
    for (std::size_t b = 0; b < ds.size(); b += chunk) {
        const std::size_t e = std::min(ds.size(), b + chunk);
        const auto d = ad::Value<T>::constant(detail::pick_rows(drug_table, drug_idx, b, e));
        ad::Value<T> q;
        if (with_protein) q = ad::Value<T>::constant(detail::pick_rows(protein_table, protein_idx, b, e));
        const auto y = affinity_head(p, d, q, Mode::Eval, unused);
        for (std::size_t i = 0; i < e - b; ++i) out.push_back(static_cast<double>(y.data()[i]));
    }
    return out;
}

struct ScatterRow {
    double measured = 0.0;
    double predicted = 0.0;
};

struct Evaluation {
    metrics::MetricsReport report;
    std::vector<ScatterRow> scatter;  // record order
};

template <class T>
Evaluation evaluate(const ModelParameters<T>& p, const AffinityDataset& ds, const FeatureCache<T>& cache) {
    const auto pred = predict_records(p, ds, cache);
    const auto truth = ds.values();
    Evaluation ev;
    ev.report = metrics::report(pred, truth);
    ev.scatter.reserve(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) ev.scatter.push_back({truth[i], pred[i]});
    return ev;
}

template <class T>
Evaluation evaluate(const ModelParameters<T>& p, const AffinityDataset& ds) {
    return evaluate(p, ds, FeatureCache<T>::build(ds, p.config));
}

inline void write_scatter_csv(const std::filesystem::path& path, const std::vector<ScatterRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "measured,predicted\n";
    for (const auto& r : rows) out << detail::format_number(r.measured) << ',' << detail::format_number(r.predicted) << '\n';
}

struct TrainResult {
    ModelParameters<float> params;
    std::vector<EpochLog> logs;
};

/// Trains on `train_set`; `test_set` (may be null) is only used for logging.
inline TrainResult train(const TrainConfig& cfg, const AffinityDataset& train_set, const AffinityDataset* test_set = nullptr) {
    if (train_set.empty()) throw std::invalid_argument("training set is empty");
    if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
    if (cfg.batch_size > train_set.size())
        throw std::invalid_argument("batch size " + std::to_string(cfg.batch_size) + " exceeds the " +
                                    std::to_string(train_set.size()) + " training records");
    if (!cfg.model.blocks.any()) throw std::invalid_argument("block mask must enable at least one block");

    using Clock = std::chrono::steady_clock;
    AffinityDataset all = train_set;
    if (test_set) all.records.insert(all.records.end(), test_set->records.begin(), test_set->records.end());
    const auto cache = FeatureCache<float>::build(all, cfg.model);

    TrainResult res{init_params<float>(cfg.seed, cfg.model), {}};
    auto params = res.params.trainable();
    ad::AdamState<float> adam;
    Rng root(cfg.seed);
    Rng order_rng = root.fork(1);
    Rng dropout_rng = root.fork(2);

    std::optional<std::ofstream> log_file;
    if (cfg.log_path) {
        log_file.emplace(*cfg.log_path);
        if (!*log_file) throw std::runtime_error("cannot write " + cfg.log_path->string());
    }
    const auto truth = train_set.values();
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = Clock::now();
        shuffle(std::span(order), order_rng);
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t e = std::min(order.size(), b + cfg.batch_size);
            std::vector<const GraphInputs<float>*> drugs;
            std::vector<const TokenSequence*> proteins;
            Tensor<float> target(e - b, 1);
            for (std::size_t i = b; i < e; ++i) {
                const auto& r = train_set.records[order[i]];
                drugs.push_back(&cache.drug(r.drug_id));
                proteins.push_back(&cache.protein(r.protein_id));
                target[i - b] = static_cast<float>(r.value);
            }
            const auto pred = predict_batch<float>(res.params, drugs, proteins, Mode::Train, dropout_rng);
            const auto loss = ad::mse(pred, ad::Value<float>::constant(std::move(target)));
            if (!std::isfinite(loss.item())) {
                std::ostringstream ids;
                for (std::size_t i = b; i < e; ++i) {
                    const auto& r = train_set.records[order[i]];
                    ids << (i == b ? "" : " ") << r.drug_id << ':' << r.protein_id;
                }
                throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(b / cfg.batch_size) + " [" + ids.str() + "]");
            }
            for (auto& v : params) v.zero_grad();
            ad::backward(loss);
            ad::adam_step(std::span(params), adam, cfg.adam);
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_mse = metrics::mse(predict_records(res.params, train_set, cache), truth);
        const bool last = epoch == cfg.epochs;
        if (test_set && !test_set->empty() && (last || (cfg.eval_every && epoch % cfg.eval_every == 0)))
            log.test_mse = metrics::mse(predict_records(res.params, *test_set, cache), test_set->values());
        if (cfg.log_wall_time) log.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        if (log_file) *log_file << log.jsonl() << '\n' << std::flush;
        if (cfg.on_epoch) cfg.on_epoch(log);
        res.logs.push_back(log);

        if (cfg.checkpoint && (last || (cfg.checkpoint_every && epoch % cfg.checkpoint_every == 0)))
            save_checkpoint(*cfg.checkpoint, res.params, cfg.seed, cfg.hyper_json());
    }
    return res;
}

/// Reads cfg.data_dir, splits it with cfg.seed and trains on the larger part.
inline TrainResult train(const TrainConfig& cfg, LoadReport* report = nullptr) {
    if (cfg.data_dir.empty()) throw std::invalid_argument("no data directory given");
    const auto ds = load_dataset(cfg.data_dir, cfg.measure, report);
    const auto [train_set, test_set] = split(ds, cfg.seed, cfg.test_fraction);
    return train(cfg, train_set, &test_set);
}

}  // namespace deepglstm
