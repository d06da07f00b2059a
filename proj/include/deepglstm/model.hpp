#pragma once

// The affinity network: three GCN blocks over A, A^2, A^3 whose outputs are
// concatenated and max-pooled into a drug vector, a Bi-LSTM over the protein
// tokens, and a fully connected head on the joined representation.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "autodiff.hpp"
#include "featurizer.hpp"
#include "graph_ops.hpp"
#include "lstm.hpp"
#include "protein_codec.hpp"
#include "rng.hpp"

namespace deepglstm {

enum class Mode { Train, Eval };

enum class ProteinEncoderKind { BiLstm, None };

inline const char* to_string(ProteinEncoderKind k) { return k == ProteinEncoderKind::BiLstm ? "bilstm" : "none"; }

inline ProteinEncoderKind parse_encoder(const std::string& s) {
    if (s == "bilstm") return ProteinEncoderKind::BiLstm;
    if (s == "none") return ProteinEncoderKind::None;
    throw std::invalid_argument("unknown protein encoder '" + s + "' (expected bilstm|none)");
}

/// Which GCN blocks (1: A, 2: A^2, 3: A^3) are active.
struct BlockMask {
    std::array<bool, 3> enabled{true, true, true};

    bool operator[](std::size_t b) const { return enabled[b]; }
    bool any() const { return enabled[0] || enabled[1] || enabled[2]; }
    bool operator==(const BlockMask&) const = default;

    std::string str() const {
        std::string s;
        for (std::size_t b = 0; b < 3; ++b)
            if (enabled[b]) s += (s.empty() ? "" : ",") + std::to_string(b + 1);
        return s;
    }

    /// Parses "1,2,3", "1", "2,3", ...
    static BlockMask parse(const std::string& text) {
        BlockMask m{{false, false, false}};
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item == "1" || item == "2" || item == "3") m.enabled[static_cast<std::size_t>(item[0] - '1')] = true;
            else throw std::invalid_argument("block mask entries must be 1, 2 or 3, got '" + item + "'");
        }
        if (!m.any()) throw std::invalid_argument("block mask must enable at least one block");
        return m;
    }
};

struct ModelConfig {
    BlockMask blocks;
    PowerMode power_mode = PowerMode::Binarized;
    ProteinEncoderKind encoder = ProteinEncoderKind::BiLstm;
    std::size_t max_len = kDefaultSequenceLength;
    double dropout = 0.2;

    bool operator==(const ModelConfig&) const = default;
};

namespace widths {
inline constexpr std::size_t kDrugHidden = 1024;
inline constexpr std::size_t kDrugOut = 128;
inline constexpr std::size_t kEmbedding = 128;
inline constexpr std::size_t kLstmHidden = 64;
inline constexpr std::size_t kProteinOut = 2 * kLstmHidden;
inline constexpr std::size_t kHead1 = 1024;
inline constexpr std::size_t kHead2 = 512;

/// Layer widths inside each block, input first: 78->78->156->312, 78->78->156, 78->78.
inline const std::vector<std::size_t>& block(std::size_t b) {
    static const std::array<std::vector<std::size_t>, 3> w = {
        std::vector<std::size_t>{78, 78, 156, 312}, std::vector<std::size_t>{78, 78, 156},
        std::vector<std::size_t>{78, 78}};
    return w.at(b);
}

inline std::size_t graph_width(const BlockMask& m) {
    std::size_t w = 0;
    for (std::size_t b = 0; b < 3; ++b)
        if (m[b]) w += block(b).back();
    return w;
}
}  // namespace widths

template <class T>
struct Dense {
    ad::Value<T> weight;
    ad::Value<T> bias;

    ad::Value<T> operator()(const ad::Value<T>& x) const { return ad::add_row(ad::matmul(x, weight), bias); }
};

template <class T>
struct LstmDirection {
    ad::Value<T> w_ih;  // embedding x 4h
    ad::Value<T> w_hh;  // h x 4h
    ad::Value<T> bias;  // 1 x 4h
};

template <class T>
struct ModelParameters {
    ModelConfig config;
    std::array<std::vector<Dense<T>>, 3> gcn;
    Dense<T> drug_fc1, drug_fc2;
    ad::Value<T> embedding;
    LstmDirection<T> lstm_forward, lstm_backward;
    Dense<T> head1, head2, output;

    /// Every parameter with a stable name, in a fixed order.
    std::vector<std::pair<std::string, ad::Value<T>>> named() const {
        std::vector<std::pair<std::string, ad::Value<T>>> out;
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t l = 0; l < gcn[b].size(); ++l) {
                const std::string p = "gcn" + std::to_string(b + 1) + "." + std::to_string(l);
                out.emplace_back(p + ".weight", gcn[b][l].weight);
                out.emplace_back(p + ".bias", gcn[b][l].bias);
            }
        out.emplace_back("drug_fc1.weight", drug_fc1.weight);
        out.emplace_back("drug_fc1.bias", drug_fc1.bias);
        out.emplace_back("drug_fc2.weight", drug_fc2.weight);
        out.emplace_back("drug_fc2.bias", drug_fc2.bias);
        if (config.encoder == ProteinEncoderKind::BiLstm) {
            out.emplace_back("embedding", embedding);
            for (const auto& [prefix, dir] : {std::pair{"lstm_fwd", &lstm_forward}, std::pair{"lstm_bwd", &lstm_backward}}) {
                out.emplace_back(std::string(prefix) + ".w_ih", dir->w_ih);
                out.emplace_back(std::string(prefix) + ".w_hh", dir->w_hh);
                out.emplace_back(std::string(prefix) + ".bias", dir->bias);
            }
        }
        out.emplace_back("head1.weight", head1.weight);
        out.emplace_back("head1.bias", head1.bias);
        out.emplace_back("head2.weight", head2.weight);
        out.emplace_back("head2.bias", head2.bias);
        out.emplace_back("output.weight", output.weight);
        out.emplace_back("output.bias", output.bias);
        return out;
    }

    std::vector<ad::Value<T>> trainable() const {
        std::vector<ad::Value<T>> v;
        for (auto& [name, value] : named()) v.push_back(value);
        return v;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (auto& [name, value] : named()) n += value.data().size();
        return n;
    }

    /// Copies every tensor into fresh leaves of scalar type U.
    template <class U>
    ModelParameters<U> cast() const;
};

namespace detail {

template <class T>
ad::Value<T> zeros(std::size_t r, std::size_t c) {
    return ad::Value<T>::leaf(Tensor<T>(r, c));
}

template <class T>
Dense<T> dense(std::size_t in, std::size_t out) {
    return {zeros<T>(in, out), zeros<T>(1, out)};
}

}  // namespace detail

/// Zero-filled parameters with the shapes implied by `config`.
template <class T>
ModelParameters<T> allocate_params(const ModelConfig& config) {
    if (!config.blocks.any()) throw std::invalid_argument("block mask must enable at least one block");
    using namespace widths;
    ModelParameters<T> p;
    p.config = config;
    for (std::size_t b = 0; b < 3; ++b) {
        if (!config.blocks[b]) continue;
        const auto& w = block(b);
        for (std::size_t l = 0; l + 1 < w.size(); ++l) p.gcn[b].push_back(detail::dense<T>(w[l], w[l + 1]));
    }
    p.drug_fc1 = detail::dense<T>(graph_width(config.blocks), kDrugHidden);
    p.drug_fc2 = detail::dense<T>(kDrugHidden, kDrugOut);
    std::size_t joint = kDrugOut;
    if (config.encoder == ProteinEncoderKind::BiLstm) {
        p.embedding = detail::zeros<T>(kResidueVocabulary, kEmbedding);
        for (auto* dir : {&p.lstm_forward, &p.lstm_backward}) {
            dir->w_ih = detail::zeros<T>(kEmbedding, 4 * kLstmHidden);
            dir->w_hh = detail::zeros<T>(kLstmHidden, 4 * kLstmHidden);
            dir->bias = detail::zeros<T>(1, 4 * kLstmHidden);
        }
        joint += kProteinOut;
    }
    p.head1 = detail::dense<T>(joint, kHead1);
    p.head2 = detail::dense<T>(kHead1, kHead2);
    p.output = detail::dense<T>(kHead2, 1);
    return p;
}

template <class T>
template <class U>
ModelParameters<U> ModelParameters<T>::cast() const {
    ModelParameters<U> out = allocate_params<U>(config);
    const auto src = named();
    auto dst = out.named();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i].second.mutable_data() = src[i].second.data().template cast<U>();
    return out;
}

/// Glorot-uniform weights, zero biases, LSTM forget-gate bias 1, embedding
/// uniform in [-0.05, 0.05]. Values are drawn in `named()` order from one
/// stream seeded by `seed`.
template <class T>
ModelParameters<T> init_params(std::uint64_t seed, const ModelConfig& config) {
    ModelParameters<T> p = allocate_params<T>(config);
    Rng rng(seed);
    for (auto& [name, value] : p.named()) {
        auto& w = value.mutable_data();
        const bool is_bias = name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0;
        if (name == "embedding") {
            for (auto& x : w.flat()) x = static_cast<T>(rng.uniform(-0.05, 0.05));
        } else if (is_bias) {
            if (name.rfind("lstm_", 0) == 0)
                for (std::size_t j = widths::kLstmHidden; j < 2 * widths::kLstmHidden; ++j) w[j] = T{1};
        } else {
            const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
            for (auto& x : w.flat()) x = static_cast<T>(rng.uniform(-limit, limit));
        }
    }
    return p;
}

/// relu(adj * h * weight + bias).
template <class T>
ad::Value<T> gcn_layer(const ad::Value<T>& h, const Tensor<T>& adj, const Dense<T>& layer) {
    return ad::relu(layer(ad::graph_propagate(adj, h)));
}

/// relu(adj * h * weight), bias-free form.
template <class T>
ad::Value<T> gcn_layer(const ad::Value<T>& h, const Tensor<T>& adj, const ad::Value<T>& weight) {
    return ad::relu(ad::matmul(ad::graph_propagate(adj, h), weight));
}

/// Concatenated block outputs (N x width), max-pooled over atoms to 1 x width.
template <class T>
ad::Value<T> drug_graph_features(const ModelParameters<T>& p, const GraphInputs<T>& in) {
    const auto x = ad::Value<T>::constant(in.features);
    std::vector<ad::Value<T>> blocks;
    for (std::size_t b = 0; b < 3; ++b) {
        if (!p.config.blocks[b]) continue;
        ad::Value<T> h = x;
        for (const auto& layer : p.gcn[b]) h = gcn_layer(h, in.adjacency[b].values, layer);
        blocks.push_back(h);
    }
    return ad::row_max_pool(blocks.size() == 1 ? blocks[0] : ad::concat(blocks, 1));
}

/// Dense projection of pooled graph features (B x width) to B x 128.
template <class T>
ad::Value<T> drug_projection(const ModelParameters<T>& p, const ad::Value<T>& pooled, Mode mode, Rng& rng) {
    const bool train = mode == Mode::Train;
    auto x = ad::dropout(ad::relu(p.drug_fc1(pooled)), p.config.dropout, rng, train);
    return ad::dropout(p.drug_fc2(x), p.config.dropout, rng, train);
}

template <class T>
ad::Value<T> drug_encoder(const ModelParameters<T>& p, const GraphInputs<T>& in, Mode mode, Rng& rng) {
    return drug_projection(p, drug_graph_features(p, in), mode, rng);
}

inline ad::TokenBatch make_token_batch(const std::vector<const TokenSequence*>& seqs) {
    ad::TokenBatch b;
    b.count = seqs.size();
    b.length = seqs.empty() ? 0 : seqs[0]->length();
    b.tokens.reserve(b.count * b.length);
    for (const auto* s : seqs) {
        if (s->length() != b.length) throw ShapeMismatch("token sequences in one batch must share a length");
        b.tokens.insert(b.tokens.end(), s->tokens.begin(), s->tokens.end());
    }
    return b;
}

/// Concatenated final forward and backward LSTM states, one 128-wide row per sequence.
template <class T>
ad::Value<T> protein_encoder(const ModelParameters<T>& p, const ad::TokenBatch& batch, bool reference = false) {
    if (p.config.encoder != ProteinEncoderKind::BiLstm) throw std::logic_error("model has no protein encoder");
    auto run = [&](const LstmDirection<T>& dir, bool reverse) {
        auto proj = ad::add_row(ad::matmul(p.embedding, dir.w_ih), dir.bias);
        return reference ? ad::lstm_final_state_reference(proj, dir.w_hh, batch, reverse)
                         : ad::lstm_final_state(proj, dir.w_hh, batch, reverse);
    };
    return ad::concat<T>({run(p.lstm_forward, false), run(p.lstm_backward, true)}, 1);
}

template <class T>
ad::Value<T> protein_encoder(const ModelParameters<T>& p, const TokenSequence& seq) {
    return protein_encoder(p, make_token_batch({&seq}));
}

/// Joint head: [drug | protein] -> 1024 -> 512 -> 1. `protein` may be invalid
/// when the model has no protein encoder.
template <class T>
ad::Value<T> affinity_head(const ModelParameters<T>& p, const ad::Value<T>& drug, const ad::Value<T>& protein,
                           Mode mode, Rng& rng) {
    const bool train = mode == Mode::Train;
    auto x = protein.valid() ? ad::concat<T>({drug, protein}, 1) : drug;
    x = ad::dropout(ad::relu(p.head1(x)), p.config.dropout, rng, train);
    x = ad::dropout(ad::relu(p.head2(x)), p.config.dropout, rng, train);
    return p.output(x);
}

/// Predictions (B x 1) for aligned drug/protein pointers. Each distinct drug
/// graph and protein sequence (by address) is encoded once and its rows are
/// shared; dropout masks remain per pair.
template <class T>
ad::Value<T> predict_batch(const ModelParameters<T>& p, const std::vector<const GraphInputs<T>*>& drugs,
                           const std::vector<const TokenSequence*>& proteins, Mode mode, Rng& rng) {
    const bool with_protein = p.config.encoder == ProteinEncoderKind::BiLstm;
    if (with_protein && drugs.size() != proteins.size()) throw ShapeMismatch("drug and protein batch sizes differ");
    if (drugs.empty()) throw ShapeMismatch("empty prediction batch");

    auto dedup = [](const auto& items, auto& unique, std::vector<std::int32_t>& index) {
        std::map<const void*, std::int32_t> seen;
        for (const auto* item : items) {
            auto [it, fresh] = seen.emplace(item, static_cast<std::int32_t>(unique.size()));
            if (fresh) unique.push_back(item);
            index.push_back(it->second);
        }
    };

    std::vector<const GraphInputs<T>*> unique_drugs;
    std::vector<std::int32_t> drug_index;
    dedup(drugs, unique_drugs, drug_index);
    std::vector<ad::Value<T>> pooled;
    for (const auto* d : unique_drugs) pooled.push_back(drug_graph_features(p, *d));
    auto pooled_all = pooled.size() == 1 ? pooled[0] : ad::concat(pooled, 0);

    ad::Value<T> drug_rows;
    if (mode == Mode::Eval) {
        drug_rows = ad::gather_rows(drug_projection(p, pooled_all, mode, rng), drug_index);
    } else {
        drug_rows = drug_projection(p, ad::gather_rows(pooled_all, drug_index), mode, rng);
    }

    ad::Value<T> protein_rows;
    if (with_protein) {
        std::vector<const TokenSequence*> unique_proteins;
        std::vector<std::int32_t> protein_index;
        dedup(proteins, unique_proteins, protein_index);
        protein_rows = ad::gather_rows(protein_encoder(p, make_token_batch(unique_proteins)), protein_index);
    }
    return affinity_head(p, drug_rows, protein_rows, mode, rng);
}

template <class T>
T predict(const ModelParameters<T>& p, const GraphInputs<T>& drug, const TokenSequence& protein, Mode mode, Rng& rng) {
    return predict_batch<T>(p, {&drug}, {&protein}, mode, rng).item();
}

template <class T>
T predict(const ModelParameters<T>& p, const GraphInputs<T>& drug, const TokenSequence& protein) {
    Rng unused(0);
    return predict(p, drug, protein, Mode::Eval, unused);
}

}  // namespace deepglstm
