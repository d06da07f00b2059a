#pragma once

// LSTM recurrence over token sequences.
//
// The per-token input contribution x_t * W_ih + b only depends on the token, so
// callers pass a precomputed table `input_proj` = embedding * W_ih + b with one
// row per vocabulary entry. Row selection of that table equals projecting the
// selected embedding row, so this is the same function as embed-then-project.
//
// Gate column layout in all 4h-wide tensors: [input | forget | cell | output].

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "autodiff.hpp"

namespace deepglstm::ad {

/// P sequences of equal length, row-major P x T.
struct TokenBatch {
    std::size_t count = 0;
    std::size_t length = 0;
    std::vector<std::int32_t> tokens;

    std::int32_t at(std::size_t seq, std::size_t t) const { return tokens[seq * length + t]; }
};

namespace detail {

template <class T>
struct LstmTape {
    std::size_t count = 0, length = 0, hidden = 0;
    bool reverse = false;
    std::vector<T> gates;   // [step][row][4h], activated
    std::vector<T> cells;   // [step][row][h]
    std::vector<T> hiddens; // [step][row][h]
};

template <class T>
inline T fast_tanh(T x) {
    return std::tanh(x);
}

// Gradients decaying through long sequences reach the subnormal range, where
// arithmetic is two orders of magnitude slower. Values below sqrt(min normal)
// are dropped so that products of two surviving values stay normal.
template <class T>
inline T flush(T x) {
    static const T floor = std::sqrt(std::numeric_limits<T>::min());
    return std::abs(x) < floor ? T{} : x;
}

}  // namespace detail

/// Final hidden state (P x h) of an LSTM run over every sequence in `batch`,
/// left-to-right, or right-to-left when `reverse` is set (the final state is
/// then the one after reading token 0). Zero initial hidden and cell state.
template <class T>
Value<T> lstm_final_state(const Value<T>& input_proj, const Value<T>& w_hh, const TokenBatch& batch, bool reverse) {
    const std::size_t h = w_hh.shape().rows;
    if (w_hh.shape().cols != 4 * h || input_proj.shape().cols != 4 * h)
        throw ShapeMismatch("lstm: input_proj " + input_proj.shape().str() + " / w_hh " + w_hh.shape().str());
    const std::size_t P = batch.count, L = batch.length, G = 4 * h;
    if (batch.tokens.size() != P * L) throw ShapeMismatch("lstm: token batch size mismatch");
    for (auto tok : batch.tokens)
        if (tok < 0 || static_cast<std::size_t>(tok) >= input_proj.shape().rows)
            throw IndexOutOfRange("lstm: token " + std::to_string(tok) + " outside vocabulary");

    auto tape = std::make_shared<detail::LstmTape<T>>();
    tape->count = P;
    tape->length = L;
    tape->hidden = h;
    tape->reverse = reverse;
    tape->gates.resize(L * P * G);
    tape->cells.resize(L * P * h);
    tape->hiddens.resize(L * P * h);

    const T* proj = input_proj.data().data();
    const T* whh = w_hh.data().data();
    std::vector<T> h_prev(P * h, T{}), c_prev(P * h, T{});
    std::vector<T> z(P * G);
    for (std::size_t s = 0; s < L; ++s) {
        const std::size_t t = reverse ? L - 1 - s : s;
        for (std::size_t p = 0; p < P; ++p) {
            const T* row = proj + static_cast<std::size_t>(batch.at(p, t)) * G;
            std::copy(row, row + G, z.data() + p * G);
        }
        kernels::matmul(h_prev.data(), whh, z.data(), P, h, G, true);
        T* gs = tape->gates.data() + s * P * G;
        T* cs = tape->cells.data() + s * P * h;
        T* hs = tape->hiddens.data() + s * P * h;
        for (std::size_t p = 0; p < P; ++p) {
            const T* zp = z.data() + p * G;
            T* gp = gs + p * G;
            for (std::size_t j = 0; j < G; ++j) {
                const bool cell_gate = j >= 2 * h && j < 3 * h;
                gp[j] = cell_gate ? detail::fast_tanh(zp[j]) : detail::sigmoid(zp[j]);
            }
            for (std::size_t j = 0; j < h; ++j) {
                const T c = gp[h + j] * c_prev[p * h + j] + gp[j] * gp[2 * h + j];
                cs[p * h + j] = c;
                hs[p * h + j] = gp[3 * h + j] * detail::fast_tanh(c);
            }
        }
        std::copy(cs, cs + P * h, c_prev.begin());
        std::copy(hs, hs + P * h, h_prev.begin());
    }

    Tensor<T> out(P, h, std::vector<T>(h_prev));
    return detail::make<T>(std::move(out), "lstm_final_state", {input_proj, w_hh},
                           [tape, batch](Node<T>& self) {
        auto& pproj = *self.parents[0];
        auto& pw = *self.parents[1];
        const std::size_t P = tape->count, L = tape->length, h = tape->hidden, G = 4 * h;
        std::vector<T> dh(self.grad.data(), self.grad.data() + P * h);
        std::vector<T> dc(P * h, T{}), dz(P * G), dh_prev(P * h);
        const Tensor<T> whh_t = pw.data.transposed();
        T* dproj = pproj.requires_grad ? pproj.grad_buffer().data() : nullptr;
        T* dw = pw.requires_grad ? pw.grad_buffer().data() : nullptr;
        for (std::size_t s = L; s-- > 0;) {
            const std::size_t t = tape->reverse ? L - 1 - s : s;
            const T* gs = tape->gates.data() + s * P * G;
            const T* cs = tape->cells.data() + s * P * h;
            const T* c_before = s > 0 ? tape->cells.data() + (s - 1) * P * h : nullptr;
            for (std::size_t p = 0; p < P; ++p) {
                const T* gp = gs + p * G;
                T* dzp = dz.data() + p * G;
                for (std::size_t j = 0; j < h; ++j) {
                    const std::size_t k = p * h + j;
                    const T ig = gp[j], fg = gp[h + j], cg = gp[2 * h + j], og = gp[3 * h + j];
                    const T tc = detail::fast_tanh(cs[k]);
                    const T dcell = dc[k] + dh[k] * og * (T{1} - tc * tc);
                    const T cprev = c_before ? c_before[k] : T{};
                    dzp[j] = detail::flush(dcell * cg * ig * (T{1} - ig));
                    dzp[h + j] = detail::flush(dcell * cprev * fg * (T{1} - fg));
                    dzp[2 * h + j] = detail::flush(dcell * ig * (T{1} - cg * cg));
                    dzp[3 * h + j] = detail::flush(dh[k] * tc * og * (T{1} - og));
                    dc[k] = detail::flush(dcell * fg);
                }
            }
            if (dproj)
                for (std::size_t p = 0; p < P; ++p) {
                    T* dst = dproj + static_cast<std::size_t>(batch.at(p, t)) * G;
                    const T* src = dz.data() + p * G;
                    for (std::size_t j = 0; j < G; ++j) dst[j] += src[j];
                }
            if (s == 0) break;
            const T* h_before = tape->hiddens.data() + (s - 1) * P * h;
            if (dw) kernels::matmul_tn_acc(h_before, dz.data(), dw, P, h, G);
            kernels::matmul(dz.data(), whh_t.data(), dh_prev.data(), P, G, h, false);
            for (auto& v : dh_prev) v = detail::flush(v);
            dh.swap(dh_prev);
        }
    });
}

/// The same recurrence composed from primitive ops, one node per gate per
/// step. Slow; exists as an independent route for checking the fused op.
template <class T>
Value<T> lstm_final_state_reference(const Value<T>& input_proj, const Value<T>& w_hh, const TokenBatch& batch,
                                    bool reverse) {
    const std::size_t h = w_hh.shape().rows;
    const std::size_t P = batch.count, L = batch.length;
    Value<T> hs = Value<T>::constant(Tensor<T>(P, h));
    Value<T> cs = Value<T>::constant(Tensor<T>(P, h));
    std::vector<std::int32_t> column(P);
    for (std::size_t s = 0; s < L; ++s) {
        const std::size_t t = reverse ? L - 1 - s : s;
        for (std::size_t p = 0; p < P; ++p) column[p] = batch.at(p, t);
        Value<T> z = add(embedding_lookup(input_proj, column), matmul(hs, w_hh));
        Value<T> ig = sigmoid(slice_cols(z, 0, h));
        Value<T> fg = sigmoid(slice_cols(z, h, 2 * h));
        Value<T> cg = tanh(slice_cols(z, 2 * h, 3 * h));
        Value<T> og = sigmoid(slice_cols(z, 3 * h, 4 * h));
        cs = add(mul(fg, cs), mul(ig, cg));
        hs = mul(og, tanh(cs));
    }
    return hs;
}

}  // namespace deepglstm::ad
