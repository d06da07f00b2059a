#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace deepglstm {

struct Shape {
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const { return rows * cols; }
    std::string str() const { return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]"; }
    bool operator==(const Shape&) const = default;
};

/// Dense row-major matrix. Vectors are 1xN.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, T fill = T{}) : shape_{rows, cols}, data_(rows * cols, fill) {}
    Tensor(std::size_t rows, std::size_t cols, std::vector<T> data) : shape_{rows, cols}, data_(std::move(data)) {
        if (data_.size() != shape_.size())
            throw ShapeMismatch("tensor data has " + std::to_string(data_.size()) + " values for shape " + shape_.str());
    }
    explicit Tensor(Shape s, T fill = T{}) : Tensor(s.rows, s.cols, fill) {}

    static Tensor from_rows(std::initializer_list<std::initializer_list<T>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<T> v;
        v.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw ShapeMismatch("ragged initializer");
            v.insert(v.end(), row.begin(), row.end());
        }
        return Tensor(r, c, std::move(v));
    }

    static Tensor row_vector(std::vector<T> v) {
        const std::size_t n = v.size();
        return Tensor(1, n, std::move(v));
    }

    static Tensor identity(std::size_t n) {
        Tensor t(n, n);
        for (std::size_t i = 0; i < n; ++i) t(i, i) = T{1};
        return t;
    }

    std::size_t rows() const { return shape_.rows; }
    std::size_t cols() const { return shape_.cols; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    const Shape& shape() const { return shape_; }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> flat() { return data_; }
    std::span<const T> flat() const { return data_; }
    std::span<T> row(std::size_t r) { return {data_.data() + r * shape_.cols, shape_.cols}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * shape_.cols, shape_.cols}; }
    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    const std::vector<T>& values() const { return data_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    template <class U>
    Tensor<U> cast() const {
        std::vector<U> v(data_.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<U>(data_[i]);
        return Tensor<U>(shape_.rows, shape_.cols, std::move(v));
    }

    Tensor transposed() const {
        Tensor t(shape_.cols, shape_.rows);
        for (std::size_t r = 0; r < shape_.rows; ++r)
            for (std::size_t c = 0; c < shape_.cols; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

namespace kernels {

// Every output element is summed over the inner index in ascending order,
// independent of how many rows are processed. Row results therefore do not
// depend on batch composition.

/// C (+)= A * B. A: m x k, B: k x n, C: m x n.
template <class T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, T{});
    for (std::size_t i = 0; i < m; ++i) {
        T* ci = c + i * n;
        const T* ai = a + i * k;
        std::size_t p = 0;
        // Four inner indices per pass; each element still adds them in order.
        for (; p + 4 <= k; p += 4) {
            const T a0 = ai[p], a1 = ai[p + 1], a2 = ai[p + 2], a3 = ai[p + 3];
            if (a0 == T{} && a1 == T{} && a2 == T{} && a3 == T{}) continue;
            const T* b0 = b + p * n;
            const T* b1 = b0 + n;
            const T* b2 = b1 + n;
            const T* b3 = b2 + n;
            for (std::size_t j = 0; j < n; ++j) ci[j] = (((ci[j] + a0 * b0[j]) + a1 * b1[j]) + a2 * b2[j]) + a3 * b3[j];
        }
        for (; p < k; ++p) {
            const T av = ai[p];
            if (av == T{}) continue;
            const T* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

/// C += A^T * B. A: k x m, B: k x n, C: m x n.
template <class T>
void matmul_tn_acc(const T* a, const T* b, T* c, std::size_t k, std::size_t m, std::size_t n) {
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
        const T* a0 = a + p * m;
        const T* b0 = b + p * n;
        const T* b1 = b0 + n;
        const T* b2 = b1 + n;
        const T* b3 = b2 + n;
        for (std::size_t i = 0; i < m; ++i) {
            const T x0 = a0[i], x1 = a0[m + i], x2 = a0[2 * m + i], x3 = a0[3 * m + i];
            if (x0 == T{} && x1 == T{} && x2 == T{} && x3 == T{}) continue;
            T* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] = (((ci[j] + x0 * b0[j]) + x1 * b1[j]) + x2 * b2[j]) + x3 * b3[j];
        }
    }
    for (; p < k; ++p) {
        const T* ap = a + p * m;
        const T* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T av = ap[i];
            if (av == T{}) continue;
            T* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

/// C += A * B^T using a transposed copy of B. A: m x k, B: n x k, C: m x n.
template <class T>
void matmul_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, std::vector<T>& scratch) {
    scratch.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p) scratch[p * n + j] = b[j * k + p];
    matmul(a, scratch.data(), c, m, k, n, true);
}

}  // namespace kernels

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.cols() != b.rows()) throw ShapeMismatch("matmul " + a.shape().str() + " x " + b.shape().str());
    Tensor<T> c(a.rows(), b.cols());
    kernels::matmul(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols(), false);
    return c;
}

}  // namespace deepglstm
