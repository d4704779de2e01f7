// Dense row-major matrices and the handful of kernels the network needs.
#pragma once

#include <grape/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace grape {

template <class T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
        : m_rows(rows)
        , m_cols(cols)
        , m_data(rows * cols, fill)
    {
    }

    std::size_t rows() const { return m_rows; }
    std::size_t cols() const { return m_cols; }
    std::size_t size() const { return m_data.size(); }
    bool empty() const { return m_data.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return m_data[r * m_cols + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return m_data[r * m_cols + c]; }
    T* row(std::size_t r) { return m_data.data() + r * m_cols; }
    const T* row(std::size_t r) const { return m_data.data() + r * m_cols; }
    T* data() { return m_data.data(); }
    const T* data() const { return m_data.data(); }
    std::vector<T>& values() { return m_data; }
    const std::vector<T>& values() const { return m_data; }

    void fill(T v) { std::fill(m_data.begin(), m_data.end(), v); }
    bool same_shape(const Matrix& o) const { return m_rows == o.m_rows && m_cols == o.m_cols; }

    template <class U>
    Matrix<U> cast() const
    {
        Matrix<U> out(m_rows, m_cols);
        for (std::size_t i = 0; i < m_data.size(); ++i)
            out.data()[i] = static_cast<U>(m_data[i]);
        return out;
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<T> m_data;
};

using Mat = Matrix<double>;

inline std::string shape_string(std::size_t r, std::size_t c)
{
    return std::to_string(r) + "x" + std::to_string(c);
}

template <class T>
void require_shape(bool ok, const char* op, const Matrix<T>& a, const Matrix<T>& b)
{
    if (!ok)
        throw ContractError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) + " vs "
            + shape_string(b.rows(), b.cols()));
}

/// out += a * b
template <class T>
void matmul_acc(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& out)
{
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        T* o = out.row(i);
        const T* ar = a.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const T av = ar[p];
            if (av == T(0))
                continue;
            const T* br = b.row(p);
            for (std::size_t j = 0; j < m; ++j)
                o[j] += av * br[j];
        }
    }
}

template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b)
{
    require_shape(a.cols() == b.rows(), "matmul", a, b);
    Matrix<T> out(a.rows(), b.cols());
    matmul_acc(a, b, out);
    return out;
}

/// out += a^T * b
template <class T>
void matmul_tn_acc(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& out)
{
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        const T* ar = a.row(i);
        const T* br = b.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const T av = ar[p];
            if (av == T(0))
                continue;
            T* o = out.row(p);
            for (std::size_t j = 0; j < m; ++j)
                o[j] += av * br[j];
        }
    }
}

/// out += a * b^T
template <class T>
void matmul_nt_acc(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& out)
{
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const T* ar = a.row(i);
        T* o = out.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            const T* br = b.row(j);
            T s = 0;
            for (std::size_t p = 0; p < k; ++p)
                s += ar[p] * br[p];
            o[j] += s;
        }
    }
}

template <class T>
Matrix<T> transpose(const Matrix<T>& a)
{
    Matrix<T> out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            out(j, i) = a(i, j);
    return out;
}

template <class T>
bool all_finite(const Matrix<T>& a)
{
    return std::all_of(a.values().begin(), a.values().end(), [](T v) { return std::isfinite(v); });
}

} // namespace grape
