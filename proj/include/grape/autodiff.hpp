// Reverse-mode differentiation over dense matrices. A Tape records every op
// of one forward pass; backward() replays them in reverse.
#pragma once

#include <grape/tensor.hpp>

#include <functional>
#include <vector>

namespace grape {

class Tape {
public:
    struct Var {
        std::size_t id = 0;
    };

    /// Leaf without a gradient. The value is copied.
    Var constant(Mat value);
    /// Leaf referring to an external matrix that must outlive the tape.
    /// When `grad_sink` is non-null, backward() adds this leaf's gradient to it.
    Var parameter(const Mat& value, Mat* grad_sink);

    const Mat& value(Var v) const;
    /// Gradient after backward(); empty matrix if the node was not reached.
    const Mat& grad(Var v) const { return m_nodes[v.id].grad; }

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    /// a + broadcast of the 1 x c row vector r.
    Var add_row(Var a, Var r);
    Var relu(Var a);
    Var tanh(Var a);
    Var concat_cols(const std::vector<Var>& parts);
    Var gather_rows(Var a, const std::vector<std::size_t>& rows);
    /// Row i of a multiplied by s(i, 0).
    Var scale_rows(Var a, Var s);
    /// 1 x c column maxima; the gradient goes to the first maximal row.
    Var col_max(Var a);
    Var col_mean(Var a);
    /// Elementwise product with a constant mask (inverted dropout).
    Var mask(Var a, const Mat& m);
    /// 1 x 1 cross-entropy of a 1 x C logit row against `label`.
    Var softmax_cross_entropy(Var logits, std::size_t label);

    /// Seeds d(root)/d(root) = seed (root must be 1 x 1) and propagates.
    void backward(Var root, double seed = 1.0);

    std::size_t size() const { return m_nodes.size(); }

private:
    struct Node {
        Mat own;
        const Mat* ref = nullptr;
        Mat grad;
        Mat* sink = nullptr;
        bool needs_grad = false;
        std::function<void(Tape&, std::size_t)> back;
    };

    const Mat& val(std::size_t id) const { return m_nodes[id].ref ? *m_nodes[id].ref : m_nodes[id].own; }
    Mat& grad_slot(std::size_t id);
    bool needs(std::size_t id) const { return m_nodes[id].needs_grad; }
    Var push(const char* op, Mat value, bool needs_grad, std::function<void(Tape&, std::size_t)> back);

    std::vector<Node> m_nodes;
};

/// Numerically stable softmax of each row.
template <class T>
Matrix<T> softmax_rows(const Matrix<T>& logits)
{
    Matrix<T> out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const T* r = logits.row(i);
        T top = r[0];
        for (std::size_t j = 1; j < logits.cols(); ++j)
            top = std::max(top, r[j]);
        T total = 0;
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            out(i, j) = std::exp(r[j] - top);
            total += out(i, j);
        }
        for (std::size_t j = 0; j < logits.cols(); ++j)
            out(i, j) /= total;
    }
    return out;
}

} // namespace grape
