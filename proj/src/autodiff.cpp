#include <grape/autodiff.hpp>

#include <cmath>
#include <limits>

namespace grape {

Tape::Var Tape::constant(Mat value)
{
    Node n;
    n.own = std::move(value);
    m_nodes.push_back(std::move(n));
    return { m_nodes.size() - 1 };
}

Tape::Var Tape::parameter(const Mat& value, Mat* grad_sink)
{
    Node n;
    n.ref = &value;
    n.sink = grad_sink;
    n.needs_grad = grad_sink != nullptr;
    m_nodes.push_back(std::move(n));
    return { m_nodes.size() - 1 };
}

const Mat& Tape::value(Var v) const
{
    return val(v.id);
}

Mat& Tape::grad_slot(std::size_t id)
{
    Node& n = m_nodes[id];
    if (n.grad.empty()) {
        const Mat& v = val(id);
        n.grad = Mat(v.rows(), v.cols());
    }
    return n.grad;
}

Tape::Var Tape::push(const char* op, Mat value, bool needs_grad, std::function<void(Tape&, std::size_t)> back)
{
    if (!all_finite(value))
        throw NumericError(std::string(op) + ": non-finite value in output");
    Node n;
    n.own = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad)
        n.back = std::move(back);
    m_nodes.push_back(std::move(n));
    return { m_nodes.size() - 1 };
}

Tape::Var Tape::matmul(Var a, Var b)
{
    const Mat& av = val(a.id);
    const Mat& bv = val(b.id);
    require_shape(av.cols() == bv.rows(), "matmul", av, bv);
    Mat out(av.rows(), bv.cols());
    matmul_acc(av, bv, out);
    return push("matmul", std::move(out), needs(a.id) || needs(b.id), [a, b](Tape& t, std::size_t self) {
        const Mat& g = t.m_nodes[self].grad;
        if (t.needs(a.id))
            matmul_nt_acc(g, t.val(b.id), t.grad_slot(a.id));
        if (t.needs(b.id))
            matmul_tn_acc(t.val(a.id), g, t.grad_slot(b.id));
    });
}

Tape::Var Tape::add(Var a, Var b)
{
    const Mat& av = val(a.id);
    const Mat& bv = val(b.id);
    require_shape(av.same_shape(bv), "add", av, bv);
    Mat out = av;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] += bv.data()[i];
    return push("add", std::move(out), needs(a.id) || needs(b.id), [a, b](Tape& t, std::size_t self) {
        const Mat& g = t.m_nodes[self].grad;
        for (Var v : { a, b })
            if (t.needs(v.id)) {
                Mat& s = t.grad_slot(v.id);
                for (std::size_t i = 0; i < g.size(); ++i)
                    s.data()[i] += g.data()[i];
            }
    });
}

Tape::Var Tape::add_row(Var a, Var r)
{
    const Mat& av = val(a.id);
    const Mat& rv = val(r.id);
    require_shape(rv.rows() == 1 && rv.cols() == av.cols(), "add_row", av, rv);
    Mat out = av;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
            out(i, j) += rv(0, j);
    return push("add_row", std::move(out), needs(a.id) || needs(r.id), [a, r](Tape& t, std::size_t self) {
        const Mat& g = t.m_nodes[self].grad;
        if (t.needs(a.id)) {
            Mat& s = t.grad_slot(a.id);
            for (std::size_t i = 0; i < g.size(); ++i)
                s.data()[i] += g.data()[i];
        }
        if (t.needs(r.id)) {
            Mat& s = t.grad_slot(r.id);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j)
                    s(0, j) += g(i, j);
        }
    });
}

Tape::Var Tape::relu(Var a)
{
    Mat out = val(a.id);
    for (double& v : out.values())
        v = v > 0 ? v : 0;
    return push("relu", std::move(out), needs(a.id), [a](Tape& t, std::size_t self) {
        const Mat& g = t.m_nodes[self].grad;
        const Mat& y = t.val(self);
        Mat& s = t.grad_slot(a.id);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (y.data()[i] > 0)
                s.data()[i] += g.data()[i];
    });
}

Tape::Var Tape::tanh(Var a)
{
    Mat out = val(a.id);
    for (double& v : out.values())
        v = std::tanh(v);
    return push("tanh", std::move(out), needs(a.id), [a](Tape& t, std::size_t self) {
        const Mat& g = t.m_nodes[self].grad;
        const Mat& y = t.val(self);
        Mat& s = t.grad_slot(a.id);
        for (std::size_t i = 0; i < g.size(); ++i)
            s.data()[i] += g.data()[i] * (1 - y.data()[i] * y.data()[i]);
    });
}

Tape::Var Tape::concat_cols(const std::vector<Var>& parts)
{
    if (parts.empty())
        throw ContractError("concat_cols: no inputs");
    const std::size_t rows = val(parts[0].id).rows();
    std::size_t cols = 0;
    bool any = false;
    for (Var p : parts) {
        const Mat& pv = val(p.id);
        require_shape(pv.rows() == rows, "concat_cols", val(parts[0].id), pv);
        cols += pv.cols();
        any = any || needs(p.id);
    }
    Mat out(rows, cols);
    std::size_t offset = 0;
    for (Var p : parts) {
        const Mat& pv = val(p.id);
        for (std::size_t i = 0; i < rows; ++i)
            std::copy(pv.row(i), pv.row(i) + pv.cols(), out.row(i) + offset);
        offset += pv.cols();
    }
    return push("concat_cols", std::move(out), any, [parts](Tape& t, std::size_t self) {
        const Mat& g = t.m_nodes[self].grad;
        std::size_t offset = 0;
        for (Var p : parts) {
            const std::size_t c = t.val(p.id).cols();
            if (t.needs(p.id)) {
                Mat& s = t.grad_slot(p.id);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        s(i, j) += g(i, offset + j);
            }
            offset += c;
        }
    });
}

Tape::Var Tape::gather_rows(Var a, const std::vector<std::size_t>& rows)
{
    const Mat& av = val(a.id);
    Mat out(rows.size(), av.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= av.rows())
            throw ContractError("gather_rows: row index out of range");
        std::copy(av.row(rows[i]), av.row(rows[i]) + av.cols(), out.row(i));
    }
    return push("gather_rows", std::move(out), needs(a.id), [a, rows](Tape& t, std::size_t self) {
        const Mat& g = t.m_nodes[self].grad;
        Mat& s = t.grad_slot(a.id);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j)
                s(rows[i], j) += g(i, j);
    });
}

Tape::Var Tape::scale_rows(Var a, Var s)
{
    const Mat& av = val(a.id);
    const Mat& sv = val(s.id);
    require_shape(sv.rows() == av.rows() && sv.cols() == 1, "scale_rows", av, sv);
    Mat out = av;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
            out(i, j) *= sv(i, 0);
    return push("scale_rows", std::move(out), needs(a.id) || needs(s.id), [a, s](Tape& t, std::size_t self) {
        const Mat& g = t.m_nodes[self].grad;
        const Mat& av = t.val(a.id);
        const Mat& sv = t.val(s.id);
        if (t.needs(a.id)) {
            Mat& ga = t.grad_slot(a.id);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j)
                    ga(i, j) += g(i, j) * sv(i, 0);
        }
        if (t.needs(s.id)) {
            Mat& gs = t.grad_slot(s.id);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j)
                    gs(i, 0) += g(i, j) * av(i, j);
        }
    });
}

Tape::Var Tape::col_max(Var a)
{
    const Mat& av = val(a.id);
    if (av.rows() == 0)
        throw ContractError("col_max: empty input");
    Mat out(1, av.cols());
    std::vector<std::size_t> arg(av.cols(), 0);
    for (std::size_t j = 0; j < av.cols(); ++j) {
        out(0, j) = av(0, j);
        for (std::size_t i = 1; i < av.rows(); ++i)
            if (av(i, j) > out(0, j)) {
                out(0, j) = av(i, j);
                arg[j] = i;
            }
    }
    return push("col_max", std::move(out), needs(a.id), [a, arg](Tape& t, std::size_t self) {
        const Mat& g = t.m_nodes[self].grad;
        Mat& s = t.grad_slot(a.id);
        for (std::size_t j = 0; j < g.cols(); ++j)
            s(arg[j], j) += g(0, j);
    });
}

Tape::Var Tape::col_mean(Var a)
{
    const Mat& av = val(a.id);
    if (av.rows() == 0)
        throw ContractError("col_mean: empty input");
    Mat out(1, av.cols());
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j)
            out(0, j) += av(i, j);
    const double inv = 1.0 / static_cast<double>(av.rows());
    for (double& v : out.values())
        v *= inv;
    return push("col_mean", std::move(out), needs(a.id), [a, inv](Tape& t, std::size_t self) {
        const Mat& g = t.m_nodes[self].grad;
        Mat& s = t.grad_slot(a.id);
        for (std::size_t i = 0; i < s.rows(); ++i)
            for (std::size_t j = 0; j < s.cols(); ++j)
                s(i, j) += g(0, j) * inv;
    });
}

Tape::Var Tape::mask(Var a, const Mat& m)
{
    const Mat& av = val(a.id);
    require_shape(av.same_shape(m), "mask", av, m);
    Mat out = av;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] *= m.data()[i];
    return push("mask", std::move(out), needs(a.id), [a, m](Tape& t, std::size_t self) {
        const Mat& g = t.m_nodes[self].grad;
        Mat& s = t.grad_slot(a.id);
        for (std::size_t i = 0; i < g.size(); ++i)
            s.data()[i] += g.data()[i] * m.data()[i];
    });
}

Tape::Var Tape::softmax_cross_entropy(Var logits, std::size_t label)
{
    const Mat& lv = val(logits.id);
    if (lv.rows() != 1 || label >= lv.cols())
        throw ContractError("softmax_cross_entropy: expected a 1xC row and a label below C");
    Mat p = softmax_rows(lv);
    double top = lv(0, 0);
    for (std::size_t j = 1; j < lv.cols(); ++j)
        top = std::max(top, lv(0, j));
    double total = 0;
    for (std::size_t j = 0; j < lv.cols(); ++j)
        total += std::exp(lv(0, j) - top);
    Mat out(1, 1, top + std::log(total) - lv(0, label));
    return push("softmax_cross_entropy", std::move(out), needs(logits.id), [logits, label, p](Tape& t, std::size_t self) {
        const double g = t.m_nodes[self].grad(0, 0);
        Mat& s = t.grad_slot(logits.id);
        for (std::size_t j = 0; j < p.cols(); ++j)
            s(0, j) += g * (p(0, j) - (j == label ? 1.0 : 0.0));
    });
}

void Tape::backward(Var root, double seed)
{
    const Mat& rv = val(root.id);
    if (rv.rows() != 1 || rv.cols() != 1)
        throw ContractError("backward: root must be a scalar");
    if (!needs(root.id))
        return;
    grad_slot(root.id)(0, 0) += seed;
    for (std::size_t i = root.id + 1; i-- > 0;) {
        Node& n = m_nodes[i];
        if (!n.needs_grad || n.grad.empty())
            continue;
        if (n.back)
            n.back(*this, i);
        if (n.sink) {
            if (!all_finite(n.grad))
                throw NumericError("backward: non-finite gradient");
            for (std::size_t k = 0; k < n.grad.size(); ++k)
                n.sink->data()[k] += n.grad.data()[k];
        }
    }
}

} // namespace grape
