// NE-GCN: normalized-adjacency message passing plus an aggregated edge
// feature term, residual updates, layer concatenation, self-attention
// pooling, max+mean readout and an MLP head.
#pragma once

#include <grape/autodiff.hpp>
#include <grape/embed.hpp>
#include <grape/random.hpp>
#include <grape/tensor.hpp>

#include <cmath>
#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

namespace grape {

struct NegcnConfig {
    std::size_t input_dim = 128;
    std::size_t hidden = 64;
    std::size_t layers = 3;
    std::size_t classes = 2;
    double pool_ratio = 0.5;
    double dropout = 0.5;
    bool edge_features = true; // false: the edge term is dropped (plain residual GCN)
    bool sum_aggregation = false; // sum instead of mean of incident edge features

    bool operator==(const NegcnConfig&) const = default;
};

// ------------------------------------------------------------- graph input

/// Symmetric 0/1 adjacency with a zero diagonal.
Mat adjacency_matrix(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// D^-1/2 (A + I) D^-1/2 of the symmetrized A. Any diagonal of A is ignored.
Mat normalize_adjacency(const Mat& a);

/// Row v: mean (or sum) of the features of edges incident to v, counting
/// both directions; zero for isolated nodes. A self-loop counts once.
Mat aggregate_edge_features(const std::vector<std::pair<std::size_t, std::size_t>>& edges, const Mat& features,
    std::size_t n, bool sum = false);

struct GraphInput {
    Mat x;
    Mat an;
    Mat eagg;
};

GraphInput prepare_input(const EmbeddedGraph& g, const NegcnConfig& config);

// ------------------------------------------------------------------ model

struct Parameter {
    std::string name;
    Mat value;
    Mat grad;
    Mat m; // Adamax first moment
    Mat u; // Adamax infinity norm
};

class ModelState {
public:
    ModelState() = default;
    /// Glorot-uniform weights, zero biases.
    ModelState(const NegcnConfig& config, std::uint64_t seed);
    /// Restores a saved state. Throws ContractError if names or shapes do
    /// not match `config`.
    ModelState(const NegcnConfig& config, std::vector<Parameter> params, std::uint64_t step);

    const NegcnConfig& config() const { return m_config; }
    std::vector<Parameter>& params() { return m_params; }
    const std::vector<Parameter>& params() const { return m_params; }
    /// Throws LookupError for unknown names.
    Parameter& param(const std::string& name);
    const Parameter& param(const std::string& name) const;

    void zero_grad();
    std::uint64_t step() const { return m_step; }
    void set_step(std::uint64_t s) { m_step = s; }

    bool operator==(const ModelState&) const;

private:
    NegcnConfig m_config;
    std::vector<Parameter> m_params;
    std::uint64_t m_step = 0;
};

/// (name, rows, cols) of every parameter in creation order.
std::vector<std::tuple<std::string, std::size_t, std::size_t>> parameter_shapes(const NegcnConfig& config);

// ------------------------------------------------------- plain kernels

/// ReLU(An H Wn + Eagg We + R) with R = H proj when `proj` is given, else H.
/// Pass We = nullptr to drop the edge term.
template <class T>
Matrix<T> negcn_layer(const Matrix<T>& h, const Matrix<T>& an, const Matrix<T>& eagg, const Matrix<T>& wn,
    const Matrix<T>* we, const Matrix<T>* proj)
{
    require_shape(an.rows() == h.rows() && an.cols() == h.rows(), "negcn_layer", an, h);
    require_shape(wn.rows() == h.cols(), "negcn_layer", h, wn);
    Matrix<T> z(h.rows(), wn.cols());
    matmul_acc(an, matmul(h, wn), z);
    if (we) {
        require_shape(eagg.rows() == h.rows() && eagg.cols() == we->rows() && we->cols() == wn.cols(), "negcn_layer",
            eagg, *we);
        matmul_acc(eagg, *we, z);
    }
    if (proj) {
        require_shape(proj->rows() == h.cols() && proj->cols() == wn.cols(), "negcn_layer", h, *proj);
        matmul_acc(h, *proj, z);
    } else {
        require_shape(h.cols() == wn.cols(), "negcn_layer", h, wn);
        for (std::size_t i = 0; i < z.size(); ++i)
            z.data()[i] += h.data()[i];
    }
    for (T& v : z.values())
        v = v > T(0) ? v : T(0);
    return z;
}

/// Indices of the ceil(ratio * n) highest scores, ties to the lower index,
/// returned in ascending index order.
std::vector<std::size_t> select_top(const std::vector<double>& scores, double ratio);

template <class T>
struct PoolResult {
    Matrix<T> h; // kept rows gated by tanh(score)
    Matrix<T> adjacency; // induced subgraph of the input adjacency
    std::vector<std::size_t> kept;
    Matrix<T> score; // N x 1, before selection
};

/// score = An H w + b.
template <class T>
PoolResult<T> sag_pool(const Matrix<T>& h, const Matrix<T>& an, const Matrix<T>& adjacency, double ratio,
    const Matrix<T>& w, T b)
{
    if (!(ratio > 0 && ratio <= 1))
        throw ContractError("sag_pool: ratio must lie in (0, 1]");
    PoolResult<T> out;
    out.score = matmul(an, matmul(h, w));
    std::vector<double> s(h.rows());
    for (std::size_t i = 0; i < h.rows(); ++i) {
        out.score(i, 0) += b;
        s[i] = static_cast<double>(out.score(i, 0));
    }
    out.kept = select_top(s, ratio);
    out.h = Matrix<T>(out.kept.size(), h.cols());
    out.adjacency = Matrix<T>(out.kept.size(), out.kept.size());
    for (std::size_t i = 0; i < out.kept.size(); ++i) {
        const T gate = std::tanh(out.score(out.kept[i], 0));
        for (std::size_t j = 0; j < h.cols(); ++j)
            out.h(i, j) = h(out.kept[i], j) * gate;
        for (std::size_t j = 0; j < out.kept.size(); ++j)
            out.adjacency(i, j) = adjacency(out.kept[i], out.kept[j]);
    }
    return out;
}

// ---------------------------------------------------------------- forward

enum class Mode { Train, Eval };

struct TapeOutput {
    Tape::Var logits;
    Tape::Var hidden; // MLP hidden activation before dropout
    Tape::Var readout;
};

/// Records the forward pass on `tape`. Parameter gradients flow into
/// Parameter::grad when `track_grads` is set. `rng` is required in train
/// mode when dropout > 0. Throws DegenerateSampleError for empty graphs.
TapeOutput forward(Tape& tape, ModelState& model, const GraphInput& input, Mode mode, Rng* rng, bool track_grads);

template <class T>
struct PlainOutput {
    Matrix<T> logits; // 1 x C
    Matrix<T> hidden; // 1 x 3h
    Matrix<T> readout; // 1 x 6h
};

/// Eval-mode forward without a tape, in double or float.
template <class T>
class InferenceModel {
public:
    explicit InferenceModel(const ModelState& model);
    PlainOutput<T> forward(const GraphInput& input) const;

private:
    const Matrix<T>& p(const std::string& name) const;
    NegcnConfig m_config;
    std::vector<std::pair<std::string, Matrix<T>>> m_params;
};

extern template class InferenceModel<double>;
extern template class InferenceModel<float>;

// ------------------------------------------------------------ training

struct Example {
    const GraphInput* input;
    std::size_t label;
};

/// Mean cross-entropy over the batch plus (weight_decay / 2) * sum ||W||^2.
/// Overwrites Parameter::grad with the gradient of that total.
double loss_and_grads(ModelState& model, const std::vector<Example>& batch, double weight_decay, Mode mode, Rng* rng);

struct AdamaxConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One Adamax update from the gradients stored in the model.
void adamax_step(ModelState& model, double lr, const AdamaxConfig& opt = {});

/// lr * gamma^epoch, epoch counted from 0.
inline double decayed_lr(double lr, double gamma, int epoch)
{
    return lr * std::pow(gamma, epoch);
}

// ------------------------------------------------------------- checkpoint

struct Checkpoint {
    ModelState model;
    VocabEmbedding vocab;
    EmbedConfig embed;
    std::string task;
    std::vector<std::string> class_names;
    std::uint64_t seed = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws ValidationError for foreign or truncated files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace grape
