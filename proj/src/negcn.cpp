#include <grape/errors.hpp>
#include <grape/io.hpp>
#include <grape/negcn.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace grape {

// ------------------------------------------------------------- graph input

Mat adjacency_matrix(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges)
{
    Mat a(n, n);
    for (const auto& [s, d] : edges) {
        if (s >= n || d >= n)
            throw ContractError("adjacency_matrix: edge endpoint out of range");
        if (s != d) {
            a(s, d) = 1;
            a(d, s) = 1;
        }
    }
    return a;
}

Mat normalize_adjacency(const Mat& a)
{
    if (a.rows() != a.cols())
        throw ContractError("normalize_adjacency: matrix is not square");
    const std::size_t n = a.rows();
    Mat hat(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            hat(i, j) = i == j ? 1.0 : ((a(i, j) != 0 || a(j, i) != 0) ? 1.0 : 0.0);
    std::vector<double> degree(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            degree[i] += hat(i, j);
    // 1/sqrt(d_i d_j) rather than a product of two roots keeps the
    // small hand-checkable cases exact
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (hat(i, j) != 0)
                hat(i, j) = 1.0 / std::sqrt(degree[i] * degree[j]);
    return hat;
}

Mat aggregate_edge_features(const std::vector<std::pair<std::size_t, std::size_t>>& edges, const Mat& features,
    std::size_t n, bool sum)
{
    if (features.rows() != edges.size())
        throw ContractError("aggregate_edge_features: " + std::to_string(edges.size()) + " edges but "
            + std::to_string(features.rows()) + " feature rows");
    Mat out(n, features.cols());
    std::vector<double> count(n, 0.0);
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const auto [s, d] = edges[k];
        if (s >= n || d >= n)
            throw ContractError("aggregate_edge_features: edge endpoint out of range");
        for (std::size_t v : { s, d }) {
            for (std::size_t j = 0; j < features.cols(); ++j)
                out(v, j) += features(k, j);
            count[v] += 1;
            if (s == d)
                break;
        }
    }
    if (!sum)
        for (std::size_t v = 0; v < n; ++v)
            if (count[v] > 0)
                for (std::size_t j = 0; j < out.cols(); ++j)
                    out(v, j) /= count[v];
    return out;
}

GraphInput prepare_input(const EmbeddedGraph& g, const NegcnConfig& config)
{
    const std::size_t n = g.x.rows();
    if (n == 0)
        throw DegenerateSampleError("graph has no nodes");
    if (g.x.cols() != config.input_dim)
        throw ContractError("prepare_input: feature width " + std::to_string(g.x.cols()) + " but the model expects "
            + std::to_string(config.input_dim));
    GraphInput in;
    in.x = g.x;
    in.an = normalize_adjacency(adjacency_matrix(n, g.edges));
    in.eagg = aggregate_edge_features(g.edges, g.e.rows() ? g.e : Mat(0, 6), n, config.sum_aggregation);
    return in;
}

// ------------------------------------------------------------------ model

std::vector<std::tuple<std::string, std::size_t, std::size_t>> parameter_shapes(const NegcnConfig& c)
{
    if (c.layers == 0 || c.hidden == 0 || c.input_dim == 0 || c.classes < 2)
        throw ContractError("model needs at least one layer, positive widths and two classes");
    std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
    for (std::size_t l = 1; l <= c.layers; ++l) {
        const std::string p = "layer" + std::to_string(l);
        out.emplace_back(p + ".wn", l == 1 ? c.input_dim : c.hidden, c.hidden);
        out.emplace_back(p + ".we", 6, c.hidden);
        if (l == 1)
            out.emplace_back(p + ".proj", c.input_dim, c.hidden);
    }
    const std::size_t cat = c.layers * c.hidden;
    out.emplace_back("pool.w", cat, 1);
    out.emplace_back("pool.b", 1, 1);
    out.emplace_back("mlp.w1", 2 * cat, cat);
    out.emplace_back("mlp.b1", 1, cat);
    out.emplace_back("mlp.w2", cat, c.classes);
    out.emplace_back("mlp.b2", 1, c.classes);
    return out;
}

ModelState::ModelState(const NegcnConfig& config, std::uint64_t seed)
    : m_config(config)
{
    Rng rng(seed);
    for (const auto& [name, rows, cols] : parameter_shapes(config)) {
        Parameter p { name, Mat(rows, cols), Mat(rows, cols), Mat(rows, cols), Mat(rows, cols) };
        const bool bias = rows == 1 || name == "pool.b";
        if (!bias) {
            const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
            for (double& v : p.value.values())
                v = (2 * uniform01(rng) - 1) * limit;
        }
        m_params.push_back(std::move(p));
    }
}

ModelState::ModelState(const NegcnConfig& config, std::vector<Parameter> params, std::uint64_t step)
    : m_config(config)
    , m_params(std::move(params))
    , m_step(step)
{
    const auto shapes = parameter_shapes(config);
    if (shapes.size() != m_params.size())
        throw ContractError("model state has " + std::to_string(m_params.size()) + " parameters, expected "
            + std::to_string(shapes.size()));
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const auto& [name, rows, cols] = shapes[i];
        Parameter& p = m_params[i];
        if (p.name != name || p.value.rows() != rows || p.value.cols() != cols)
            throw ContractError("parameter " + p.name + " does not match the expected " + name + " "
                + shape_string(rows, cols));
        if (p.grad.empty())
            p.grad = Mat(rows, cols);
        if (p.m.empty())
            p.m = Mat(rows, cols);
        if (p.u.empty())
            p.u = Mat(rows, cols);
    }
}

Parameter& ModelState::param(const std::string& name)
{
    for (Parameter& p : m_params)
        if (p.name == name)
            return p;
    throw LookupError("unknown parameter '" + name + "'");
}

const Parameter& ModelState::param(const std::string& name) const
{
    return const_cast<ModelState*>(this)->param(name);
}

void ModelState::zero_grad()
{
    for (Parameter& p : m_params)
        p.grad.fill(0);
}

bool ModelState::operator==(const ModelState& o) const
{
    if (!(m_config == o.m_config) || m_step != o.m_step || m_params.size() != o.m_params.size())
        return false;
    for (std::size_t i = 0; i < m_params.size(); ++i) {
        const Parameter &a = m_params[i], &b = o.m_params[i];
        if (a.name != b.name || a.value != b.value || a.m != b.m || a.u != b.u)
            return false;
    }
    return true;
}

std::vector<std::size_t> select_top(const std::vector<double>& scores, double ratio)
{
    if (!(ratio > 0 && ratio <= 1))
        throw ContractError("select_top: ratio must lie in (0, 1]");
    const std::size_t n = scores.size();
    if (n == 0)
        return {};
    std::size_t k = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-12));
    k = std::clamp<std::size_t>(k, 1, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

// ---------------------------------------------------------------- forward

namespace {

Mat dropout_mask(std::size_t rows, std::size_t cols, double p, Rng& rng)
{
    Mat m(rows, cols);
    const double keep = 1.0 / (1.0 - p);
    for (double& v : m.values())
        v = uniform01(rng) < p ? 0.0 : keep;
    return m;
}

} // namespace

TapeOutput forward(Tape& tape, ModelState& model, const GraphInput& input, Mode mode, Rng* rng, bool track_grads)
{
    const NegcnConfig& c = model.config();
    const std::size_t n = input.x.rows();
    if (n == 0)
        throw DegenerateSampleError("graph has no nodes");
    auto param = [&](const std::string& name) {
        Parameter& p = model.param(name);
        return tape.parameter(p.value, track_grads ? &p.grad : nullptr);
    };

    const Tape::Var an = tape.parameter(input.an, nullptr);
    const Tape::Var eagg = tape.parameter(input.eagg, nullptr);
    Tape::Var h = tape.parameter(input.x, nullptr);
    std::vector<Tape::Var> layers;
    for (std::size_t l = 1; l <= c.layers; ++l) {
        const std::string prefix = "layer" + std::to_string(l);
        Tape::Var z = tape.matmul(an, tape.matmul(h, param(prefix + ".wn")));
        if (c.edge_features)
            z = tape.add(z, tape.matmul(eagg, param(prefix + ".we")));
        const Tape::Var residual = l == 1 ? tape.matmul(h, param(prefix + ".proj")) : h;
        h = tape.relu(tape.add(z, residual));
        layers.push_back(h);
    }
    const Tape::Var hc = tape.concat_cols(layers);

    const Tape::Var score = tape.add_row(tape.matmul(an, tape.matmul(hc, param("pool.w"))), param("pool.b"));
    const Mat& sv = tape.value(score);
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i)
        scores[i] = sv(i, 0);
    const std::vector<std::size_t> kept = select_top(scores, c.pool_ratio);
    const Tape::Var pooled = tape.scale_rows(tape.gather_rows(hc, kept), tape.tanh(tape.gather_rows(score, kept)));

    const Tape::Var readout = tape.concat_cols({ tape.col_max(pooled), tape.col_mean(pooled) });
    const Tape::Var hidden = tape.relu(tape.add_row(tape.matmul(readout, param("mlp.w1")), param("mlp.b1")));
    Tape::Var after = hidden;
    if (mode == Mode::Train && c.dropout > 0) {
        if (!rng)
            throw ContractError("forward: train mode with dropout needs a random engine");
        const Mat& hv = tape.value(hidden);
        after = tape.mask(hidden, dropout_mask(hv.rows(), hv.cols(), c.dropout, *rng));
    }
    const Tape::Var logits = tape.add_row(tape.matmul(after, param("mlp.w2")), param("mlp.b2"));
    return { logits, hidden, readout };
}

template <class T>
InferenceModel<T>::InferenceModel(const ModelState& model)
    : m_config(model.config())
{
    for (const Parameter& p : model.params())
        m_params.emplace_back(p.name, p.value.template cast<T>());
}

template <class T>
const Matrix<T>& InferenceModel<T>::p(const std::string& name) const
{
    for (const auto& [n, m] : m_params)
        if (n == name)
            return m;
    throw LookupError("unknown parameter '" + name + "'");
}

template <class T>
PlainOutput<T> InferenceModel<T>::forward(const GraphInput& input) const
{
    const std::size_t n = input.x.rows();
    if (n == 0)
        throw DegenerateSampleError("graph has no nodes");
    const Matrix<T> an = input.an.template cast<T>();
    const Matrix<T> eagg = input.eagg.template cast<T>();
    Matrix<T> h = input.x.template cast<T>();
    std::vector<Matrix<T>> layers;
    for (std::size_t l = 1; l <= m_config.layers; ++l) {
        const std::string prefix = "layer" + std::to_string(l);
        h = negcn_layer(h, an, eagg, p(prefix + ".wn"), m_config.edge_features ? &p(prefix + ".we") : nullptr,
            l == 1 ? &p(prefix + ".proj") : nullptr);
        layers.push_back(h);
    }
    const std::size_t width = m_config.hidden;
    Matrix<T> hc(n, width * layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l)
        for (std::size_t i = 0; i < n; ++i)
            std::copy(layers[l].row(i), layers[l].row(i) + width, hc.row(i) + l * width);

    const PoolResult<T> pool = sag_pool(hc, an, an, m_config.pool_ratio, p("pool.w"), p("pool.b")(0, 0));

    PlainOutput<T> out;
    const std::size_t cat = hc.cols();
    out.readout = Matrix<T>(1, 2 * cat);
    for (std::size_t j = 0; j < cat; ++j) {
        T top = pool.h(0, j), total = 0;
        for (std::size_t i = 0; i < pool.h.rows(); ++i) {
            top = std::max(top, pool.h(i, j));
            total += pool.h(i, j);
        }
        out.readout(0, j) = top;
        out.readout(0, cat + j) = total / static_cast<T>(pool.h.rows());
    }
    out.hidden = matmul(out.readout, p("mlp.w1"));
    for (std::size_t j = 0; j < out.hidden.cols(); ++j) {
        const T v = out.hidden(0, j) + p("mlp.b1")(0, j);
        out.hidden(0, j) = v > T(0) ? v : T(0);
    }
    out.logits = matmul(out.hidden, p("mlp.w2"));
    for (std::size_t j = 0; j < out.logits.cols(); ++j)
        out.logits(0, j) += p("mlp.b2")(0, j);
    if (!all_finite(out.logits))
        throw NumericError("forward: non-finite logits");
    return out;
}

template class InferenceModel<double>;
template class InferenceModel<float>;

// ------------------------------------------------------------ training

double loss_and_grads(ModelState& model, const std::vector<Example>& batch, double weight_decay, Mode mode, Rng* rng)
{
    if (batch.empty())
        throw ContractError("loss_and_grads: empty batch");
    model.zero_grad();
    const double scale = 1.0 / static_cast<double>(batch.size());
    double loss = 0;
    for (const Example& ex : batch) {
        if (ex.label >= model.config().classes)
            throw ContractError("loss_and_grads: label " + std::to_string(ex.label) + " outside [0, "
                + std::to_string(model.config().classes) + ")");
        Tape tape;
        const TapeOutput out = forward(tape, model, *ex.input, mode, rng, true);
        const Tape::Var l = tape.softmax_cross_entropy(out.logits, ex.label);
        loss += tape.value(l)(0, 0) * scale;
        tape.backward(l, scale);
    }
    if (weight_decay != 0)
        for (Parameter& p : model.params())
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                const double w = p.value.data()[i];
                loss += 0.5 * weight_decay * w * w;
                p.grad.data()[i] += weight_decay * w;
            }
    if (!std::isfinite(loss))
        throw NumericError("loss: non-finite value");
    return loss;
}

void adamax_step(ModelState& model, double lr, const AdamaxConfig& opt)
{
    model.set_step(model.step() + 1);
    const double correction = 1.0 - std::pow(opt.beta1, static_cast<double>(model.step()));
    const double rate = lr / correction;
    for (Parameter& p : model.params())
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad.data()[i];
            double& m = p.m.data()[i];
            double& u = p.u.data()[i];
            m = opt.beta1 * m + (1 - opt.beta1) * g;
            u = std::max(opt.beta2 * u, std::abs(g) + opt.eps);
            p.value.data()[i] -= rate * m / u;
        }
}

// ------------------------------------------------------------- checkpoint

namespace {

constexpr std::uint64_t checkpoint_version = 1;

nlohmann::json header_json(const Checkpoint& ck)
{
    const NegcnConfig& c = ck.model.config();
    return {
        { "tool", tool_name },
        { "tool_version", tool_version },
        { "seed", ck.seed },
        { "task", ck.task },
        { "classes", ck.class_names },
        { "step", ck.model.step() },
        { "model",
            { { "input_dim", c.input_dim }, { "hidden", c.hidden }, { "layers", c.layers }, { "classes", c.classes },
                { "pool_ratio", c.pool_ratio }, { "dropout", c.dropout }, { "edge_features", c.edge_features },
                { "sum_aggregation", c.sum_aggregation } } },
        { "embed",
            { { "code_cap", ck.embed.code_cap }, { "type_cap", ck.embed.type_cap },
                { "reading", std::string(to_string(ck.embed.reading)) },
                { "no_type_embedding", ck.embed.no_type_embedding },
                { "graph_structure", std::string(to_string(ck.embed.structure)) } } },
    };
}

void put_matrix(std::ostream& out, const Mat& m)
{
    for (double v : m.values())
        bin::put_f64(out, v);
}

Mat get_matrix(std::istream& in, std::size_t rows, std::size_t cols)
{
    Mat m(rows, cols);
    for (double& v : m.values())
        v = bin::get_f64(in);
    return m;
}

} // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out.write("GRAPECKP", 8);
    bin::put_u64(out, checkpoint_version);
    bin::put_string(out, header_json(ck).dump());
    ck.vocab.write(out);
    bin::put_u64(out, ck.model.params().size());
    for (const Parameter& p : ck.model.params()) {
        bin::put_string(out, p.name);
        bin::put_u64(out, p.value.rows());
        bin::put_u64(out, p.value.cols());
        put_matrix(out, p.value);
        put_matrix(out, p.m);
        put_matrix(out, p.u);
    }
    if (!out)
        throw Error("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    bin::expect_magic(in, "GRAPECKP", "model checkpoint");
    const auto version = bin::get_u64(in);
    if (version != checkpoint_version)
        throw ValidationError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    NegcnConfig c;
    std::uint64_t step = 0;
    try {
        const auto h = nlohmann::json::parse(bin::get_string(in));
        ck.seed = h.at("seed").get<std::uint64_t>();
        ck.task = h.at("task").get<std::string>();
        ck.class_names = h.at("classes").get<std::vector<std::string>>();
        step = h.at("step").get<std::uint64_t>();
        const auto& m = h.at("model");
        c.input_dim = m.at("input_dim").get<std::size_t>();
        c.hidden = m.at("hidden").get<std::size_t>();
        c.layers = m.at("layers").get<std::size_t>();
        c.classes = m.at("classes").get<std::size_t>();
        c.pool_ratio = m.at("pool_ratio").get<double>();
        c.dropout = m.at("dropout").get<double>();
        c.edge_features = m.at("edge_features").get<bool>();
        c.sum_aggregation = m.at("sum_aggregation").get<bool>();
        const auto& e = h.at("embed");
        ck.embed.code_cap = e.at("code_cap").get<std::size_t>();
        ck.embed.type_cap = e.at("type_cap").get<std::size_t>();
        auto reading = parse_feature_reading(e.at("reading").get<std::string>());
        auto structure = parse_graph_structure(e.at("graph_structure").get<std::string>());
        if (!reading || !structure)
            throw ValidationError("checkpoint header: unknown embedding option");
        ck.embed.reading = *reading;
        ck.embed.structure = *structure;
        ck.embed.no_type_embedding = e.at("no_type_embedding").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("checkpoint header: ") + e.what());
    }
    ck.vocab = VocabEmbedding::read(in);
    const auto count = bin::get_u64(in);
    if (count > 1024)
        throw ValidationError("checkpoint: parameter count out of range");
    std::vector<Parameter> params;
    for (std::uint64_t i = 0; i < count; ++i) {
        Parameter p;
        p.name = bin::get_string(in);
        const auto rows = bin::get_u64(in);
        const auto cols = bin::get_u64(in);
        if (rows * cols > (1u << 26))
            throw ValidationError("checkpoint: parameter " + p.name + " too large");
        p.value = get_matrix(in, rows, cols);
        p.m = get_matrix(in, rows, cols);
        p.u = get_matrix(in, rows, cols);
        params.push_back(std::move(p));
    }
    try {
        ck.model = ModelState(c, std::move(params), step);
    } catch (const ContractError& e) {
        throw ValidationError(std::string("checkpoint: ") + e.what());
    }
    return ck;
}

} // namespace grape
