#include <grape/embed.hpp>
#include <grape/errors.hpp>
#include <grape/io.hpp>
#include <grape/random.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

namespace grape {

namespace {

bool is_word_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

} // namespace

std::vector<std::string> tokenize(std::string_view text, bool lowercase)
{
    static const char* const two_char_ops[] = { "==", "!=", "<=", ">=", "&&", "||" };
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        if (!word.empty())
            out.push_back(std::move(word));
        word.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (is_word_char(c)) {
            word += lowercase ? static_cast<char>(std::tolower(static_cast<unsigned char>(c))) : c;
            continue;
        }
        flush();
        if (std::isspace(static_cast<unsigned char>(c)) || c == '_')
            continue;
        bool matched = false;
        for (const char* op : two_char_ops)
            if (text.substr(i, 2) == op) {
                out.emplace_back(op);
                ++i;
                matched = true;
                break;
            }
        if (!matched)
            out.emplace_back(1, c);
    }
    flush();
    return out;
}

// ------------------------------------------------------------------ vocab

VocabEmbedding::VocabEmbedding(std::vector<std::string> tokens, Mat vectors)
    : m_tokens(std::move(tokens))
    , m_vectors(std::move(vectors))
{
    if (m_tokens.empty() || m_tokens[0] != unk_token)
        throw ContractError("vocabulary must start with the unk token");
    if (m_vectors.rows() != m_tokens.size())
        throw ContractError("vocabulary has " + std::to_string(m_tokens.size()) + " tokens but "
            + std::to_string(m_vectors.rows()) + " vectors");
    for (std::size_t i = 0; i < m_tokens.size(); ++i)
        if (!m_index.emplace(m_tokens[i], i).second)
            throw ContractError("duplicate vocabulary token '" + m_tokens[i] + "'");
}

std::size_t VocabEmbedding::index_of(const std::string& token) const
{
    auto it = m_index.find(token);
    return it == m_index.end() ? unk_index() : it->second;
}

void VocabEmbedding::write(std::ostream& out) const
{
    out.write("GRAPEVOC", 8);
    bin::put_u64(out, 1);
    bin::put_u64(out, m_tokens.size());
    bin::put_u64(out, dim());
    for (std::size_t i = 0; i < m_tokens.size(); ++i) {
        bin::put_string(out, m_tokens[i]);
        for (std::size_t j = 0; j < dim(); ++j)
            bin::put_f64(out, m_vectors(i, j));
    }
}

VocabEmbedding VocabEmbedding::read(std::istream& in)
{
    bin::expect_magic(in, "GRAPEVOC", "vocabulary");
    const auto version = bin::get_u64(in);
    if (version != 1)
        throw ValidationError("unsupported vocabulary version " + std::to_string(version));
    const auto count = bin::get_u64(in);
    const auto dim = bin::get_u64(in);
    if (count == 0 || count > (1u << 24) || dim == 0 || dim > 4096)
        throw ValidationError("vocabulary header out of range");
    std::vector<std::string> tokens;
    Mat vectors(count, dim);
    for (std::size_t i = 0; i < count; ++i) {
        tokens.push_back(bin::get_string(in));
        for (std::size_t j = 0; j < dim; ++j)
            vectors(i, j) = bin::get_f64(in);
    }
    try {
        return VocabEmbedding(std::move(tokens), std::move(vectors));
    } catch (const ContractError& e) {
        throw ValidationError(e.what());
    }
}

void VocabEmbedding::save(const std::filesystem::path& path) const
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    write(out);
}

VocabEmbedding VocabEmbedding::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    return read(in);
}

// -------------------------------------------------------------- skip-gram

VocabEmbedding train_skipgram(const std::vector<std::vector<std::string>>& corpus, const SkipGramConfig& config)
{
    if (config.dim <= 0 || config.window <= 0 || config.negatives < 0 || config.epochs < 0 || !(config.lr > 0))
        throw ContractError("skip-gram: invalid configuration");
    std::map<std::string, std::size_t> counts;
    std::size_t total_tokens = 0;
    for (const auto& sentence : corpus)
        for (const std::string& t : sentence) {
            ++counts[t];
            ++total_tokens;
        }
    if (total_tokens == 0)
        throw ContractError("skip-gram: empty corpus");

    std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(), counts.end());
    std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> tokens { std::string(VocabEmbedding::unk_token) };
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& [t, c] : ordered) {
        if (t == VocabEmbedding::unk_token)
            continue;
        index[t] = tokens.size();
        tokens.push_back(t);
    }
    const std::size_t vocab = tokens.size();
    const std::size_t dim = static_cast<std::size_t>(config.dim);

    std::vector<std::vector<std::size_t>> sentences;
    for (const auto& sentence : corpus) {
        std::vector<std::size_t> ids;
        for (const std::string& t : sentence) {
            auto it = index.find(t);
            ids.push_back(it == index.end() ? 0 : it->second);
        }
        sentences.push_back(std::move(ids));
    }

    std::vector<double> noise(vocab, 0.0);
    for (const auto& [t, c] : ordered)
        if (auto it = index.find(t); it != index.end())
            noise[it->second] = std::pow(static_cast<double>(c), 0.75);
    std::vector<double> cumulative(vocab);
    std::partial_sum(noise.begin(), noise.end(), cumulative.begin());

    Rng rng(config.seed);
    Mat input(vocab, dim);
    for (double& v : input.values())
        v = (uniform01(rng) - 0.5) / static_cast<double>(dim);
    Mat output(vocab, dim);

    auto draw_noise = [&]() -> std::size_t {
        const double r = uniform01(rng) * cumulative.back();
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), vocab - 1);
    };

    const double planned = static_cast<double>(config.epochs) * static_cast<double>(total_tokens);
    double processed = 0;
    std::vector<double> delta(dim);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (const auto& sentence : sentences) {
            const long n = static_cast<long>(sentence.size());
            for (long i = 0; i < n; ++i, processed += 1) {
                const double lr = config.lr * std::max(1e-4, 1.0 - processed / planned);
                const long reach = 1 + static_cast<long>(uniform_index(rng, static_cast<std::uint64_t>(config.window)));
                const std::size_t center = sentence[static_cast<std::size_t>(i)];
                double* in_vec = input.row(center);
                for (long j = std::max(0L, i - reach); j <= std::min(n - 1, i + reach); ++j) {
                    if (j == i)
                        continue;
                    const std::size_t context = sentence[static_cast<std::size_t>(j)];
                    std::fill(delta.begin(), delta.end(), 0.0);
                    for (int k = 0; k <= config.negatives; ++k) {
                        std::size_t target = context;
                        double label = 1;
                        if (k > 0) {
                            target = draw_noise();
                            if (target == context)
                                continue;
                            label = 0;
                        }
                        double* out_vec = output.row(target);
                        double f = 0;
                        for (std::size_t d = 0; d < dim; ++d)
                            f += in_vec[d] * out_vec[d];
                        const double g = (label - 1.0 / (1.0 + std::exp(-f))) * lr;
                        for (std::size_t d = 0; d < dim; ++d) {
                            delta[d] += g * out_vec[d];
                            out_vec[d] += g * in_vec[d];
                        }
                    }
                    for (std::size_t d = 0; d < dim; ++d)
                        in_vec[d] += delta[d];
                }
            }
        }
    }

    // unk never occurs in training text; give it the centroid of the rest
    if (vocab > 1) {
        for (std::size_t d = 0; d < dim; ++d) {
            double s = 0;
            for (std::size_t r = 1; r < vocab; ++r)
                s += input(r, d);
            input(0, d) = s / static_cast<double>(vocab - 1);
        }
    }
    return VocabEmbedding(std::move(tokens), std::move(input));
}

// ---------------------------------------------------------------- features

std::string_view to_string(GraphStructure s)
{
    switch (s) {
    case GraphStructure::Ast:
        return "AST";
    case GraphStructure::DdgCdg:
        return "DDG+CDG";
    case GraphStructure::Cpg:
        return "CPG";
    }
    return "CPG";
}

std::optional<GraphStructure> parse_graph_structure(std::string_view s)
{
    if (s == "AST" || s == "ast")
        return GraphStructure::Ast;
    if (s == "DDG+CDG" || s == "ddg+cdg")
        return GraphStructure::DdgCdg;
    if (s == "CPG" || s == "cpg")
        return GraphStructure::Cpg;
    return std::nullopt;
}

std::string_view to_string(FeatureReading r)
{
    return r == FeatureReading::Caps ? "caps" : "dims";
}

std::optional<FeatureReading> parse_feature_reading(std::string_view s)
{
    if (s == "caps")
        return FeatureReading::Caps;
    if (s == "dims")
        return FeatureReading::Dims;
    return std::nullopt;
}

std::vector<std::vector<std::string>> graph_sentences(const CodeGraph& graph)
{
    std::vector<std::vector<std::string>> out;
    for (const GraphNode& n : graph.nodes) {
        std::vector<std::string> sentence = tokenize_type(n.type);
        for (std::string& t : tokenize_code(n.code))
            sentence.push_back(std::move(t));
        if (!sentence.empty())
            out.push_back(std::move(sentence));
    }
    return out;
}

namespace {

void mean_into(const std::vector<std::string>& tokens, std::size_t cap, const VocabEmbedding& vocab, double* out,
    std::size_t width)
{
    const std::size_t used = std::min(tokens.size(), cap);
    if (used == 0)
        return;
    for (std::size_t t = 0; t < used; ++t) {
        const double* v = vocab.vector(vocab.index_of(tokens[t]));
        for (std::size_t d = 0; d < width; ++d)
            out[d] += v[d];
    }
    for (std::size_t d = 0; d < width; ++d)
        out[d] /= static_cast<double>(used);
}

} // namespace

std::vector<double> embed_node(const GraphNode& node, const VocabEmbedding& vocab, const EmbedConfig& config)
{
    if (node.code.empty())
        throw ContractError("embed_node: node " + std::to_string(node.id) + " has empty code");
    const std::size_t dim = vocab.dim();
    std::vector<double> out(config.feature_dim(dim), 0.0);
    const auto type_tokens = tokenize_type(node.type);
    const auto code_tokens = tokenize_code(node.code);
    if (config.reading == FeatureReading::Caps) {
        if (!config.no_type_embedding)
            mean_into(type_tokens, config.type_cap, vocab, out.data(), dim);
        mean_into(code_tokens, config.code_cap, vocab, out.data() + dim, dim);
        return out;
    }
    if (config.type_cap > dim || config.code_cap > dim)
        throw ContractError("embed_node: feature widths exceed the vocabulary dimension");
    std::vector<double> type_part(dim, 0.0), code_part(dim, 0.0);
    if (!config.no_type_embedding)
        mean_into(type_tokens, type_tokens.size(), vocab, type_part.data(), dim);
    mean_into(code_tokens, code_tokens.size(), vocab, code_part.data(), dim);
    std::copy_n(type_part.begin(), config.type_cap, out.begin());
    std::copy_n(code_part.begin(), config.code_cap, out.begin() + static_cast<long>(config.type_cap));
    return out;
}

std::array<double, 6> embed_edge(const GraphEdge& edge)
{
    std::array<double, 6> v {};
    v[0] = edge.in_buggy ? 1 : 0;
    v[1] = edge.in_fixed ? 1 : 0;
    switch (edge.type) {
    case EdgeType::Ast:
        v[2] = 1;
        break;
    case EdgeType::Cdg:
        v[3] = 1;
        break;
    case EdgeType::Ddg:
        v[4] = 1;
        break;
    case EdgeType::Cfg:
        v[5] = 1;
        break;
    }
    return v;
}

namespace {

bool kept(EdgeType t, GraphStructure s)
{
    switch (s) {
    case GraphStructure::Ast:
        return t == EdgeType::Ast;
    case GraphStructure::DdgCdg:
        return t == EdgeType::Ddg || t == EdgeType::Cdg;
    case GraphStructure::Cpg:
        return true;
    }
    return true;
}

} // namespace

EmbeddedGraph embed_graph(const CodeGraph& graph, const VocabEmbedding& vocab, const EmbedConfig& config)
{
    if (graph.nodes.empty())
        throw DegenerateSampleError("graph '" + graph.function_name + "' has no nodes");
    CodeGraph sorted = graph;
    sorted.sort_nodes();
    EmbeddedGraph out;
    out.x = Mat(sorted.nodes.size(), config.feature_dim(vocab.dim()));
    std::unordered_map<NodeId, std::size_t> row;
    for (std::size_t i = 0; i < sorted.nodes.size(); ++i) {
        out.ids.push_back(sorted.nodes[i].id);
        row[sorted.nodes[i].id] = i;
        const auto f = embed_node(sorted.nodes[i], vocab, config);
        std::copy(f.begin(), f.end(), out.x.row(i));
    }
    std::vector<std::array<double, 6>> features;
    for (const GraphEdge& e : sorted.edges) {
        if (!kept(e.type, config.structure))
            continue;
        auto s = row.find(e.src), d = row.find(e.dst);
        if (s == row.end() || d == row.end())
            throw IntegrityError("edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) + " references a missing node");
        out.edges.emplace_back(s->second, d->second);
        features.push_back(embed_edge(e));
    }
    out.e = Mat(features.size(), 6);
    for (std::size_t i = 0; i < features.size(); ++i)
        std::copy(features[i].begin(), features[i].end(), out.e.row(i));
    return out;
}

} // namespace grape
