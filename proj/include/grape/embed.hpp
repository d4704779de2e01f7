// Token embeddings (skip-gram with negative sampling) and the node/edge
// feature vectors consumed by the network.
#pragma once

#include <grape/graph.hpp>
#include <grape/tensor.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace grape {

/// Splits on whitespace, punctuation and underscores; operators become their
/// own tokens. Code tokens are lowercased, type tokens keep their case.
std::vector<std::string> tokenize(std::string_view text, bool lowercase);
inline std::vector<std::string> tokenize_code(std::string_view text) { return tokenize(text, true); }
inline std::vector<std::string> tokenize_type(std::string_view text) { return tokenize(text, false); }

struct SkipGramConfig {
    int dim = 64;
    int window = 5;
    int negatives = 5;
    int epochs = 5;
    double lr = 0.025;
    std::uint64_t seed = 1;
};

class VocabEmbedding {
public:
    static constexpr std::string_view unk_token = "<unk>";

    VocabEmbedding() = default;
    /// `tokens[0]` must be the unk token.
    VocabEmbedding(std::vector<std::string> tokens, Mat vectors);

    std::size_t size() const { return m_tokens.size(); }
    std::size_t dim() const { return m_vectors.cols(); }
    std::size_t unk_index() const { return 0; }
    /// Row of `token`, or unk_index() when absent.
    std::size_t index_of(const std::string& token) const;
    bool contains(const std::string& token) const { return m_index.count(token) > 0; }
    const double* vector(std::size_t index) const { return m_vectors.row(index); }
    const std::vector<std::string>& tokens() const { return m_tokens; }
    const Mat& vectors() const { return m_vectors; }

    void write(std::ostream& out) const;
    static VocabEmbedding read(std::istream& in);
    void save(const std::filesystem::path& path) const;
    static VocabEmbedding load(const std::filesystem::path& path);

    bool operator==(const VocabEmbedding& o) const { return m_tokens == o.m_tokens && m_vectors == o.m_vectors; }

private:
    std::vector<std::string> m_tokens;
    std::unordered_map<std::string, std::size_t> m_index;
    Mat m_vectors;
};

/// Every corpus token enters the vocabulary (min count 1) after the unk
/// entry. Throws ContractError on an empty corpus.
VocabEmbedding train_skipgram(const std::vector<std::vector<std::string>>& corpus, const SkipGramConfig& config = {});

/// Which edge types feed the network.
enum class GraphStructure { Ast, DdgCdg, Cpg };
std::string_view to_string(GraphStructure s);
std::optional<GraphStructure> parse_graph_structure(std::string_view s);

/// How the "12 / 4" sizes for code and type are read.
enum class FeatureReading {
    Caps, // token caps, 64-dim parts, 128-dim feature
    Dims, // all tokens, parts truncated to 4 (type) and 12 (code) entries
};
std::string_view to_string(FeatureReading r);
std::optional<FeatureReading> parse_feature_reading(std::string_view s);

struct EmbedConfig {
    std::size_t code_cap = 12;
    std::size_t type_cap = 4;
    FeatureReading reading = FeatureReading::Caps;
    bool no_type_embedding = false;
    GraphStructure structure = GraphStructure::Cpg;

    std::size_t feature_dim(std::size_t vocab_dim) const
    {
        return reading == FeatureReading::Caps ? 2 * vocab_dim : type_cap + code_cap;
    }
};

/// One sentence per node: type tokens followed by code tokens.
std::vector<std::vector<std::string>> graph_sentences(const CodeGraph& graph);

/// concat(type part, code part). Throws ContractError for empty code.
std::vector<double> embed_node(const GraphNode& node, const VocabEmbedding& vocab, const EmbedConfig& config = {});

/// (buggy, fixed, AST, CDG, DDG, CFG)
std::array<double, 6> embed_edge(const GraphEdge& edge);

struct EmbeddedGraph {
    std::vector<NodeId> ids;
    Mat x; // N x D, rows in id order
    std::vector<std::pair<std::size_t, std::size_t>> edges; // row indices into x
    Mat e; // |edges| x 6, same order as `edges`
};

/// Throws DegenerateSampleError for an empty graph.
EmbeddedGraph embed_graph(const CodeGraph& graph, const VocabEmbedding& vocab, const EmbedConfig& config = {});

} // namespace grape
