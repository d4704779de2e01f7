// Versioned property graphs shared by the CPG builder, the merger and the
// embedding stage, plus the JSON interchange format and DOT rendering.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace grape {

using NodeId = std::int64_t;

enum class Version { Fixed, Buggy, Both };
enum class EdgeType { Ast, Cfg, Cdg, Ddg };

std::string_view to_string(Version v);
std::string_view to_string(EdgeType t);
std::optional<Version> parse_version(std::string_view s);
std::optional<EdgeType> parse_edge_type(std::string_view s);

struct GraphNode {
    NodeId id = 0;
    Version version = Version::Both;
    int line = 0;
    std::string type;
    std::string code;

    bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
    NodeId src = 0;
    NodeId dst = 0;
    EdgeType type = EdgeType::Ast;
    bool in_buggy = true;
    bool in_fixed = true;

    bool operator==(const GraphEdge&) const = default;
    bool same_link(const GraphEdge& o) const { return src == o.src && dst == o.dst && type == o.type; }
};

/// Node set plus edge multiset. Nodes are kept sorted by id.
struct CodeGraph {
    std::string function_name;
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;

    const GraphNode* find(NodeId id) const;
    bool contains(NodeId id) const { return find(id) != nullptr; }
    void sort_nodes();
    /// Position of every node id in `nodes`.
    std::unordered_map<NodeId, std::size_t> index() const;
    std::size_t count_edges(EdgeType type) const;

    bool operator==(const CodeGraph&) const = default;
};

/// Throws IntegrityError if an edge references a missing node, ids repeat,
/// or an edge has neither version flag set.
void check_integrity(const CodeGraph& graph);

// JSON interchange:
// {"function": str,
//  "nodes": [{"id":int,"version":"fixed|buggy|both","line":int,"type":str,"code":str}],
//  "edges": [{"src":int,"dst":int,"type":"AST|CFG|CDG|DDG","in_buggy":bool,"in_fixed":bool}]}

std::string graph_to_json(const CodeGraph& graph, int indent = 1);
/// Parses one graph document. Throws ValidationError naming the offending
/// field, IntegrityError for dangling edges.
CodeGraph graph_from_json(std::string_view text);

/// A file may hold a single graph object or an array of them.
std::vector<CodeGraph> import_graphs_json(const std::filesystem::path& path);
CodeGraph import_graph_json(const std::filesystem::path& path);
void export_graph_json(const CodeGraph& graph, const std::filesystem::path& path);
void export_graphs_json(const std::vector<CodeGraph>& graphs, const std::filesystem::path& path);

/// DOT rendering: buggy-only elements red, fixed-only green, shared black.
std::string graph_to_dot(const CodeGraph& graph);

} // namespace grape
