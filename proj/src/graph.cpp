#include <grape/errors.hpp>
#include <grape/graph.hpp>
#include <grape/io.hpp>

#include <json.hpp>

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace grape {

using json = nlohmann::json;

std::string_view to_string(Version v)
{
    switch (v) {
    case Version::Fixed:
        return "fixed";
    case Version::Buggy:
        return "buggy";
    case Version::Both:
        return "both";
    }
    return "both";
}

std::string_view to_string(EdgeType t)
{
    switch (t) {
    case EdgeType::Ast:
        return "AST";
    case EdgeType::Cfg:
        return "CFG";
    case EdgeType::Cdg:
        return "CDG";
    case EdgeType::Ddg:
        return "DDG";
    }
    return "AST";
}

std::optional<Version> parse_version(std::string_view s)
{
    if (s == "fixed")
        return Version::Fixed;
    if (s == "buggy")
        return Version::Buggy;
    if (s == "both")
        return Version::Both;
    return std::nullopt;
}

std::optional<EdgeType> parse_edge_type(std::string_view s)
{
    if (s == "AST")
        return EdgeType::Ast;
    if (s == "CFG")
        return EdgeType::Cfg;
    if (s == "CDG")
        return EdgeType::Cdg;
    if (s == "DDG")
        return EdgeType::Ddg;
    return std::nullopt;
}

const GraphNode* CodeGraph::find(NodeId id) const
{
    auto it = std::find_if(nodes.begin(), nodes.end(), [id](const GraphNode& n) { return n.id == id; });
    return it == nodes.end() ? nullptr : &*it;
}

void CodeGraph::sort_nodes()
{
    std::stable_sort(nodes.begin(), nodes.end(), [](const GraphNode& a, const GraphNode& b) { return a.id < b.id; });
}

std::unordered_map<NodeId, std::size_t> CodeGraph::index() const
{
    std::unordered_map<NodeId, std::size_t> out;
    out.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
        out.emplace(nodes[i].id, i);
    return out;
}

std::size_t CodeGraph::count_edges(EdgeType type) const
{
    return static_cast<std::size_t>(
        std::count_if(edges.begin(), edges.end(), [type](const GraphEdge& e) { return e.type == type; }));
}

void check_integrity(const CodeGraph& graph)
{
    std::unordered_set<NodeId> ids;
    for (const GraphNode& n : graph.nodes)
        if (!ids.insert(n.id).second)
            throw IntegrityError("duplicate node id " + std::to_string(n.id));
    for (std::size_t i = 0; i < graph.edges.size(); ++i) {
        const GraphEdge& e = graph.edges[i];
        if (!ids.count(e.src) || !ids.count(e.dst))
            throw IntegrityError("edges[" + std::to_string(i) + "] references missing node "
                + std::to_string(ids.count(e.src) ? e.dst : e.src));
        if (!e.in_buggy && !e.in_fixed)
            throw IntegrityError("edges[" + std::to_string(i) + "] has neither version flag set");
    }
}

std::string graph_to_json(const CodeGraph& graph, int indent)
{
    json doc;
    doc["function"] = graph.function_name;
    json nodes = json::array();
    for (const GraphNode& n : graph.nodes)
        nodes.push_back({ { "id", n.id }, { "version", to_string(n.version) }, { "line", n.line }, { "type", n.type },
            { "code", n.code } });
    json edges = json::array();
    for (const GraphEdge& e : graph.edges)
        edges.push_back({ { "src", e.src }, { "dst", e.dst }, { "type", to_string(e.type) }, { "in_buggy", e.in_buggy },
            { "in_fixed", e.in_fixed } });
    doc["nodes"] = std::move(nodes);
    doc["edges"] = std::move(edges);
    return doc.dump(indent);
}

namespace {

const json& field(const json& obj, const std::string& where, const char* key)
{
    auto it = obj.find(key);
    if (it == obj.end())
        throw ValidationError(where + "." + key + ": missing field");
    return *it;
}

std::int64_t int_field(const json& obj, const std::string& where, const char* key)
{
    const json& v = field(obj, where, key);
    if (!v.is_number_integer())
        throw ValidationError(where + "." + key + ": expected integer");
    return v.get<std::int64_t>();
}

std::string string_field(const json& obj, const std::string& where, const char* key)
{
    const json& v = field(obj, where, key);
    if (!v.is_string())
        throw ValidationError(where + "." + key + ": expected string");
    return v.get<std::string>();
}

bool bool_field(const json& obj, const std::string& where, const char* key)
{
    const json& v = field(obj, where, key);
    if (!v.is_boolean())
        throw ValidationError(where + "." + key + ": expected boolean");
    return v.get<bool>();
}

CodeGraph graph_from_value(const json& doc, const std::string& where)
{
    if (!doc.is_object())
        throw ValidationError(where + ": expected object");
    CodeGraph g;
    g.function_name = string_field(doc, where, "function");

    const json& nodes = field(doc, where, "nodes");
    if (!nodes.is_array())
        throw ValidationError(where + ".nodes: expected array");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string at = where + ".nodes[" + std::to_string(i) + "]";
        if (!nodes[i].is_object())
            throw ValidationError(at + ": expected object");
        GraphNode n;
        n.id = int_field(nodes[i], at, "id");
        auto version = parse_version(string_field(nodes[i], at, "version"));
        if (!version)
            throw ValidationError(at + ".version: expected fixed|buggy|both");
        n.version = *version;
        n.line = static_cast<int>(int_field(nodes[i], at, "line"));
        n.type = string_field(nodes[i], at, "type");
        n.code = string_field(nodes[i], at, "code");
        g.nodes.push_back(std::move(n));
    }

    const json& edges = field(doc, where, "edges");
    if (!edges.is_array())
        throw ValidationError(where + ".edges: expected array");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const std::string at = where + ".edges[" + std::to_string(i) + "]";
        if (!edges[i].is_object())
            throw ValidationError(at + ": expected object");
        GraphEdge e;
        e.src = int_field(edges[i], at, "src");
        e.dst = int_field(edges[i], at, "dst");
        auto type = parse_edge_type(string_field(edges[i], at, "type"));
        if (!type)
            throw ValidationError(at + ".type: expected AST|CFG|CDG|DDG");
        e.type = *type;
        e.in_buggy = bool_field(edges[i], at, "in_buggy");
        e.in_fixed = bool_field(edges[i], at, "in_fixed");
        g.edges.push_back(e);
    }
    check_integrity(g);
    return g;
}

json parse_document(std::string_view text)
{
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("invalid JSON: ") + e.what());
    }
}

} // namespace

CodeGraph graph_from_json(std::string_view text)
{
    return graph_from_value(parse_document(text), "$");
}

std::vector<CodeGraph> import_graphs_json(const std::filesystem::path& path)
{
    json doc = parse_document(read_text_file(path));
    std::vector<CodeGraph> graphs;
    if (doc.is_array()) {
        for (std::size_t i = 0; i < doc.size(); ++i)
            graphs.push_back(graph_from_value(doc[i], "$[" + std::to_string(i) + "]"));
    } else {
        graphs.push_back(graph_from_value(doc, "$"));
    }
    return graphs;
}

CodeGraph import_graph_json(const std::filesystem::path& path)
{
    return graph_from_json(read_text_file(path));
}

void export_graph_json(const CodeGraph& graph, const std::filesystem::path& path)
{
    write_text_file(path, graph_to_json(graph) + "\n");
}

void export_graphs_json(const std::vector<CodeGraph>& graphs, const std::filesystem::path& path)
{
    if (graphs.size() == 1) {
        export_graph_json(graphs.front(), path);
        return;
    }
    json doc = json::array();
    for (const CodeGraph& g : graphs)
        doc.push_back(json::parse(graph_to_json(g, -1)));
    write_text_file(path, doc.dump(1) + "\n");
}

namespace {

std::string dot_escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\')
            out += '\\';
        out += c;
    }
    return out;
}

const char* node_color(Version v)
{
    switch (v) {
    case Version::Buggy:
        return "red";
    case Version::Fixed:
        return "green";
    case Version::Both:
        break;
    }
    return "black";
}

const char* edge_color(const GraphEdge& e)
{
    if (e.in_buggy && !e.in_fixed)
        return "red";
    if (e.in_fixed && !e.in_buggy)
        return "green";
    return "black";
}

const char* edge_style(EdgeType t)
{
    switch (t) {
    case EdgeType::Ast:
        return "solid";
    case EdgeType::Cfg:
        return "bold";
    case EdgeType::Cdg:
        return "dashed";
    case EdgeType::Ddg:
        return "dotted";
    }
    return "solid";
}

} // namespace

std::string graph_to_dot(const CodeGraph& graph)
{
    std::ostringstream out;
    out << "digraph \"" << dot_escape(graph.function_name) << "\" {\n";
    out << "  node [shape=box, fontname=\"monospace\"];\n";
    for (const GraphNode& n : graph.nodes) {
        out << "  n" << n.id << " [label=\"" << n.id << ": " << dot_escape(n.type) << "\\n" << dot_escape(n.code)
            << "\", color=" << node_color(n.version) << ", fontcolor=" << node_color(n.version) << "];\n";
    }
    for (const GraphEdge& e : graph.edges) {
        out << "  n" << e.src << " -> n" << e.dst << " [label=\"" << to_string(e.type) << "\", color=" << edge_color(e)
            << ", style=" << edge_style(e.type) << "];\n";
    }
    out << "}\n";
    return out.str();
}

} // namespace grape
