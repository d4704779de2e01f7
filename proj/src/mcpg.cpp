#include <grape/cpg.hpp>
#include <grape/errors.hpp>
#include <grape/mcpg.hpp>

#include <algorithm>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

namespace grape {

namespace {

/// "type\x1fcode" of every AST ancestor from the root down to the parent.
std::vector<std::string> ancestor_paths(const CodeGraph& g)
{
    const auto index = g.index();
    std::vector<std::ptrdiff_t> parent(g.nodes.size(), -1);
    for (const GraphEdge& e : g.edges) {
        if (e.type != EdgeType::Ast)
            continue;
        auto s = index.find(e.src), d = index.find(e.dst);
        if (s != index.end() && d != index.end() && parent[d->second] < 0)
            parent[d->second] = static_cast<std::ptrdiff_t>(s->second);
    }

    std::vector<std::string> paths(g.nodes.size());
    std::vector<int> state(g.nodes.size(), 0); // 0 new, 1 in progress, 2 done
    for (std::size_t start = 0; start < g.nodes.size(); ++start) {
        std::vector<std::size_t> chain;
        std::size_t cur = start;
        while (state[cur] == 0) {
            state[cur] = 1;
            chain.push_back(cur);
            if (parent[cur] < 0)
                break;
            cur = static_cast<std::size_t>(parent[cur]);
        }
        for (std::size_t k = chain.size(); k-- > 0;) {
            std::size_t node = chain[k];
            if (parent[node] >= 0 && state[static_cast<std::size_t>(parent[node])] == 2) {
                const GraphNode& p = g.nodes[static_cast<std::size_t>(parent[node])];
                paths[node] = paths[static_cast<std::size_t>(parent[node])] + p.type + '\x1f' + p.code + '\x1e';
            }
            state[node] = 2;
        }
    }
    return paths;
}

using MatchKey = std::tuple<std::string, std::string, std::string>;

std::map<MatchKey, std::vector<std::size_t>> group_by_key(const CodeGraph& g)
{
    const auto paths = ancestor_paths(g);
    std::map<MatchKey, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        groups[{ g.nodes[i].type, g.nodes[i].code, paths[i] }].push_back(i);
    for (auto& [key, members] : groups)
        std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            return std::tie(g.nodes[a].line, g.nodes[a].id) < std::tie(g.nodes[b].line, g.nodes[b].id);
        });
    return groups;
}

std::vector<std::size_t> order_by_id(const CodeGraph& g)
{
    std::vector<std::size_t> order(g.nodes.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return g.nodes[a].id < g.nodes[b].id; });
    return order;
}

bool is_slice_type(EdgeType t) { return t == EdgeType::Cdg || t == EdgeType::Ddg || t == EdgeType::Cfg; }

} // namespace

Correspondence match_nodes(const CodeGraph& g_fixed, const CodeGraph& g_buggy)
{
    const auto fixed_groups = group_by_key(g_fixed);
    const auto buggy_groups = group_by_key(g_buggy);
    Correspondence out;
    for (const auto& [key, buggy_members] : buggy_groups) {
        auto it = fixed_groups.find(key);
        if (it == fixed_groups.end())
            continue;
        const std::size_t n = std::min(buggy_members.size(), it->second.size());
        for (std::size_t k = 0; k < n; ++k)
            out.emplace(g_buggy.nodes[buggy_members[k]].id, g_fixed.nodes[it->second[k]].id);
    }
    return out;
}

MergedGraph merge(const CodeGraph& g_fixed, const CodeGraph& g_buggy, const Correspondence& correspondence)
{
    const auto fixed_index = g_fixed.index();
    const auto buggy_index = g_buggy.index();
    std::unordered_set<NodeId> targets;
    for (const auto& [b, f] : correspondence) {
        if (!buggy_index.count(b))
            throw IntegrityError("correspondence references missing buggy node " + std::to_string(b));
        if (!fixed_index.count(f))
            throw IntegrityError("correspondence references missing fixed node " + std::to_string(f));
        if (!targets.insert(f).second)
            throw IntegrityError("correspondence is not injective at fixed node " + std::to_string(f));
    }

    MergedGraph merged;
    CodeGraph& out = merged.graph;
    out.function_name = g_fixed.nodes.empty() ? g_buggy.function_name : g_fixed.function_name;

    std::unordered_map<NodeId, NodeId> fixed_new, buggy_new;
    NodeId next = 0;
    for (std::size_t i : order_by_id(g_fixed)) {
        GraphNode n = g_fixed.nodes[i];
        fixed_new.emplace(n.id, next);
        n.id = next++;
        n.version = targets.count(g_fixed.nodes[i].id) ? Version::Both : Version::Fixed;
        out.nodes.push_back(std::move(n));
    }
    for (std::size_t i : order_by_id(g_buggy)) {
        const GraphNode& src = g_buggy.nodes[i];
        if (auto it = correspondence.find(src.id); it != correspondence.end()) {
            buggy_new.emplace(src.id, fixed_new.at(it->second));
            continue;
        }
        GraphNode n = src;
        buggy_new.emplace(n.id, next);
        n.id = next++;
        n.version = Version::Buggy;
        out.nodes.push_back(std::move(n));
    }

    using LinkKey = std::tuple<NodeId, NodeId, EdgeType>;
    std::map<LinkKey, std::vector<std::size_t>> unpaired;
    for (const GraphEdge& e : g_fixed.edges) {
        GraphEdge m { fixed_new.at(e.src), fixed_new.at(e.dst), e.type, false, true };
        unpaired[{ m.src, m.dst, m.type }].push_back(out.edges.size());
        out.edges.push_back(m);
    }
    for (auto& [key, slots] : unpaired)
        std::reverse(slots.begin(), slots.end());
    for (const GraphEdge& e : g_buggy.edges) {
        GraphEdge m { buggy_new.at(e.src), buggy_new.at(e.dst), e.type, true, false };
        auto it = unpaired.find({ m.src, m.dst, m.type });
        if (it != unpaired.end() && !it->second.empty()) {
            out.edges[it->second.back()].in_buggy = true;
            it->second.pop_back();
        } else {
            out.edges.push_back(m);
        }
    }

    merged.changed_nodes = identify_changed_nodes(merged);
    return merged;
}

std::set<NodeId> identify_changed_nodes(const MergedGraph& m)
{
    std::set<NodeId> out;
    for (const GraphNode& n : m.graph.nodes)
        if (n.version != Version::Both)
            out.insert(n.id);
    return out;
}

CodeGraph slice(const MergedGraph& m, const std::set<NodeId>& v_change)
{
    const CodeGraph& g = m.graph;
    std::unordered_set<NodeId> nodes;
    std::vector<bool> keep_edge(g.edges.size(), false);

    for (NodeId v : v_change)
        if (g.contains(v))
            nodes.insert(v);

    // step 1: one-hop forward and backward slices over CDG, DDG and CFG
    for (NodeId v : v_change) {
        for (std::size_t i = 0; i < g.edges.size(); ++i) {
            const GraphEdge& e = g.edges[i];
            if (!is_slice_type(e.type) || (e.src != v && e.dst != v))
                continue;
            nodes.insert(e.src);
            nodes.insert(e.dst);
            keep_edge[i] = true;
        }
    }

    // step 2: AST edges touching the step-1 slice
    const std::unordered_set<NodeId> sliced = nodes;
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        const GraphEdge& e = g.edges[i];
        if (e.type != EdgeType::Ast || !(sliced.count(e.src) || sliced.count(e.dst)))
            continue;
        nodes.insert(e.src);
        nodes.insert(e.dst);
        keep_edge[i] = true;
    }

    CodeGraph out;
    out.function_name = g.function_name;
    for (const GraphNode& n : g.nodes)
        if (nodes.count(n.id))
            out.nodes.push_back(n);
    for (std::size_t i = 0; i < g.edges.size(); ++i)
        if (keep_edge[i])
            out.edges.push_back(g.edges[i]);
    return out;
}

CodeGraph simplify(const CodeGraph& g)
{
    CodeGraph cur = g;
    for (;;) {
        std::unordered_set<NodeId> alive;
        for (const GraphNode& n : cur.nodes)
            if (!n.code.empty())
                alive.insert(n.id);

        std::vector<GraphEdge> edges;
        std::unordered_map<NodeId, std::size_t> degree;
        for (const GraphEdge& e : cur.edges) {
            if (!alive.count(e.src) || !alive.count(e.dst))
                continue;
            edges.push_back(e);
            ++degree[e.src];
            ++degree[e.dst];
        }
        std::vector<GraphNode> nodes;
        for (const GraphNode& n : cur.nodes)
            if (alive.count(n.id) && degree.count(n.id))
                nodes.push_back(n);

        if (nodes.size() == cur.nodes.size() && edges.size() == cur.edges.size())
            return cur;
        cur.nodes = std::move(nodes);
        cur.edges = std::move(edges);
    }
}

CodeGraph unite(const std::vector<CodeGraph>& graphs, const std::string& name)
{
    CodeGraph out;
    out.function_name = name;
    NodeId next = 0;
    for (const CodeGraph& g : graphs) {
        std::unordered_map<NodeId, NodeId> renumber;
        for (const GraphNode& n : g.nodes) {
            GraphNode copy = n;
            renumber.emplace(n.id, next);
            copy.id = next++;
            out.nodes.push_back(std::move(copy));
        }
        for (const GraphEdge& e : g.edges) {
            GraphEdge copy = e;
            copy.src = renumber.at(e.src);
            copy.dst = renumber.at(e.dst);
            out.edges.push_back(copy);
        }
    }
    return out;
}

namespace {

struct FunctionPair {
    std::string name;
    const CodeGraph* fixed = nullptr;
    const CodeGraph* buggy = nullptr;
};

/// Pairs functions by name (and occurrence index for repeated names).
std::vector<FunctionPair> pair_functions(const std::vector<CodeGraph>& buggy, const std::vector<CodeGraph>& fixed)
{
    std::vector<FunctionPair> pairs;
    std::map<std::string, int> seen_fixed;
    std::map<std::pair<std::string, int>, std::size_t> slot;
    for (const CodeGraph& g : fixed) {
        int k = seen_fixed[g.function_name]++;
        slot[{ g.function_name, k }] = pairs.size();
        pairs.push_back({ g.function_name, &g, nullptr });
    }
    std::map<std::string, int> seen_buggy;
    for (const CodeGraph& g : buggy) {
        int k = seen_buggy[g.function_name]++;
        if (auto it = slot.find({ g.function_name, k }); it != slot.end())
            pairs[it->second].buggy = &g;
        else
            pairs.push_back({ g.function_name, nullptr, &g });
    }
    return pairs;
}

bool touches_diff(const MergedGraph& m, const std::set<int>& removed, const std::set<int>& added)
{
    for (const GraphNode& n : m.graph.nodes) {
        if (n.version == Version::Buggy && removed.count(n.line))
            return true;
        if (n.version == Version::Fixed && added.count(n.line))
            return true;
    }
    return false;
}

void merge_functions(const std::vector<CodeGraph>& buggy, const std::vector<CodeGraph>& fixed, const std::set<int>* removed,
    const std::set<int>* added, std::vector<CodeGraph>& out, std::string& names)
{
    static const CodeGraph empty;
    for (const FunctionPair& p : pair_functions(buggy, fixed)) {
        const CodeGraph& f = p.fixed ? *p.fixed : empty;
        const CodeGraph& b = p.buggy ? *p.buggy : empty;
        MergedGraph m = merge(f, b, match_nodes(f, b));
        if (m.changed_nodes.empty())
            continue;
        if (removed && added && !touches_diff(m, *removed, *added))
            continue;
        CodeGraph g = simplify(slice(m, m.changed_nodes));
        if (g.nodes.empty())
            continue;
        if (!names.empty())
            names += ",";
        names += p.name;
        out.push_back(std::move(g));
    }
}

} // namespace

CodeGraph build_mcpg_from_graphs(const std::vector<CodeGraph>& buggy, const std::vector<CodeGraph>& fixed, const PatchDiff* diff)
{
    std::set<int> removed, added;
    if (diff)
        for (const FileChange& f : diff->files) {
            removed.insert(f.removed_lines.begin(), f.removed_lines.end());
            added.insert(f.added_lines.begin(), f.added_lines.end());
        }
    std::vector<CodeGraph> parts;
    std::string names;
    merge_functions(buggy, fixed, diff ? &removed : nullptr, diff ? &added : nullptr, parts, names);
    return unite(parts, names);
}

CodeGraph build_patch_mcpg(const SourcePair& pair)
{
    std::vector<CodeGraph> parts;
    std::string names;
    for (const SourceFile& file : pair.files) {
        const auto buggy = build_cpg(file.buggy, Version::Buggy);
        const auto fixed = build_cpg(file.fixed, Version::Fixed);
        const FileChange* change = pair.diff.find(file.path);
        merge_functions(buggy, fixed, change ? &change->removed_lines : nullptr, change ? &change->added_lines : nullptr,
            parts, names);
    }
    return unite(parts, names);
}

} // namespace grape
