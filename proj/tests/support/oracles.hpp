// Brute-force reference implementations and random input generators used
// by the unit and acceptance suites. Nothing here shares code with the
// implementation paths it checks.
#pragma once

#include <grape/cpg.hpp>
#include <grape/mcpg.hpp>
#include <grape/negcn.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace grape::testing {

// ---------------------------------------------------------------- programs

/// Random mini-language function with at most `max_statements` statements.
class ProgramGenerator {
public:
    explicit ProgramGenerator(std::uint64_t seed)
        : m_rng(seed)
    {
    }

    std::string function(int max_statements, bool allow_loops = true, bool allow_return = true)
    {
        m_budget = std::max(1, pick(1, max_statements));
        m_loops = allow_loops;
        m_returns = allow_return;
        std::string body;
        while (m_budget > 0)
            body += statement(1);
        return "int f(int a, int b) {\n" + body + "}\n";
    }

private:
    int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(m_rng); }
    std::string var() { return std::string(1, static_cast<char>('a' + pick(0, 3))); }

    std::string expr()
    {
        switch (pick(0, 3)) {
        case 0:
            return var();
        case 1:
            return var() + " + " + std::to_string(pick(0, 9));
        case 2:
            return var() + " * " + var();
        default:
            return std::to_string(pick(0, 9));
        }
    }

    std::string indent(int depth) { return std::string(static_cast<std::size_t>(depth) * 2, ' '); }

    std::string block(int depth)
    {
        std::string out = "{\n";
        int n = pick(0, 3);
        for (int i = 0; i < n && m_budget > 0; ++i)
            out += statement(depth + 1);
        return out + indent(depth) + "}";
    }

    std::string statement(int depth)
    {
        --m_budget;
        const std::string pad = indent(depth);
        int kind = pick(0, 9);
        if (depth > 3 && kind >= 5)
            kind = 0;
        switch (kind) {
        case 0:
        case 1:
            return pad + var() + " = " + expr() + ";\n";
        case 2:
            return pad + "int " + var() + " = " + expr() + ";\n";
        case 3:
            return pad + "print(" + var() + ");\n";
        case 4:
            if (m_returns && pick(0, 3) == 0)
                return pad + "return " + var() + ";\n";
            return pad + var() + " = " + var() + ";\n";
        case 5:
        case 6:
            return pad + "if (" + var() + " < " + expr() + ") " + block(depth) + "\n";
        case 7:
            return pad + "if (" + var() + " == " + var() + ") " + block(depth) + " else " + block(depth) + "\n";
        default:
            if (!m_loops)
                return pad + "if (" + var() + ") " + block(depth) + "\n";
            return pad + "while (" + var() + " < " + expr() + ") " + block(depth) + "\n";
        }
    }

    std::mt19937_64 m_rng;
    int m_budget = 0;
    bool m_loops = true;
    bool m_returns = true;
};

// ------------------------------------------------------- control dependence

/// Every path from `from` to `cfg.exit` passes through `through`.
inline bool post_dominates(const flow::IndexedCfg& cfg, std::size_t through, std::size_t from)
{
    if (through == from)
        return true;
    std::vector<bool> seen(cfg.size, false);
    std::vector<std::size_t> stack { from };
    seen[from] = true;
    seen[through] = true;
    while (!stack.empty()) {
        std::size_t n = stack.back();
        stack.pop_back();
        if (n == cfg.exit)
            return false;
        for (std::size_t s : cfg.succ[n])
            if (!seen[s]) {
                seen[s] = true;
                stack.push_back(s);
            }
    }
    return true;
}

/// n is control dependent on p iff some successor of p is post-dominated by
/// n while n does not strictly post-dominate p.
inline std::set<NodeLink> brute_force_cdg(const ControlFlow& flow_graph)
{
    const auto cfg = flow::index_cfg(flow_graph);
    const std::size_t n = flow_graph.nodes.size();
    std::set<NodeLink> out;
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t node = 0; node < n; ++node) {
            bool via_successor = std::any_of(cfg.succ[p].begin(), cfg.succ[p].end(),
                [&](std::size_t s) { return post_dominates(cfg, node, s); });
            bool strictly = node != p && post_dominates(cfg, node, p);
            if (via_successor && !strictly)
                out.insert({ flow_graph.nodes[p], flow_graph.nodes[node] });
        }
    return out;
}

// ---------------------------------------------------------- data dependence

/// Def-clear reachability: d reaches u for x if a path of length >= 1 runs
/// from d to u whose interior never redefines x.
inline std::set<NodeLink> brute_force_ddg(const LoweredFunction& func, const ControlFlow& flow_graph)
{
    std::map<NodeId, const StatementInfo*> info;
    for (const StatementInfo& s : func.statements)
        info[s.id] = &s;
    std::map<NodeId, std::vector<NodeId>> succ;
    for (const auto& [a, b] : flow_graph.edges)
        succ[a].push_back(b);

    std::set<NodeLink> out;
    for (NodeId d : flow_graph.nodes)
        for (const std::string& x : info[d]->defs)
            for (NodeId u : flow_graph.nodes) {
                if (!info[u]->uses.count(x))
                    continue;
                std::set<NodeId> seen;
                std::queue<NodeId> queue;
                for (NodeId s : succ[d])
                    if (seen.insert(s).second)
                        queue.push(s);
                bool found = false;
                while (!queue.empty() && !found) {
                    NodeId w = queue.front();
                    queue.pop();
                    if (w == u) {
                        found = true;
                        break;
                    }
                    if (info[w]->defs.count(x))
                        continue;
                    for (NodeId s : succ[w])
                        if (seen.insert(s).second)
                            queue.push(s);
                }
                if (found)
                    out.insert({ d, u });
            }
    return out;
}

inline bool is_acyclic(const ControlFlow& flow_graph)
{
    std::map<NodeId, std::vector<NodeId>> succ;
    for (const auto& [a, b] : flow_graph.edges)
        succ[a].push_back(b);
    std::map<NodeId, int> state;
    std::function<bool(NodeId)> dfs = [&](NodeId n) {
        state[n] = 1;
        for (NodeId s : succ[n]) {
            if (state[s] == 1)
                return false;
            if (state[s] == 0 && !dfs(s))
                return false;
        }
        state[n] = 2;
        return true;
    };
    for (NodeId n : flow_graph.nodes)
        if (state[n] == 0 && !dfs(n))
            return false;
    return true;
}

/// Enumerates every CFG path explicitly (acyclic graphs only) and records
/// each definition that arrives at a use along a def-clear path.
inline std::set<NodeLink> path_enumeration_ddg(const LoweredFunction& func, const ControlFlow& flow_graph)
{
    std::map<NodeId, const StatementInfo*> info;
    for (const StatementInfo& s : func.statements)
        info[s.id] = &s;
    std::map<NodeId, std::vector<NodeId>> succ;
    for (const auto& [a, b] : flow_graph.edges)
        succ[a].push_back(b);

    std::set<NodeLink> out;
    std::vector<NodeId> path;
    std::function<void(NodeId)> walk = [&](NodeId n) {
        path.push_back(n);
        // every suffix ending at n: does a def at path[i] reach n?
        const auto& uses = info[n]->uses;
        for (std::size_t i = 0; i + 1 < path.size(); ++i)
            for (const std::string& x : info[path[i]]->defs) {
                if (!uses.count(x))
                    continue;
                bool clear = true;
                for (std::size_t k = i + 1; k + 1 < path.size(); ++k)
                    if (info[path[k]]->defs.count(x))
                        clear = false;
                if (clear)
                    out.insert({ path[i], n });
            }
        for (NodeId s : succ[n])
            walk(s);
        path.pop_back();
    };
    for (NodeId start : flow_graph.entry_successors)
        walk(start);
    // statements unreachable from entry still start paths of their own
    std::set<NodeId> has_pred;
    for (const auto& [a, b] : flow_graph.edges)
        has_pred.insert(b);
    for (NodeId n : flow_graph.nodes)
        if (!has_pred.count(n) && std::find(flow_graph.entry_successors.begin(), flow_graph.entry_successors.end(), n)
                == flow_graph.entry_successors.end())
            walk(n);
    return out;
}

// ------------------------------------------------------------------ slicing

/// Set-comprehension form of the two-step slice.
inline std::pair<std::set<NodeId>, std::multiset<std::tuple<NodeId, NodeId, int, bool, bool>>> brute_force_slice(
    const CodeGraph& g, const std::set<NodeId>& v_change)
{
    auto sliceable = [](EdgeType t) { return t != EdgeType::Ast; };
    std::set<NodeId> step1 = v_change;
    std::vector<bool> keep(g.edges.size(), false);
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        const GraphEdge& e = g.edges[i];
        if (sliceable(e.type) && (v_change.count(e.src) || v_change.count(e.dst))) {
            keep[i] = true;
            step1.insert(e.src);
            step1.insert(e.dst);
        }
    }
    std::set<NodeId> nodes = step1;
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        const GraphEdge& e = g.edges[i];
        if (e.type == EdgeType::Ast && (step1.count(e.src) || step1.count(e.dst))) {
            keep[i] = true;
            nodes.insert(e.src);
            nodes.insert(e.dst);
        }
    }
    std::multiset<std::tuple<NodeId, NodeId, int, bool, bool>> edges;
    for (std::size_t i = 0; i < g.edges.size(); ++i)
        if (keep[i]) {
            const GraphEdge& e = g.edges[i];
            edges.insert({ e.src, e.dst, static_cast<int>(e.type), e.in_buggy, e.in_fixed });
        }
    return { nodes, edges };
}

inline std::multiset<std::tuple<NodeId, NodeId, int, bool, bool>> edge_multiset(const CodeGraph& g)
{
    std::multiset<std::tuple<NodeId, NodeId, int, bool, bool>> out;
    for (const GraphEdge& e : g.edges)
        out.insert({ e.src, e.dst, static_cast<int>(e.type), e.in_buggy, e.in_fixed });
    return out;
}

inline std::set<NodeId> node_ids(const CodeGraph& g)
{
    std::set<NodeId> out;
    for (const GraphNode& n : g.nodes)
        out.insert(n.id);
    return out;
}

// ----------------------------------------------------------- random graphs

/// Random versioned graph with mixed edge types; some nodes have empty code.
inline CodeGraph random_graph(std::mt19937_64& rng, int max_nodes, bool allow_empty_code = true)
{
    std::uniform_int_distribution<int> count(1, max_nodes);
    const int n = count(rng);
    const char* kinds[] = { "METHOD", "CALL", "IDENTIFIER", "LITERAL", "CONTROL_STRUCTURE", "RETURN", "BLOCK" };
    CodeGraph g;
    g.function_name = "fun1";
    for (int i = 0; i < n; ++i) {
        GraphNode node;
        node.id = i;
        node.version = static_cast<Version>(std::uniform_int_distribution<int>(0, 2)(rng));
        node.line = std::uniform_int_distribution<int>(1, 40)(rng);
        node.type = kinds[std::uniform_int_distribution<int>(0, 6)(rng)];
        bool empty = allow_empty_code && std::uniform_int_distribution<int>(0, 7)(rng) == 0;
        node.code = empty ? "" : "var" + std::to_string(std::uniform_int_distribution<int>(1, 9)(rng)) + " = \"x\"";
        g.nodes.push_back(node);
    }
    const int m = std::uniform_int_distribution<int>(0, 2 * n)(rng);
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int k = 0; k < m; ++k) {
        GraphEdge e;
        e.src = pick(rng);
        e.dst = pick(rng);
        e.type = static_cast<EdgeType>(std::uniform_int_distribution<int>(0, 3)(rng));
        int flags = std::uniform_int_distribution<int>(1, 3)(rng);
        e.in_buggy = flags & 1;
        e.in_fixed = flags & 2;
        g.edges.push_back(e);
    }
    return g;
}

inline MergedGraph random_merged(std::mt19937_64& rng, int max_nodes)
{
    MergedGraph m;
    m.graph = random_graph(rng, max_nodes, false);
    m.changed_nodes = identify_changed_nodes(m);
    return m;
}

// ------------------------------------------------------------ network

using Table = std::vector<std::vector<double>>;

inline Table table(const Mat& m)
{
    Table t(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            t[i][j] = m(i, j);
    return t;
}

inline Table product(const Table& a, const Table& b)
{
    Table out(a.size(), std::vector<double>(b.empty() ? 0 : b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < out[i].size(); ++j) {
            double s = 0;
            for (std::size_t k = 0; k < b.size(); ++k)
                s += a[i][k] * b[k][j];
            out[i][j] = s;
        }
    return out;
}

/// Straight-line ReLU(An H Wn + Eagg We + R) without the layer helper.
inline Table reference_layer(const Table& h, const Table& an, const Table& eagg, const Table& wn, const Table* we,
    const Table* proj)
{
    Table msg = product(an, product(h, wn));
    Table res = proj ? product(h, *proj) : h;
    Table edge;
    if (we)
        edge = product(eagg, *we);
    for (std::size_t i = 0; i < msg.size(); ++i)
        for (std::size_t j = 0; j < msg[i].size(); ++j) {
            double v = msg[i][j] + res[i][j] + (we ? edge[i][j] : 0.0);
            msg[i][j] = v > 0 ? v : 0;
        }
    return msg;
}

/// A residual GCN with the same head as the model: no edge term anywhere.
/// Pooling selection repeats the tie rule with its own sort.
inline std::vector<double> reference_gcn_logits(const ModelState& model, const GraphInput& in)
{
    const NegcnConfig& c = model.config();
    auto p = [&](const std::string& name) { return table(model.param(name).value); };
    const Table an = table(in.an);
    Table h = table(in.x);
    const std::size_t n = h.size();
    Table cat(n);
    for (std::size_t l = 1; l <= c.layers; ++l) {
        const std::string prefix = "layer" + std::to_string(l);
        if (l == 1) {
            const Table proj = p(prefix + ".proj");
            h = reference_layer(h, an, {}, p(prefix + ".wn"), nullptr, &proj);
        } else
            h = reference_layer(h, an, {}, p(prefix + ".wn"), nullptr, nullptr);
        for (std::size_t i = 0; i < n; ++i)
            cat[i].insert(cat[i].end(), h[i].begin(), h[i].end());
    }
    Table score = product(an, product(cat, p("pool.w")));
    const double b = model.param("pool.b").value(0, 0);
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < n; ++i)
        ranked.push_back({ -(score[i][0] + b), i });
    std::sort(ranked.begin(), ranked.end());
    const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(c.pool_ratio * static_cast<double>(n) - 1e-12)));
    const std::size_t width = cat[0].size();
    std::vector<double> mx(width, -1e300), mean(width, 0.0);
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t i = ranked[r].second;
        const double gate = std::tanh(score[i][0] + b);
        for (std::size_t j = 0; j < width; ++j) {
            mx[j] = std::max(mx[j], cat[i][j] * gate);
            mean[j] += cat[i][j] * gate / static_cast<double>(k);
        }
    }
    Table readout(1);
    readout[0] = mx;
    readout[0].insert(readout[0].end(), mean.begin(), mean.end());
    Table hidden = product(readout, p("mlp.w1"));
    const Table b1 = p("mlp.b1");
    for (std::size_t j = 0; j < hidden[0].size(); ++j)
        hidden[0][j] = std::max(0.0, hidden[0][j] + b1[0][j]);
    Table logits = product(hidden, p("mlp.w2"));
    const Table b2 = p("mlp.b2");
    for (std::size_t j = 0; j < logits[0].size(); ++j)
        logits[0][j] += b2[0][j];
    return logits[0];
}

/// Random embedded graph with n nodes, feature width d and mixed edges.
inline EmbeddedGraph random_embedded(std::mt19937_64& rng, std::size_t n, std::size_t d)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    EmbeddedGraph g;
    g.x = Mat(n, d);
    for (double& v : g.x.values())
        v = normal(rng);
    for (std::size_t i = 0; i < n; ++i)
        g.ids.push_back(static_cast<NodeId>(i));
    const std::size_t m = n + rng() % (2 * n);
    for (std::size_t k = 0; k < m; ++k) {
        GraphEdge e;
        e.src = static_cast<NodeId>(rng() % n);
        e.dst = static_cast<NodeId>(rng() % n);
        e.type = static_cast<EdgeType>(rng() % 4);
        const int flags = 1 + static_cast<int>(rng() % 3);
        e.in_buggy = flags & 1;
        e.in_fixed = flags & 2;
        g.edges.emplace_back(static_cast<std::size_t>(e.src), static_cast<std::size_t>(e.dst));
        const auto f = embed_edge(e);
        Mat grown(g.e.rows() + 1, 6);
        std::copy(g.e.data(), g.e.data() + g.e.size(), grown.data());
        std::copy(f.begin(), f.end(), grown.row(g.e.rows()));
        g.e = std::move(grown);
    }
    if (g.edges.empty())
        g.e = Mat(0, 6);
    return g;
}

} // namespace grape::testing
