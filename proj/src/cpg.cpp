#include <grape/cpg.hpp>
#include <grape/errors.hpp>

#include <algorithm>
#include <map>

namespace grape {

namespace {

constexpr NodeId entry_marker = -1;

void collect_identifiers(const mini::AstNode& node, std::set<std::string>& out)
{
    if (node.kind == mini::NodeKind::Identifier)
        out.insert(node.name);
    for (const mini::AstNode& child : node.children)
        collect_identifiers(child, out);
}

StatementInfo statement_info(const mini::AstNode& s)
{
    using mini::NodeKind;
    StatementInfo info { s.id, {}, {} };
    switch (s.kind) {
    case NodeKind::Local:
        info.defs.insert(s.name);
        if (s.children.size() > 1)
            collect_identifiers(s.children[1], info.uses);
        break;
    case NodeKind::Assign:
        info.defs.insert(s.name);
        collect_identifiers(s.children[1], info.uses);
        break;
    case NodeKind::If:
    case NodeKind::While:
        collect_identifiers(s.children[0], info.uses);
        break;
    default:
        collect_identifiers(s, info.uses);
        break;
    }
    return info;
}

class Lowering {
public:
    Lowering(NodeId first_id, Version version)
        : m_next(first_id)
        , m_version(version)
    {
    }

    void visit(mini::AstNode& node, NodeId parent, bool statement_position)
    {
        node.id = m_next++;
        m_graph.nodes.push_back(GraphNode { node.id, m_version, node.line, std::string(mini::cpg_kind(node.kind)), node.code });
        if (parent != entry_marker)
            m_graph.edges.push_back(GraphEdge { parent, node.id, EdgeType::Ast, m_version != Version::Fixed, m_version != Version::Buggy });

        const bool is_stmt = statement_position && node.kind != mini::NodeKind::Block;
        if (is_stmt)
            m_statements.push_back(statement_info(node));

        for (std::size_t i = 0; i < node.children.size(); ++i) {
            bool child_stmt = false;
            switch (node.kind) {
            case mini::NodeKind::Block:
                child_stmt = true;
                break;
            case mini::NodeKind::If:
            case mini::NodeKind::While:
                child_stmt = i > 0;
                break;
            default:
                break;
            }
            visit(node.children[i], node.id, child_stmt);
        }
    }

    CodeGraph take_graph() { return std::move(m_graph); }
    std::vector<StatementInfo> take_statements() { return std::move(m_statements); }

private:
    NodeId m_next;
    Version m_version;
    CodeGraph m_graph;
    std::vector<StatementInfo> m_statements;
};

void append_unique(std::vector<NodeId>& into, const std::vector<NodeId>& from)
{
    for (NodeId id : from)
        if (std::find(into.begin(), into.end(), id) == into.end())
            into.push_back(id);
}

class FlowBuilder {
public:
    explicit FlowBuilder(ControlFlow& cfg)
        : m_cfg(cfg)
    {
    }

    void link(const std::vector<NodeId>& pending, NodeId target)
    {
        for (NodeId p : pending) {
            if (p == entry_marker)
                m_cfg.entry_successors.push_back(target);
            else
                m_cfg.edges.insert({ p, target });
        }
    }

    void statement(const mini::AstNode& s, std::vector<NodeId>& pending)
    {
        using mini::NodeKind;
        switch (s.kind) {
        case NodeKind::Block:
            for (const mini::AstNode& child : s.children)
                statement(child, pending);
            return;
        case NodeKind::If: {
            link(pending, s.id);
            m_cfg.nodes.push_back(s.id);
            std::vector<NodeId> then_exits { s.id };
            statement(s.children[1], then_exits);
            std::vector<NodeId> else_exits { s.id };
            if (s.children.size() > 2)
                statement(s.children[2], else_exits);
            pending = then_exits;
            append_unique(pending, else_exits);
            return;
        }
        case NodeKind::While: {
            link(pending, s.id);
            m_cfg.nodes.push_back(s.id);
            std::vector<NodeId> body_exits { s.id };
            statement(s.children[1], body_exits);
            link(body_exits, s.id);
            pending = { s.id };
            return;
        }
        case NodeKind::Return:
            link(pending, s.id);
            m_cfg.nodes.push_back(s.id);
            m_cfg.exit_predecessors.insert(s.id);
            pending.clear();
            return;
        default:
            link(pending, s.id);
            m_cfg.nodes.push_back(s.id);
            pending = { s.id };
            return;
        }
    }

private:
    ControlFlow& m_cfg;
};

} // namespace

LoweredFunction lower_function(const mini::AstNode& method, NodeId first_id, Version version)
{
    if (method.kind != mini::NodeKind::Method)
        throw ContractError("lower_function expects a METHOD node");
    LoweredFunction out;
    out.name = method.name;
    out.root = method;
    Lowering lowering(first_id, version);
    lowering.visit(out.root, entry_marker, false);
    out.ast = lowering.take_graph();
    out.ast.function_name = method.name;
    out.statements = lowering.take_statements();
    return out;
}

ControlFlow build_cfg(const LoweredFunction& func)
{
    ControlFlow cfg;
    FlowBuilder builder(cfg);
    std::vector<NodeId> pending { entry_marker };
    builder.statement(func.root.children.back(), pending);
    for (NodeId p : pending)
        if (p != entry_marker)
            cfg.exit_predecessors.insert(p);
    return cfg;
}

namespace flow {

IndexedCfg index_cfg(const ControlFlow& cfg)
{
    IndexedCfg out;
    const std::size_t n = cfg.nodes.size();
    out.size = n + 2;
    out.entry = n;
    out.exit = n + 1;
    out.succ.assign(out.size, {});
    std::map<NodeId, std::size_t> pos;
    for (std::size_t i = 0; i < n; ++i)
        pos.emplace(cfg.nodes[i], i);
    for (const auto& [a, b] : cfg.edges)
        out.succ[pos.at(a)].push_back(pos.at(b));
    for (NodeId s : cfg.entry_successors)
        out.succ[out.entry].push_back(pos.at(s));
    if (cfg.entry_successors.empty())
        out.succ[out.entry].push_back(out.exit);
    for (NodeId p : cfg.exit_predecessors)
        out.succ[pos.at(p)].push_back(out.exit);
    return out;
}

std::vector<std::size_t> immediate_post_dominators(const IndexedCfg& cfg)
{
    const std::size_t n = cfg.size;
    std::vector<std::vector<std::size_t>> pred(n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b : cfg.succ[a])
            pred[b].push_back(a);

    // Postorder of the reverse graph rooted at exit.
    std::vector<std::size_t> order;
    std::vector<std::size_t> number(n, npos);
    std::vector<bool> seen(n, false);
    std::vector<std::pair<std::size_t, std::size_t>> stack { { cfg.exit, 0 } };
    seen[cfg.exit] = true;
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < pred[node].size()) {
            std::size_t p = pred[node][next++];
            if (!seen[p]) {
                seen[p] = true;
                stack.push_back({ p, 0 });
            }
        } else {
            number[node] = order.size();
            order.push_back(node);
            stack.pop_back();
        }
    }

    std::vector<std::size_t> ipdom(n, npos);
    ipdom[cfg.exit] = cfg.exit;
    auto intersect = [&](std::size_t a, std::size_t b) {
        while (a != b) {
            while (number[a] < number[b])
                a = ipdom[a];
            while (number[b] < number[a])
                b = ipdom[b];
        }
        return a;
    };

    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t k = order.size(); k-- > 0;) {
            std::size_t node = order[k];
            if (node == cfg.exit)
                continue;
            std::size_t candidate = npos;
            for (std::size_t s : cfg.succ[node]) {
                if (ipdom[s] == npos)
                    continue;
                candidate = candidate == npos ? s : intersect(s, candidate);
            }
            if (candidate != ipdom[node]) {
                ipdom[node] = candidate;
                changed = true;
            }
        }
    }
    ipdom[cfg.exit] = npos;
    return ipdom;
}

std::set<std::pair<std::size_t, std::size_t>> control_dependences(const IndexedCfg& cfg)
{
    const auto ipdom = immediate_post_dominators(cfg);
    std::set<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t a = 0; a < cfg.size; ++a) {
        if (a != cfg.exit && ipdom[a] == npos)
            continue;
        for (std::size_t b : cfg.succ[a]) {
            std::size_t runner = b;
            while (runner != npos && runner != ipdom[a] && runner != cfg.exit) {
                out.insert({ a, runner });
                runner = ipdom[runner];
            }
        }
    }
    return out;
}

} // namespace flow

std::set<NodeLink> build_cdg(const LoweredFunction&, const ControlFlow& cfg)
{
    const auto indexed = flow::index_cfg(cfg);
    std::set<NodeLink> out;
    for (const auto& [p, n] : flow::control_dependences(indexed)) {
        if (p == indexed.entry || p == indexed.exit || n >= cfg.nodes.size())
            continue;
        out.insert({ cfg.nodes[p], cfg.nodes[n] });
    }
    return out;
}

std::set<NodeLink> build_ddg(const LoweredFunction& func, const ControlFlow& cfg)
{
    const auto indexed = flow::index_cfg(cfg);
    const std::size_t n = cfg.nodes.size();

    std::map<NodeId, const StatementInfo*> info;
    for (const StatementInfo& s : func.statements)
        info.emplace(s.id, &s);

    struct Definition {
        std::size_t stmt;
        std::string var;
    };
    std::vector<Definition> defs;
    std::vector<std::vector<std::size_t>> gen(n);
    for (std::size_t i = 0; i < n; ++i)
        for (const std::string& v : info.at(cfg.nodes[i])->defs) {
            gen[i].push_back(defs.size());
            defs.push_back({ i, v });
        }

    std::vector<std::vector<std::size_t>> pred(indexed.size);
    for (std::size_t a = 0; a < indexed.size; ++a)
        for (std::size_t b : indexed.succ[a])
            pred[b].push_back(a);

    const std::size_t d = defs.size();
    std::vector<std::vector<bool>> in(n, std::vector<bool>(d, false));
    std::vector<std::vector<bool>> out(n, std::vector<bool>(d, false));

    auto transfer = [&](std::size_t i) {
        std::vector<bool> result(d, false);
        const auto& killed = info.at(cfg.nodes[i])->defs;
        for (std::size_t k = 0; k < d; ++k)
            if (in[i][k] && !killed.count(defs[k].var))
                result[k] = true;
        for (std::size_t k : gen[i])
            result[k] = true;
        return result;
    };

    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<bool> merged(d, false);
            for (std::size_t p : pred[i])
                if (p < n)
                    for (std::size_t k = 0; k < d; ++k)
                        merged[k] = merged[k] || out[p][k];
            in[i] = std::move(merged);
            auto next = transfer(i);
            if (next != out[i]) {
                out[i] = std::move(next);
                changed = true;
            }
        }
    }

    std::set<NodeLink> edges;
    for (std::size_t u = 0; u < n; ++u) {
        const auto& uses = info.at(cfg.nodes[u])->uses;
        for (std::size_t k = 0; k < d; ++k)
            if (in[u][k] && uses.count(defs[k].var))
                edges.insert({ cfg.nodes[defs[k].stmt], cfg.nodes[u] });
    }
    return edges;
}

std::vector<CodeGraph> build_cpg(std::string_view source, Version version)
{
    const auto functions = mini::parse_mini(source);
    const bool in_buggy = version != Version::Fixed;
    const bool in_fixed = version != Version::Buggy;

    std::vector<CodeGraph> graphs;
    NodeId next_id = 0;
    for (const mini::AstNode& method : functions) {
        LoweredFunction lowered = lower_function(method, next_id, version);
        next_id += static_cast<NodeId>(lowered.ast.nodes.size());

        const ControlFlow cfg = build_cfg(lowered);
        CodeGraph g = std::move(lowered.ast);
        for (const auto& [a, b] : cfg.edges)
            g.edges.push_back({ a, b, EdgeType::Cfg, in_buggy, in_fixed });
        for (const auto& [a, b] : build_cdg(lowered, cfg))
            g.edges.push_back({ a, b, EdgeType::Cdg, in_buggy, in_fixed });
        for (const auto& [a, b] : build_ddg(lowered, cfg))
            g.edges.push_back({ a, b, EdgeType::Ddg, in_buggy, in_fixed });
        graphs.push_back(std::move(g));
    }
    return graphs;
}

} // namespace grape
