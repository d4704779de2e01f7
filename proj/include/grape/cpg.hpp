// Per-function code property graphs: AST, control flow, control dependence
// and data dependence over one shared node set.
#pragma once

#include <grape/graph.hpp>
#include <grape/mini.hpp>

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace grape {

/// Definitions and uses of one statement node.
struct StatementInfo {
    NodeId id;
    std::set<std::string> defs;
    std::set<std::string> uses;
};

/// A function AST with graph ids assigned in preorder.
struct LoweredFunction {
    std::string name;
    CodeGraph ast; // AST nodes and AST edges only
    /// CFG-level statements in source order.
    std::vector<StatementInfo> statements;
    /// The parsed AST the ids were assigned from.
    mini::AstNode root;
};

/// Assigns ids first_id, first_id+1, ... in preorder.
LoweredFunction lower_function(const mini::AstNode& method, NodeId first_id = 0, Version version = Version::Both);

using NodeLink = std::pair<NodeId, NodeId>;

/// Statement-level control flow. Entry and exit are virtual: they are not
/// graph nodes and never appear in `edges`.
struct ControlFlow {
    std::vector<NodeId> nodes;
    std::set<NodeLink> edges;
    std::vector<NodeId> entry_successors;
    std::set<NodeId> exit_predecessors;
};

ControlFlow build_cfg(const LoweredFunction& func);

/// Control dependences among statements (dependences on the virtual entry
/// are dropped). Uses post-dominators of the CFG.
std::set<NodeLink> build_cdg(const LoweredFunction& func, const ControlFlow& cfg);

/// d -> u for every definition d reaching a use at u (kill semantics).
std::set<NodeLink> build_ddg(const LoweredFunction& func, const ControlFlow& cfg);

/// One CodeGraph per function; ids are unique across the whole file.
/// Node versions and edge flags reflect `version`.
std::vector<CodeGraph> build_cpg(std::string_view source, Version version = Version::Both);

namespace flow {

/// Dense CFG over indices 0..size-1 with distinguished entry and exit.
struct IndexedCfg {
    std::size_t size = 0;
    std::vector<std::vector<std::size_t>> succ;
    std::size_t entry = 0;
    std::size_t exit = 0;
};

constexpr std::size_t npos = static_cast<std::size_t>(-1);

/// Converts statement-level flow to an IndexedCfg: statement i of
/// `cfg.nodes` is index i, entry is nodes.size(), exit nodes.size()+1.
IndexedCfg index_cfg(const ControlFlow& cfg);

/// Immediate post-dominator per node (npos for exit and for nodes that
/// cannot reach exit).
std::vector<std::size_t> immediate_post_dominators(const IndexedCfg& cfg);

/// (p, n) pairs where n is control dependent on p.
std::set<std::pair<std::size_t, std::size_t>> control_dependences(const IndexedCfg& cfg);

} // namespace flow

} // namespace grape
