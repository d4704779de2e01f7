// Merging buggy and fixed CPGs, slicing around the changed nodes, and
// simplification into the final merged code property graph (MCPG).
#pragma once

#include <grape/graph.hpp>
#include <grape/normalize.hpp>

#include <map>
#include <set>
#include <vector>

namespace grape {

/// buggy node id -> fixed node id. Injective.
using Correspondence = std::map<NodeId, NodeId>;

struct MergedGraph {
    CodeGraph graph;
    std::set<NodeId> changed_nodes;
};

/// Pairs nodes whose (type, code, AST ancestor path) keys are equal; ties
/// inside a key group are paired in line order.
Correspondence match_nodes(const CodeGraph& g_fixed, const CodeGraph& g_buggy);

/// Fixed nodes take ids 0..|V_fixed|-1 in id order; unmatched buggy nodes
/// continue from there. Edges present in both versions are stored once with
/// both flags. Throws IntegrityError for dangling correspondence entries.
MergedGraph merge(const CodeGraph& g_fixed, const CodeGraph& g_buggy, const Correspondence& correspondence);

/// Nodes whose version is not `both`.
std::set<NodeId> identify_changed_nodes(const MergedGraph& m);

/// One-hop forward/backward slice over CDG, DDG and CFG edges from every
/// changed node, followed by one round of AST closure around the slice
/// nodes found so far. Changed nodes are always part of the slice.
CodeGraph slice(const MergedGraph& m, const std::set<NodeId>& v_change);

/// Drops empty-code nodes, then isolated nodes, then dangling edges, until
/// nothing changes.
CodeGraph simplify(const CodeGraph& g);

/// Disjoint union with ids renumbered to 0..N-1 in input order.
CodeGraph unite(const std::vector<CodeGraph>& graphs, const std::string& name);

/// Full construction for one normalized patch: per-file CPGs, function
/// pairing by name, merge, slice and simplify. Functions without changed
/// nodes (or, when the diff lists the file, without lines in the diff) are
/// skipped. The result may be empty.
CodeGraph build_patch_mcpg(const SourcePair& pair);

/// Same, from already-built per-function graphs of both versions.
CodeGraph build_mcpg_from_graphs(const std::vector<CodeGraph>& buggy, const std::vector<CodeGraph>& fixed,
    const PatchDiff* diff = nullptr);

} // namespace grape
