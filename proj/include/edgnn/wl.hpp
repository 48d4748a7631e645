#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "edgnn/graph.hpp"

namespace edgnn {

enum class WlVariant { undirected, directed_labeled };

/// Vertex color assignment after `step` refinement rounds. Color ids are
/// compact (0..num_colors-1, each used at least once) and canonical: new
/// ids follow the lexicographic order of signature encodings, so equal
/// graphs always produce identical id sequences.
struct Coloring {
    std::vector<int> colors;
    int num_colors = 0;
    int step = 0;
};

struct RefinementResult {
    std::vector<Coloring> history;  // t = 0..stable_at
    int stable_at = 0;
};

enum class WlVerdict { NonIsomorphic, PossiblyIsomorphic };

struct WlTestResult {
    WlVerdict verdict = WlVerdict::PossiblyIsomorphic;
    /// Step of the first per-graph histogram mismatch, or the step at which
    /// the joint coloring became stable.
    int decided_at_step = 0;
    /// Joint colorings of the disjoint union (rows [0, nodes_a) = graph a).
    std::vector<Coloring> joint_history;
    int nodes_a = 0;
};

/// Colors equal node labels, recompacted to 0..k-1 in ascending label-id
/// order; step = 0.
Coloring initial_coloring(const Graph& g);

/// One refinement round. The signature of v is (own color, sorted neighbor
/// color multiset over all incident edges) and, for directed_labeled, the
/// in- and out- edge-label histograms. Signatures are relabeled to compact
/// ids through a per-step dictionary in lexicographic signature order, so
/// the hash is injective by construction.
Coloring wl_step(const Graph& g, const Coloring& c, WlVariant variant);

/// Canonical byte-level encodings fed to the per-step dictionary; distinct
/// tuples yield distinct encodings (fields are length-prefixed).
std::vector<std::vector<std::int32_t>> wl_signatures(const Graph& g, const Coloring& c,
                                                     WlVariant variant);

/// Iterates wl_step until the induced partition stops changing; the history
/// includes the first repeated partition.
RefinementResult refine_to_stable(const Graph& g, WlVariant variant);

/// Joint refinement on the disjoint union with shared color ids; returns
/// NonIsomorphic at the first per-graph color histogram mismatch (including
/// node-count or initial label-multiset mismatches), otherwise
/// PossiblyIsomorphic once the joint coloring is stable.
WlTestResult wl_isomorphism_test(const Graph& a, const Graph& b, WlVariant variant);

std::map<int, int> color_histogram(const Coloring& c, std::span<const int> nodes);

/// True iff every color class of a is contained in some class of b.
bool partition_refines(const Coloring& a, const Coloring& b);

/// True iff a and b induce the same vertex partition (ids may differ).
bool same_partition(const Coloring& a, const Coloring& b);

}  // namespace edgnn
