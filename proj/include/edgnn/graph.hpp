#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace edgnn {

/// Bidirectional map between raw label strings and compact ids.
/// Ids are assigned in first-seen order and never change.
class LabelDict {
public:
    int intern(const std::string& name);
    std::optional<int> find(const std::string& name) const;
    const std::string& name(int id) const;
    int size() const { return static_cast<int>(names_.size()); }
    bool operator==(const LabelDict& other) const { return names_ == other.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> ids_;
};

/// Shared node/edge label vocabulary. Kept corpus-global so that one-hot
/// feature widths agree across all graphs of a dataset.
struct LabelVocab {
    LabelDict node_labels;
    LabelDict edge_labels;
};

struct Edge {
    int src = 0;
    int dst = 0;
    int label = 0;
    bool operator==(const Edge&) const = default;
};

enum class Direction { in, out, both };

/// Per-vertex, per-direction counts of incident edge labels.
/// Entries are strictly ascending by label id, counts >= 1.
struct EdgeHistogram {
    std::vector<std::pair<int, int>> entries;  // (edge_label_id, count)
    bool operator==(const EdgeHistogram&) const = default;
};

/// Immutable directed multigraph with categorical node and edge labels.
/// Parallel edges and self-loops are permitted; a self-loop is a single
/// incident edge (it appears once in the in-list and once in the out-list).
class Graph {
public:
    Graph() = default;
    Graph(int num_nodes, std::vector<int> node_labels, std::vector<Edge> edges,
          std::shared_ptr<const LabelVocab> vocab);

    int num_nodes() const { return num_nodes_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    const std::vector<Edge>& edges() const { return edges_; }
    const Edge& edge(int e) const { return edges_[static_cast<std::size_t>(e)]; }
    int node_label(int v) const;
    const std::vector<int>& node_labels() const { return node_labels_; }

    /// Edge indices incident to v, ascending.
    std::span<const int> in_edges(int v) const;
    std::span<const int> out_edges(int v) const;

    int in_degree(int v) const { return static_cast<int>(in_edges(v).size()); }
    int out_degree(int v) const { return static_cast<int>(out_edges(v).size()); }

    const std::shared_ptr<const LabelVocab>& vocab() const { return vocab_; }

    /// Invokes fn(neighbor, edge_index) once per incident edge, in-edges
    /// first then out-edges, each list ascending. Self-loops fire once.
    template <class Fn>
    void for_each_neighbor(int v, Fn&& fn) const {
        for (int e : in_edges(v)) fn(edges_[static_cast<std::size_t>(e)].src, e);
        for (int e : out_edges(v)) {
            const Edge& ed = edges_[static_cast<std::size_t>(e)];
            if (ed.dst != v) fn(ed.dst, e);
        }
    }

    /// Field-by-field equality ignoring vocab pointer identity (label
    /// dictionaries are compared by content).
    bool structurally_equal(const Graph& other) const;

private:
    void check_node(int v) const;

    int num_nodes_ = 0;
    std::vector<int> node_labels_;
    std::vector<Edge> edges_;
    std::vector<int> in_offsets_{0}, in_index_;
    std::vector<int> out_offsets_{0}, out_index_;
    std::shared_ptr<const LabelVocab> vocab_;
};

/// Constructs a graph from raw label strings, interning them into a fresh
/// vocabulary in first-seen order (node labels first by node order, edge
/// labels by edge order).
Graph build_graph(int num_nodes, const std::vector<std::string>& node_labels,
                  const std::vector<std::tuple<int, int, std::string>>& edges);

/// Neighbor multiset of v as a sorted vector, one occurrence per incident
/// edge. `both` covers all incident edges (self-loops once).
std::vector<int> neighborhood(const Graph& g, int v, Direction dir);

/// Histogram of incident edge labels; dir must be `in` or `out`.
EdgeHistogram edge_histogram(const Graph& g, int v, Direction dir);

/// Adds, for each edge (u,v,e), a reversed edge (v,u,e_rev) where e_rev is
/// a fresh "<label>_rev" id. The edge-label dictionary exactly doubles and
/// rev(e) == e + num_original_labels; original edges keep their indices.
Graph reverse_augment(const Graph& g);

/// Relabels nodes through a bijection: node v moves to perm[v], labels and
/// edge endpoints follow. The result is isomorphic to g by construction.
Graph permute(const Graph& g, const std::vector<int>& perm);

/// Disjoint union; the right graph's nodes are shifted by a.num_nodes().
/// Vocabularies are merged by label string when they differ.
Graph disjoint_union(const Graph& a, const Graph& b);

/// Disjoint union of many graphs sharing one vocabulary object.
Graph disjoint_union(const std::vector<const Graph*>& parts);

}  // namespace edgnn
