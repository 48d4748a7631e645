#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "edgnn/graph.hpp"

namespace edgnn {

struct DatasetStats {
    int num_graphs = 0;
    int num_classes = 0;
    int num_node_labels = 0;
    int num_edge_labels = 0;
    double avg_nodes = 0.0;
    /// Average undirected bond count per graph (directed edges / 2).
    double avg_bonds = 0.0;
    double avg_directed_edges = 0.0;
};

/// A graph-classification corpus with shared label dictionaries.
struct GraphDataset {
    std::vector<Graph> graphs;
    std::vector<int> graph_labels;
    LabelDict class_dict;
    std::shared_ptr<const LabelVocab> vocab;

    DatasetStats stats() const;
};

/// Reads the comma-separated, 1-based adjacency corpus layout:
/// <DS>_A.txt, <DS>_graph_indicator.txt, <DS>_graph_labels.txt,
/// <DS>_node_labels.txt, <DS>_edge_labels.txt. The prefix <DS> is inferred
/// from the *_A.txt file present in the directory. Each undirected bond is
/// stored as both of its orientations, which load as two directed edges.
GraphDataset load_tu_dataset(const std::filesystem::path& dir);

void save_tu_dataset(const GraphDataset& ds, const std::filesystem::path& dir,
                     const std::string& prefix);

/// A node-classification task over one knowledge graph.
struct NodeTask {
    Graph graph;  // reverse-augmented when `reversed` is set
    std::vector<std::pair<int, int>> train_nodes, test_nodes;  // (node, class)
    LabelDict class_dict;
    LabelDict entity_dict;
    int num_entities = 0;
    int num_triples = 0;
    int num_relations = 0;  // before reversal
    bool reversed = false;
};

/// Loads a tab-separated triple file (subject, relation, object per row)
/// plus train/test label files (node, class per row). Entities and
/// relations are interned in first-seen order; with reverse set, every
/// edge gains a reversed twin carrying a fresh "<relation>_rev" label.
NodeTask load_triples_task(const std::filesystem::path& triples,
                           const std::filesystem::path& train,
                           const std::filesystem::path& test, bool reverse);

struct Fold {
    std::vector<int> train, val, test;
};

struct FoldPlan {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<Fold> folds;
};

/// Stratified k-fold split; within each training portion, 10% per class
/// (at least one graph) is held out as the validation set.
FoldPlan kfold_split(const GraphDataset& ds, int k, std::uint64_t seed);

std::string fold_plan_to_json(const FoldPlan& plan);

/// The classic 1-WL blind spot: C_n versus two disjoint C_{n/2}, uniform
/// labels. Requires even n >= 6.
std::pair<Graph, Graph> gen_wl_hard_pair(int n);

/// G(n, p) digraph over all ordered pairs (no self-loops), labels drawn
/// uniformly from num_node_labels / num_edge_labels.
Graph gen_random_graph(int n, double p, int num_node_labels, int num_edge_labels,
                       std::uint64_t seed);

/// Single-graph JSON files ({"nodes": [labels...], "edges": [[u,v,label]...]})
/// used by the CLI's pairwise test.
Graph load_graph_json(const std::filesystem::path& path);
void save_graph_json(const Graph& g, const std::filesystem::path& path);

}  // namespace edgnn
