#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "edgnn/graph.hpp"
#include "edgnn/tensor.hpp"

namespace edgnn {

enum class FeatureScheme { one_hot_label, one_hot_in_degree };

/// Corpus-global input feature space. Dictionaries are closed once built:
/// a label or in-degree never seen at construction raises at encode time.
struct FeatureSpace {
    FeatureScheme scheme = FeatureScheme::one_hot_label;
    int width = 0;
    std::map<int, int> degree_to_bucket;  // one_hot_in_degree only

    static FeatureSpace labels(const LabelVocab& vocab);
    static FeatureSpace in_degrees(const Graph& g);
    int bucket_of(const Graph& g, int v) const;
};

/// Row v is the basis vector of v's label (or in-degree bucket), realizing
/// f(0)(v) == f(0)(u) iff the inputs carry equal labels.
Tensor init_node_features(const Graph& g, const FeatureSpace& space);

enum class EdgeFeatureMode { one_hot, learned };

struct EdgeEmbeddingTable {
    Tensor table;  // num_edge_labels x dim
    EdgeFeatureMode mode = EdgeFeatureMode::one_hot;

    int dim() const { return table.cols(); }
    static EdgeEmbeddingTable one_hot(int num_edge_labels);
    static EdgeEmbeddingTable learned(int num_edge_labels, int dim, Rng& rng);
};

/// Four-matrix message-passing layer: self, neighbor sum, incoming-edge
/// sum, outgoing-edge sum, ReLU on the combined update.
struct EdGNNLayer {
    Tensor w1, w2;  // d_in x d_out
    Tensor w3, w4;  // d_E x d_out
};

enum class TaskKind { graph, node };

struct EdGNNModel {
    std::vector<EdGNNLayer> layers;
    EdgeEmbeddingTable edge_table;
    Tensor cls_w, cls_b;
    TaskKind task = TaskKind::graph;
    int input_dim = 0;
    int hidden_dim = 0;
    int num_classes = 0;
    double dropout = 0.0;

    /// Trainable tensors in a fixed order (layer w1..w4 per layer, then
    /// classifier weight and bias, then the edge table when learned).
    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;

    /// Classifier input width: hidden for the node task, sum of all
    /// per-step widths (input included) for the graph task.
    int classifier_input_dim() const;

    static EdGNNModel make(TaskKind task, int input_dim, int hidden_dim, int num_layers,
                           int num_edge_labels, int num_classes, EdgeFeatureMode edge_mode,
                           double dropout, Rng& rng);
};

/// Glorot-uniform init: U(-sqrt(6/(fan_in+fan_out)), +...), row-major order.
Tensor glorot(int rows, int cols, Rng& rng);

/// |V| x num_edge_labels matrix of incident edge-label counts per vertex;
/// with one-hot edge features this equals the edge-embedding sum exactly.
Tensor edge_label_counts(const Graph& g, Direction dir);

/// Per-vertex sums of incident edge embeddings (S_in, S_out). These are
/// loop invariants of the layer stack: the labels never change across
/// iterations, so the sums are computed once per graph.
std::pair<Tensor, Tensor> precompute_edge_sums(const Graph& g, const EdgeEmbeddingTable& table);

/// Both-direction neighbor row plan (one entry per incident edge).
GatherPlan neighbor_plan(const Graph& g);

/// Per-layer weight handles already registered on a tape.
struct LayerHandles {
    Tensor w1, w2, w3, w4;
};

/// sigma(f W1 + (sum over neighbors of f) W2 + S_in W3 + S_out W4).
/// When pre_activation is non-null it receives the summed update before the
/// nonlinearity (used by gradient checks to stay away from the ReLU kink).
Tensor layer_forward(Tape& tape, const LayerHandles& w, const GatherPlan& neighbors,
                     const Tensor& f_prev, const Tensor& s_in, const Tensor& s_out,
                     Tensor* pre_activation = nullptr);

/// Same map computed through the concatenated form: f_Y = [f | S_in | S_out]
/// against the vertically stacked [W1; W3; W4]. Agrees with layer_forward to
/// floating-point reassociation error.
Tensor layer_forward_concat(Tape& tape, const LayerHandles& w, const GatherPlan& neighbors,
                            const Tensor& f_prev, const Tensor& s_in, const Tensor& s_out);

/// Concatenated per-graph node sums of every refinement step's features
/// (step 0 included): one row per graph, width = sum of feature widths.
Tensor graph_readout(Tape& tape, const std::vector<Tensor>& per_layer_features,
                     const std::vector<int>& graph_segments, int num_graphs);

/// Everything model_forward needs, precomputed from a graph or a disjoint
/// union of graphs.
struct Batch {
    GatherPlan neighbors;
    Tensor f0;                        // |V| x d0
    Tensor counts_in, counts_out;     // |V| x num_edge_labels
    std::vector<int> graph_segments;  // graph task: node -> graph
    int num_graphs = 0;
    std::vector<int> target_rows;     // node task: labeled rows
    std::vector<int> targets;         // class per graph / per labeled row
};

Batch make_batch(const Graph& g, const FeatureSpace& space);

struct ForwardResult {
    Tensor logits;
    /// Watched handles aligned with EdGNNModel::params() order.
    std::vector<Tensor> param_handles;
    /// Features per step, t = 0..T (post-dropout in train mode).
    std::vector<Tensor> features;
    /// Per-layer pre-activations (values only, one per layer).
    std::vector<Tensor> pre_activations;
};

ForwardResult model_forward(Tape& tape, const EdGNNModel& model, const Batch& batch,
                            bool train_mode, Rng& rng);

/// Binary checkpoint: "EDGN" magic, version, architecture fields, then each
/// tensor as (rows, cols, row-major little-endian f64 payload).
void save_checkpoint(const EdGNNModel& model, const std::string& path);
EdGNNModel load_checkpoint(const std::string& path);

}  // namespace edgnn
