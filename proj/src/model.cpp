#include "edgnn/model.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace edgnn {

FeatureSpace FeatureSpace::labels(const LabelVocab& vocab) {
    FeatureSpace s;
    s.scheme = FeatureScheme::one_hot_label;
    s.width = vocab.node_labels.size();
    return s;
}

FeatureSpace FeatureSpace::in_degrees(const Graph& g) {
    FeatureSpace s;
    s.scheme = FeatureScheme::one_hot_in_degree;
    for (int v = 0; v < g.num_nodes(); ++v) s.degree_to_bucket.emplace(g.in_degree(v), 0);
    int next = 0;
    for (auto& [deg, bucket] : s.degree_to_bucket) bucket = next++;
    s.width = next;
    return s;
}

int FeatureSpace::bucket_of(const Graph& g, int v) const {
    if (scheme == FeatureScheme::one_hot_label) {
        int l = g.node_label(v);
        if (l >= width)
            throw std::out_of_range("FeatureSpace: node label id " + std::to_string(l) +
                                    " outside closed dictionary of width " + std::to_string(width));
        return l;
    }
    auto it = degree_to_bucket.find(g.in_degree(v));
    if (it == degree_to_bucket.end())
        throw std::out_of_range("FeatureSpace: in-degree " + std::to_string(g.in_degree(v)) +
                                " of node " + std::to_string(v) + " was not seen at load time");
    return it->second;
}

Tensor init_node_features(const Graph& g, const FeatureSpace& space) {
    Tensor f(g.num_nodes(), space.width);
    for (int v = 0; v < g.num_nodes(); ++v) f(v, space.bucket_of(g, v)) = 1.0;
    return f;
}

EdgeEmbeddingTable EdgeEmbeddingTable::one_hot(int num_edge_labels) {
    EdgeEmbeddingTable t;
    t.mode = EdgeFeatureMode::one_hot;
    t.table = Tensor(num_edge_labels, num_edge_labels);
    for (int i = 0; i < num_edge_labels; ++i) t.table(i, i) = 1.0;
    return t;
}

EdgeEmbeddingTable EdgeEmbeddingTable::learned(int num_edge_labels, int dim, Rng& rng) {
    EdgeEmbeddingTable t;
    t.mode = EdgeFeatureMode::learned;
    t.table = glorot(num_edge_labels, dim, rng);
    return t;
}

std::vector<Tensor*> EdGNNModel::params() {
    std::vector<Tensor*> out;
    for (EdGNNLayer& l : layers) {
        out.push_back(&l.w1);
        out.push_back(&l.w2);
        out.push_back(&l.w3);
        out.push_back(&l.w4);
    }
    out.push_back(&cls_w);
    out.push_back(&cls_b);
    if (edge_table.mode == EdgeFeatureMode::learned) out.push_back(&edge_table.table);
    return out;
}

std::vector<const Tensor*> EdGNNModel::params() const {
    auto mut = const_cast<EdGNNModel*>(this)->params();
    return {mut.begin(), mut.end()};
}

int EdGNNModel::classifier_input_dim() const {
    if (task == TaskKind::node)
        return layers.empty() ? input_dim : hidden_dim;
    return input_dim + static_cast<int>(layers.size()) * hidden_dim;
}

EdGNNModel EdGNNModel::make(TaskKind task, int input_dim, int hidden_dim, int num_layers,
                            int num_edge_labels, int num_classes, EdgeFeatureMode edge_mode,
                            double dropout, Rng& rng) {
    if (input_dim <= 0 || num_classes <= 0 || num_layers < 0)
        throw std::invalid_argument("EdGNNModel::make: invalid architecture");
    EdGNNModel m;
    m.task = task;
    m.input_dim = input_dim;
    m.hidden_dim = num_layers > 0 ? hidden_dim : 0;
    m.num_classes = num_classes;
    m.dropout = dropout;
    m.edge_table = edge_mode == EdgeFeatureMode::one_hot
                       ? EdgeEmbeddingTable::one_hot(num_edge_labels)
                       : EdgeEmbeddingTable::learned(num_edge_labels, num_edge_labels, rng);
    int d_in = input_dim;
    for (int t = 0; t < num_layers; ++t) {
        EdGNNLayer layer;
        layer.w1 = glorot(d_in, hidden_dim, rng);
        layer.w2 = glorot(d_in, hidden_dim, rng);
        layer.w3 = glorot(m.edge_table.dim(), hidden_dim, rng);
        layer.w4 = glorot(m.edge_table.dim(), hidden_dim, rng);
        m.layers.push_back(std::move(layer));
        d_in = hidden_dim;
    }
    m.cls_w = glorot(m.classifier_input_dim(), num_classes, rng);
    m.cls_b = Tensor(1, num_classes);
    return m;
}

Tensor glorot(int rows, int cols, Rng& rng) {
    Tensor t(rows, cols);
    const double limit = std::sqrt(6.0 / (rows + cols));
    for (std::int64_t i = 0; i < t.size(); ++i) t.raw()[i] = rng.uniform(-limit, limit);
    return t;
}

Tensor edge_label_counts(const Graph& g, Direction dir) {
    if (dir == Direction::both)
        throw std::invalid_argument("edge_label_counts: direction must be in or out");
    Tensor counts(g.num_nodes(), g.vocab()->edge_labels.size());
    for (const Edge& e : g.edges()) {
        int v = dir == Direction::in ? e.dst : e.src;
        counts(v, e.label) += 1.0;
    }
    return counts;
}

std::pair<Tensor, Tensor> precompute_edge_sums(const Graph& g, const EdgeEmbeddingTable& table) {
    if (table.table.rows() != g.vocab()->edge_labels.size())
        throw std::invalid_argument("precompute_edge_sums: table covers " +
                                    std::to_string(table.table.rows()) + " labels, graph vocabulary has " +
                                    std::to_string(g.vocab()->edge_labels.size()));
    Tensor in = edge_label_counts(g, Direction::in);
    Tensor out = edge_label_counts(g, Direction::out);
    if (table.mode == EdgeFeatureMode::one_hot) return {std::move(in), std::move(out)};
    return {matmul_plain(in, table.table), matmul_plain(out, table.table)};
}

GatherPlan neighbor_plan(const Graph& g) {
    GatherPlan plan;
    plan.offsets.assign(1, 0);
    for (int v = 0; v < g.num_nodes(); ++v) {
        g.for_each_neighbor(v, [&](int u, int) { plan.index.push_back(u); });
        plan.offsets.push_back(static_cast<int>(plan.index.size()));
    }
    return plan;
}

Tensor layer_forward(Tape& tape, const LayerHandles& w, const GatherPlan& neighbors,
                     const Tensor& f_prev, const Tensor& s_in, const Tensor& s_out,
                     Tensor* pre_activation) {
    Tensor self = tape.matmul(f_prev, w.w1);
    Tensor nbr = tape.matmul(tape.gather_sum(f_prev, neighbors), w.w2);
    Tensor ein = tape.matmul(s_in, w.w3);
    Tensor eout = tape.matmul(s_out, w.w4);
    Tensor pre = tape.add(tape.add(self, nbr), tape.add(ein, eout));
    if (pre_activation) *pre_activation = pre;
    return tape.relu(pre);
}

Tensor layer_forward_concat(Tape& tape, const LayerHandles& w, const GatherPlan& neighbors,
                            const Tensor& f_prev, const Tensor& s_in, const Tensor& s_out) {
    Tensor fy = tape.concat_cols({f_prev, s_in, s_out});
    Tensor w134 = tape.concat_rows({w.w1, w.w3, w.w4});
    Tensor self = tape.matmul(fy, w134);
    Tensor nbr = tape.matmul(tape.gather_sum(f_prev, neighbors), w.w2);
    return tape.relu(tape.add(self, nbr));
}

Tensor graph_readout(Tape& tape, const std::vector<Tensor>& per_layer_features,
                     const std::vector<int>& graph_segments, int num_graphs) {
    if (per_layer_features.empty()) throw std::invalid_argument("graph_readout: no feature steps");
    std::vector<Tensor> pooled;
    pooled.reserve(per_layer_features.size());
    for (const Tensor& f : per_layer_features)
        pooled.push_back(tape.segment_sum(f, graph_segments, num_graphs));
    return tape.concat_cols(pooled);
}

Batch make_batch(const Graph& g, const FeatureSpace& space) {
    Batch b;
    b.neighbors = neighbor_plan(g);
    b.f0 = init_node_features(g, space);
    b.counts_in = edge_label_counts(g, Direction::in);
    b.counts_out = edge_label_counts(g, Direction::out);
    b.graph_segments.assign(static_cast<std::size_t>(g.num_nodes()), 0);
    b.num_graphs = 1;
    return b;
}

ForwardResult model_forward(Tape& tape, const EdGNNModel& model, const Batch& batch,
                            bool train_mode, Rng& rng) {
    ForwardResult r;
    for (const Tensor* p : model.params()) r.param_handles.push_back(tape.watch(*p));
    std::size_t at = 0;
    std::vector<LayerHandles> layer_w;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        layer_w.push_back({r.param_handles[at], r.param_handles[at + 1], r.param_handles[at + 2],
                           r.param_handles[at + 3]});
        at += 4;
    }
    Tensor cls_w = r.param_handles[at];
    Tensor cls_b = r.param_handles[at + 1];

    Tensor s_in, s_out;
    if (model.edge_table.mode == EdgeFeatureMode::one_hot) {
        s_in = tape.constant(batch.counts_in);
        s_out = tape.constant(batch.counts_out);
    } else {
        Tensor table = r.param_handles[at + 2];
        s_in = tape.matmul(tape.constant(batch.counts_in), table);
        s_out = tape.matmul(tape.constant(batch.counts_out), table);
    }

    Tensor f = tape.constant(batch.f0);
    r.features.push_back(f);
    for (const LayerHandles& w : layer_w) {
        Tensor pre;
        f = layer_forward(tape, w, batch.neighbors, f, s_in, s_out, &pre);
        r.pre_activations.push_back(pre);
        if (model.dropout > 0.0) f = tape.dropout(f, model.dropout, train_mode, rng);
        r.features.push_back(f);
    }

    if (model.task == TaskKind::graph) {
        Tensor readout = graph_readout(tape, r.features, batch.graph_segments, batch.num_graphs);
        r.logits = tape.add_rowvec(tape.matmul(readout, cls_w), cls_b);
    } else {
        Tensor selected = tape.gather_rows(r.features.back(), batch.target_rows);
        r.logits = tape.add_rowvec(tape.matmul(selected, cls_w), cls_b);
    }
    return r;
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void write_u32(std::ofstream& f, std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
void write_i32(std::ofstream& f, std::int32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
void write_f64(std::ofstream& f, double v) { f.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t read_u32(std::ifstream& f) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
std::int32_t read_i32(std::ifstream& f) {
    std::int32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
double read_f64(std::ifstream& f) {
    double v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

void write_tensor(std::ofstream& f, const Tensor& t) {
    write_i32(f, t.rows());
    write_i32(f, t.cols());
    f.write(reinterpret_cast<const char*>(t.raw()), static_cast<std::streamsize>(t.size() * 8));
}

Tensor read_tensor(std::ifstream& f) {
    int rows = read_i32(f);
    int cols = read_i32(f);
    if (rows < 0 || cols < 0) throw std::runtime_error("checkpoint: corrupt tensor header");
    Tensor t(rows, cols);
    f.read(reinterpret_cast<char*>(t.raw()), static_cast<std::streamsize>(t.size() * 8));
    return t;
}

}  // namespace

void save_checkpoint(const EdGNNModel& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f.write("EDGN", 4);
    write_u32(f, kCheckpointVersion);
    write_i32(f, model.task == TaskKind::graph ? 0 : 1);
    write_i32(f, model.edge_table.mode == EdgeFeatureMode::one_hot ? 0 : 1);
    write_i32(f, static_cast<std::int32_t>(model.layers.size()));
    write_i32(f, model.input_dim);
    write_i32(f, model.hidden_dim);
    write_i32(f, model.num_classes);
    write_f64(f, model.dropout);
    for (const EdGNNLayer& l : model.layers) {
        write_tensor(f, l.w1);
        write_tensor(f, l.w2);
        write_tensor(f, l.w3);
        write_tensor(f, l.w4);
    }
    write_tensor(f, model.cls_w);
    write_tensor(f, model.cls_b);
    write_tensor(f, model.edge_table.table);
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

EdGNNModel load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4] = {};
    f.read(magic, 4);
    if (std::memcmp(magic, "EDGN", 4) != 0) throw std::runtime_error("load_checkpoint: bad magic");
    if (read_u32(f) != kCheckpointVersion) throw std::runtime_error("load_checkpoint: unsupported version");
    EdGNNModel m;
    m.task = read_i32(f) == 0 ? TaskKind::graph : TaskKind::node;
    m.edge_table.mode = read_i32(f) == 0 ? EdgeFeatureMode::one_hot : EdgeFeatureMode::learned;
    int num_layers = read_i32(f);
    m.input_dim = read_i32(f);
    m.hidden_dim = read_i32(f);
    m.num_classes = read_i32(f);
    m.dropout = read_f64(f);
    for (int i = 0; i < num_layers; ++i) {
        EdGNNLayer l;
        l.w1 = read_tensor(f);
        l.w2 = read_tensor(f);
        l.w3 = read_tensor(f);
        l.w4 = read_tensor(f);
        m.layers.push_back(std::move(l));
    }
    m.cls_w = read_tensor(f);
    m.cls_b = read_tensor(f);
    m.edge_table.table = read_tensor(f);
    if (!f) throw std::runtime_error("load_checkpoint: truncated file " + path);
    return m;
}

}  // namespace edgnn
