#include "edgnn/graph.hpp"

#include <algorithm>
#include <stdexcept>

namespace edgnn {

int LabelDict::intern(const std::string& name) {
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    int id = static_cast<int>(names_.size());
    names_.push_back(name);
    ids_.emplace(name, id);
    return id;
}

std::optional<int> LabelDict::find(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

const std::string& LabelDict::name(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("LabelDict::name: id " + std::to_string(id));
    return names_[static_cast<std::size_t>(id)];
}

Graph::Graph(int num_nodes, std::vector<int> node_labels, std::vector<Edge> edges,
             std::shared_ptr<const LabelVocab> vocab)
    : num_nodes_(num_nodes),
      node_labels_(std::move(node_labels)),
      edges_(std::move(edges)),
      vocab_(std::move(vocab)) {
    if (num_nodes_ < 0) throw std::invalid_argument("Graph: negative node count");
    if (!vocab_) throw std::invalid_argument("Graph: null vocabulary");
    if (static_cast<int>(node_labels_.size()) != num_nodes_)
        throw std::invalid_argument("Graph: node_labels size " + std::to_string(node_labels_.size()) +
                                    " != num_nodes " + std::to_string(num_nodes_));
    for (int v = 0; v < num_nodes_; ++v) {
        int l = node_labels_[static_cast<std::size_t>(v)];
        if (l < 0 || l >= vocab_->node_labels.size())
            throw std::invalid_argument("Graph: node " + std::to_string(v) + " has label id " +
                                        std::to_string(l) + " outside dictionary");
    }
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const Edge& e = edges_[i];
        if (e.src < 0 || e.src >= num_nodes_ || e.dst < 0 || e.dst >= num_nodes_)
            throw std::invalid_argument("Graph: edge " + std::to_string(i) + " (" + std::to_string(e.src) +
                                        " -> " + std::to_string(e.dst) + ") has an endpoint outside [0, " +
                                        std::to_string(num_nodes_) + ")");
        if (e.label < 0 || e.label >= vocab_->edge_labels.size())
            throw std::invalid_argument("Graph: edge " + std::to_string(i) + " has label id " +
                                        std::to_string(e.label) + " outside dictionary");
    }

    // CSR adjacency, edge indices ascending per vertex.
    std::vector<int> in_count(static_cast<std::size_t>(num_nodes_), 0);
    std::vector<int> out_count(static_cast<std::size_t>(num_nodes_), 0);
    for (const Edge& e : edges_) {
        ++in_count[static_cast<std::size_t>(e.dst)];
        ++out_count[static_cast<std::size_t>(e.src)];
    }
    in_offsets_.assign(static_cast<std::size_t>(num_nodes_) + 1, 0);
    out_offsets_.assign(static_cast<std::size_t>(num_nodes_) + 1, 0);
    for (int v = 0; v < num_nodes_; ++v) {
        in_offsets_[static_cast<std::size_t>(v) + 1] = in_offsets_[static_cast<std::size_t>(v)] + in_count[static_cast<std::size_t>(v)];
        out_offsets_[static_cast<std::size_t>(v) + 1] = out_offsets_[static_cast<std::size_t>(v)] + out_count[static_cast<std::size_t>(v)];
    }
    in_index_.resize(edges_.size());
    out_index_.resize(edges_.size());
    std::vector<int> in_pos(in_offsets_.begin(), in_offsets_.end() - 1);
    std::vector<int> out_pos(out_offsets_.begin(), out_offsets_.end() - 1);
    for (int e = 0; e < num_edges(); ++e) {
        const Edge& ed = edges_[static_cast<std::size_t>(e)];
        in_index_[static_cast<std::size_t>(in_pos[static_cast<std::size_t>(ed.dst)]++)] = e;
        out_index_[static_cast<std::size_t>(out_pos[static_cast<std::size_t>(ed.src)]++)] = e;
    }
}

void Graph::check_node(int v) const {
    if (v < 0 || v >= num_nodes_)
        throw std::out_of_range("Graph: node " + std::to_string(v) + " outside [0, " +
                                std::to_string(num_nodes_) + ")");
}

int Graph::node_label(int v) const {
    check_node(v);
    return node_labels_[static_cast<std::size_t>(v)];
}

std::span<const int> Graph::in_edges(int v) const {
    check_node(v);
    return {in_index_.data() + in_offsets_[static_cast<std::size_t>(v)],
            static_cast<std::size_t>(in_offsets_[static_cast<std::size_t>(v) + 1] - in_offsets_[static_cast<std::size_t>(v)])};
}

std::span<const int> Graph::out_edges(int v) const {
    check_node(v);
    return {out_index_.data() + out_offsets_[static_cast<std::size_t>(v)],
            static_cast<std::size_t>(out_offsets_[static_cast<std::size_t>(v) + 1] - out_offsets_[static_cast<std::size_t>(v)])};
}

bool Graph::structurally_equal(const Graph& other) const {
    if (num_nodes_ != other.num_nodes_ || node_labels_ != other.node_labels_ || edges_ != other.edges_)
        return false;
    if (!vocab_ || !other.vocab_) return vocab_ == other.vocab_;
    return vocab_->node_labels == other.vocab_->node_labels &&
           vocab_->edge_labels == other.vocab_->edge_labels;
}

Graph build_graph(int num_nodes, const std::vector<std::string>& node_labels,
                  const std::vector<std::tuple<int, int, std::string>>& edges) {
    auto vocab = std::make_shared<LabelVocab>();
    std::vector<int> label_ids;
    label_ids.reserve(node_labels.size());
    for (const std::string& l : node_labels) label_ids.push_back(vocab->node_labels.intern(l));
    std::vector<Edge> compact;
    compact.reserve(edges.size());
    for (const auto& [src, dst, label] : edges)
        compact.push_back({src, dst, vocab->edge_labels.intern(label)});
    return Graph(num_nodes, std::move(label_ids), std::move(compact), std::move(vocab));
}

std::vector<int> neighborhood(const Graph& g, int v, Direction dir) {
    std::vector<int> out;
    switch (dir) {
        case Direction::in:
            for (int e : g.in_edges(v)) out.push_back(g.edge(e).src);
            break;
        case Direction::out:
            for (int e : g.out_edges(v)) out.push_back(g.edge(e).dst);
            break;
        case Direction::both:
            g.for_each_neighbor(v, [&](int u, int) { out.push_back(u); });
            break;
    }
    std::sort(out.begin(), out.end());
    return out;
}

EdgeHistogram edge_histogram(const Graph& g, int v, Direction dir) {
    if (dir == Direction::both)
        throw std::invalid_argument("edge_histogram: direction must be in or out");
    std::vector<int> counts(static_cast<std::size_t>(g.vocab()->edge_labels.size()), 0);
    auto incident = dir == Direction::in ? g.in_edges(v) : g.out_edges(v);
    for (int e : incident) ++counts[static_cast<std::size_t>(g.edge(e).label)];
    EdgeHistogram h;
    for (int l = 0; l < static_cast<int>(counts.size()); ++l)
        if (counts[static_cast<std::size_t>(l)] > 0) h.entries.emplace_back(l, counts[static_cast<std::size_t>(l)]);
    return h;
}

Graph reverse_augment(const Graph& g) {
    auto vocab = std::make_shared<LabelVocab>();
    vocab->node_labels = g.vocab()->node_labels;
    const LabelDict& old_edges = g.vocab()->edge_labels;
    for (int l = 0; l < old_edges.size(); ++l) vocab->edge_labels.intern(old_edges.name(l));
    for (int l = 0; l < old_edges.size(); ++l) vocab->edge_labels.intern(old_edges.name(l) + "_rev");
    const int shift = old_edges.size();

    std::vector<Edge> edges = g.edges();
    edges.reserve(edges.size() * 2);
    for (int e = 0; e < g.num_edges(); ++e) {
        const Edge& ed = g.edge(e);
        edges.push_back({ed.dst, ed.src, ed.label + shift});
    }
    return Graph(g.num_nodes(), g.node_labels(), std::move(edges), std::move(vocab));
}

Graph permute(const Graph& g, const std::vector<int>& perm) {
    const int n = g.num_nodes();
    if (static_cast<int>(perm.size()) != n)
        throw std::invalid_argument("permute: permutation size " + std::to_string(perm.size()) +
                                    " != num_nodes " + std::to_string(n));
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (int v : perm) {
        if (v < 0 || v >= n || seen[static_cast<std::size_t>(v)])
            throw std::invalid_argument("permute: not a bijection on [0, " + std::to_string(n) + ")");
        seen[static_cast<std::size_t>(v)] = 1;
    }
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(v)])] = g.node_label(v);
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(g.num_edges()));
    for (const Edge& e : g.edges())
        edges.push_back({perm[static_cast<std::size_t>(e.src)], perm[static_cast<std::size_t>(e.dst)], e.label});
    return Graph(n, std::move(labels), std::move(edges), g.vocab());
}

namespace {

// Remaps a graph's label ids into `target`, interning by string.
Graph relabel(const Graph& g, const std::shared_ptr<LabelVocab>& target) {
    std::vector<int> node_map(static_cast<std::size_t>(g.vocab()->node_labels.size()));
    for (int l = 0; l < g.vocab()->node_labels.size(); ++l)
        node_map[static_cast<std::size_t>(l)] = target->node_labels.intern(g.vocab()->node_labels.name(l));
    std::vector<int> edge_map(static_cast<std::size_t>(g.vocab()->edge_labels.size()));
    for (int l = 0; l < g.vocab()->edge_labels.size(); ++l)
        edge_map[static_cast<std::size_t>(l)] = target->edge_labels.intern(g.vocab()->edge_labels.name(l));
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(g.num_nodes()));
    for (int v = 0; v < g.num_nodes(); ++v) labels.push_back(node_map[static_cast<std::size_t>(g.node_label(v))]);
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(g.num_edges()));
    for (const Edge& e : g.edges()) edges.push_back({e.src, e.dst, edge_map[static_cast<std::size_t>(e.label)]});
    return Graph(g.num_nodes(), std::move(labels), std::move(edges), target);
}

}  // namespace

Graph disjoint_union(const Graph& a, const Graph& b) {
    if (a.vocab() == b.vocab()) return disjoint_union(std::vector<const Graph*>{&a, &b});
    auto merged = std::make_shared<LabelVocab>();
    Graph ra = relabel(a, merged);
    Graph rb = relabel(b, merged);
    return disjoint_union(std::vector<const Graph*>{&ra, &rb});
}

Graph disjoint_union(const std::vector<const Graph*>& parts) {
    if (parts.empty()) throw std::invalid_argument("disjoint_union: empty part list");
    auto vocab = parts.front()->vocab();
    int total_nodes = 0;
    std::size_t total_edges = 0;
    for (const Graph* g : parts) {
        if (g->vocab() != vocab)
            throw std::invalid_argument("disjoint_union: parts must share one vocabulary");
        total_nodes += g->num_nodes();
        total_edges += static_cast<std::size_t>(g->num_edges());
    }
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(total_nodes));
    std::vector<Edge> edges;
    edges.reserve(total_edges);
    int offset = 0;
    for (const Graph* g : parts) {
        for (int v = 0; v < g->num_nodes(); ++v) labels.push_back(g->node_label(v));
        for (const Edge& e : g->edges()) edges.push_back({e.src + offset, e.dst + offset, e.label});
        offset += g->num_nodes();
    }
    return Graph(total_nodes, std::move(labels), std::move(edges), vocab);
}

}  // namespace edgnn
