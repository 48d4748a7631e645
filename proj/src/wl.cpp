#include "edgnn/wl.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace edgnn {

namespace {

using Sig = std::vector<std::int32_t>;

// Relabels arbitrary keys to compact ids in ascending key order.
template <class Key>
std::pair<std::vector<int>, int> compact_by_order(const std::vector<Key>& keys) {
    std::vector<Key> uniq = keys;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<int> ids(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i)
        ids[i] = static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), keys[i]) - uniq.begin());
    return {std::move(ids), static_cast<int>(uniq.size())};
}

}  // namespace

Coloring initial_coloring(const Graph& g) {
    auto [colors, k] = compact_by_order(g.node_labels());
    return Coloring{std::move(colors), k, 0};
}

std::vector<Sig> wl_signatures(const Graph& g, const Coloring& c, WlVariant variant) {
    if (static_cast<int>(c.colors.size()) != g.num_nodes())
        throw std::invalid_argument("wl_step: coloring covers " + std::to_string(c.colors.size()) +
                                    " nodes, graph has " + std::to_string(g.num_nodes()));
    std::vector<Sig> sigs(static_cast<std::size_t>(g.num_nodes()));
    for (int v = 0; v < g.num_nodes(); ++v) {
        Sig& s = sigs[static_cast<std::size_t>(v)];
        s.push_back(c.colors[static_cast<std::size_t>(v)]);
        std::vector<std::int32_t> nbr;
        g.for_each_neighbor(v, [&](int u, int) { nbr.push_back(c.colors[static_cast<std::size_t>(u)]); });
        std::sort(nbr.begin(), nbr.end());
        s.push_back(static_cast<std::int32_t>(nbr.size()));
        s.insert(s.end(), nbr.begin(), nbr.end());
        if (variant == WlVariant::directed_labeled) {
            for (Direction dir : {Direction::in, Direction::out}) {
                EdgeHistogram h = edge_histogram(g, v, dir);
                s.push_back(static_cast<std::int32_t>(h.entries.size()));
                for (auto [label, count] : h.entries) {
                    s.push_back(label);
                    s.push_back(count);
                }
            }
        }
    }
    return sigs;
}

Coloring wl_step(const Graph& g, const Coloring& c, WlVariant variant) {
    auto [colors, k] = compact_by_order(wl_signatures(g, c, variant));
    return Coloring{std::move(colors), k, c.step + 1};
}

bool partition_refines(const Coloring& a, const Coloring& b) {
    if (a.colors.size() != b.colors.size())
        throw std::invalid_argument("partition_refines: colorings cover different node counts");
    std::vector<int> image(static_cast<std::size_t>(a.num_colors), -1);
    for (std::size_t v = 0; v < a.colors.size(); ++v) {
        int& slot = image[static_cast<std::size_t>(a.colors[v])];
        if (slot == -1) slot = b.colors[v];
        else if (slot != b.colors[v]) return false;
    }
    return true;
}

bool same_partition(const Coloring& a, const Coloring& b) {
    return a.num_colors == b.num_colors && partition_refines(a, b);
}

RefinementResult refine_to_stable(const Graph& g, WlVariant variant) {
    RefinementResult res;
    res.history.push_back(initial_coloring(g));
    // Stability is reached after at most num_nodes strict refinements.
    for (int t = 1; t <= g.num_nodes() + 1; ++t) {
        Coloring next = wl_step(g, res.history.back(), variant);
        bool stable = same_partition(next, res.history.back());
        res.history.push_back(std::move(next));
        if (stable) {
            res.stable_at = t;
            return res;
        }
    }
    throw std::logic_error("refine_to_stable: no stable coloring within the node-count bound");
}

std::map<int, int> color_histogram(const Coloring& c, std::span<const int> nodes) {
    std::map<int, int> hist;
    for (int v : nodes) {
        if (v < 0 || v >= static_cast<int>(c.colors.size()))
            throw std::out_of_range("color_histogram: node " + std::to_string(v) + " outside coloring");
        ++hist[c.colors[static_cast<std::size_t>(v)]];
    }
    return hist;
}

WlTestResult wl_isomorphism_test(const Graph& a, const Graph& b, WlVariant variant) {
    WlTestResult res;
    res.nodes_a = a.num_nodes();
    if (a.num_nodes() != b.num_nodes()) {
        res.verdict = WlVerdict::NonIsomorphic;
        res.decided_at_step = 0;
        return res;
    }
    Graph u = disjoint_union(a, b);
    std::vector<int> rows_a(static_cast<std::size_t>(a.num_nodes()));
    std::vector<int> rows_b(static_cast<std::size_t>(b.num_nodes()));
    std::iota(rows_a.begin(), rows_a.end(), 0);
    std::iota(rows_b.begin(), rows_b.end(), a.num_nodes());

    Coloring c = initial_coloring(u);
    for (int t = 0;; ++t) {
        bool mismatch = color_histogram(c, rows_a) != color_histogram(c, rows_b);
        res.joint_history.push_back(c);
        if (mismatch) {
            res.verdict = WlVerdict::NonIsomorphic;
            res.decided_at_step = t;
            return res;
        }
        Coloring next = wl_step(u, c, variant);
        if (same_partition(next, c)) {
            res.verdict = WlVerdict::PossiblyIsomorphic;
            res.decided_at_step = t;
            return res;
        }
        c = std::move(next);
    }
}

}  // namespace edgnn
