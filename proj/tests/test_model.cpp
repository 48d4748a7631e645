#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "edgnn/data.hpp"
#include "edgnn/model.hpp"
#include "edgnn/rng.hpp"
#include "edgnn/wl.hpp"

using namespace edgnn;

namespace {

LayerHandles watch_layer(Tape& tape, const EdGNNLayer& l) {
    return {tape.watch(l.w1), tape.watch(l.w2), tape.watch(l.w3), tape.watch(l.w4)};
}

EdGNNLayer random_layer(int d_in, int d_out, int d_e, Rng& rng) {
    return {glorot(d_in, d_out, rng), glorot(d_in, d_out, rng), glorot(d_e, d_out, rng),
            glorot(d_e, d_out, rng)};
}

}  // namespace

TEST_CASE("init_node_features: single node and label features") {
    Graph g = build_graph(1, {"only"}, {});
    FeatureSpace space = FeatureSpace::labels(*g.vocab());
    Tensor f = init_node_features(g, space);
    CHECK(f.rows() == 1);
    CHECK(f.cols() == 1);
    CHECK(f(0, 0) == 1.0);
}

TEST_CASE("init_node_features: in-degree buckets split a star after reversal") {
    Graph star = reverse_augment(
        build_graph(4, {"a", "a", "a", "a"}, {{0, 1, "e"}, {0, 2, "e"}, {0, 3, "e"}}));
    FeatureSpace space = FeatureSpace::in_degrees(star);
    Tensor f = init_node_features(star, space);
    CHECK(space.width == 2);  // center has augmented in-degree 3, leaves 1
    CHECK(max_abs_diff(Tensor::from(1, 2, {f(0, 0), f(0, 1)}),
                       Tensor::from(1, 2, {f(1, 0), f(1, 1)})) > 0.0);
    CHECK(f(1, 0) == f(2, 0));
    CHECK(f(1, 1) == f(2, 1));
}

TEST_CASE("init_node_features: unseen degree at encode time is an error") {
    Graph small = build_graph(2, {"a", "a"}, {{0, 1, "e"}});
    FeatureSpace space = FeatureSpace::in_degrees(small);
    Graph bigger = build_graph(3, {"a", "a", "a"}, {{0, 2, "e"}, {1, 2, "e"}});
    CHECK_THROWS_AS(init_node_features(bigger, space), std::out_of_range);
}

TEST_CASE("precompute_edge_sums: zero, hand counts, row sums") {
    Graph empty = build_graph(2, {"a", "a"}, {});
    auto [zin, zout] = precompute_edge_sums(empty, EdgeEmbeddingTable::one_hot(0));
    CHECK(zin.rows() == 2);
    CHECK(zin.cols() == 0);

    Graph g = build_graph(4, {"x", "x", "x", "x"},
                          {{0, 3, "a"}, {1, 3, "a"}, {2, 3, "b"}, {3, 0, "c"}});
    auto [s_in, s_out] = precompute_edge_sums(g, EdgeEmbeddingTable::one_hot(3));
    CHECK(s_in(3, 0) == 2.0);
    CHECK(s_in(3, 1) == 1.0);
    CHECK(s_in(3, 2) == 0.0);
    for (int v = 0; v < 4; ++v) {
        double in_total = 0.0, out_total = 0.0;
        for (int l = 0; l < 3; ++l) {
            in_total += s_in(v, l);
            out_total += s_out(v, l);
        }
        CHECK(in_total == static_cast<double>(g.in_degree(v)));
        CHECK(out_total == static_cast<double>(g.out_degree(v)));
    }
}

TEST_CASE("layer_forward: zero weights and empty neighborhoods") {
    Graph g = build_graph(1, {"a"}, {});
    FeatureSpace space = FeatureSpace::labels(*g.vocab());
    Batch b = make_batch(g, space);

    Tape tape;
    EdGNNLayer zero{Tensor(1, 4), Tensor(1, 4), Tensor(0, 4), Tensor(0, 4)};
    Tensor out = layer_forward(tape, watch_layer(tape, zero), b.neighbors,
                               tape.constant(b.f0), tape.constant(b.counts_in),
                               tape.constant(b.counts_out));
    CHECK(max_abs_diff(out, Tensor(1, 4)) == 0.0);

    // single vertex, no edges: only the self term contributes
    Rng rng(3);
    EdGNNLayer l = random_layer(1, 4, 0, rng);
    Tape t2;
    Tensor h = layer_forward(t2, watch_layer(t2, l), b.neighbors, t2.constant(b.f0),
                             t2.constant(b.counts_in), t2.constant(b.counts_out));
    Tensor expected = t2.relu(t2.matmul(t2.constant(b.f0), t2.watch(l.w1)));
    CHECK(max_abs_diff(h, expected) == 0.0);
}

TEST_CASE("layer_forward: WL-equal vertices get equal rows") {
    // directed 4-cycle with uniform labels: all vertices share one WL color
    Graph g = build_graph(4, {"a", "a", "a", "a"},
                          {{0, 1, "e"}, {1, 2, "e"}, {2, 3, "e"}, {3, 0, "e"}});
    FeatureSpace space = FeatureSpace::labels(*g.vocab());
    Batch b = make_batch(g, space);
    Rng rng(17);
    EdGNNLayer l = random_layer(space.width, 8, 1, rng);
    Tape tape;
    Tensor h = layer_forward(tape, watch_layer(tape, l), b.neighbors, tape.constant(b.f0),
                             tape.constant(b.counts_in), tape.constant(b.counts_out));
    for (int v = 1; v < 4; ++v)
        for (int c = 0; c < 8; ++c)
            CHECK(std::abs(h(0, c) - h(v, c)) < 1e-9);
}

TEST_CASE("layer_forward_concat agrees with layer_forward") {
    Rng rng(29);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Graph g = gen_random_graph(3 + rng.uniform_int(10), 0.35, 1 + rng.uniform_int(3),
                                   1 + rng.uniform_int(3), 7000 + static_cast<std::uint64_t>(trial));
        FeatureSpace space = FeatureSpace::labels(*g.vocab());
        Batch b = make_batch(g, space);
        int d_out = 1 + rng.uniform_int(8);
        int d_e = g.vocab()->edge_labels.size();
        EdGNNLayer l = random_layer(space.width, d_out, d_e, rng);

        Tape tape;
        Tensor f = tape.constant(b.f0);
        Tensor s_in = tape.constant(b.counts_in);
        Tensor s_out = tape.constant(b.counts_out);
        Tensor direct = layer_forward(tape, watch_layer(tape, l), b.neighbors, f, s_in, s_out);
        Tensor concat = layer_forward_concat(tape, watch_layer(tape, l), b.neighbors, f, s_in, s_out);
        worst = std::max(worst, max_abs_diff(direct, concat));

        // the concatenated input is d_in + 2 d_E wide
        Tensor fy = tape.concat_cols({f, s_in, s_out});
        CHECK(fy.cols() == space.width + 2 * d_e);
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("graph_readout: identity case and width arithmetic") {
    Tape tape;
    Tensor f0 = Tensor::from(1, 1, {2.5});
    Tensor r = graph_readout(tape, {tape.constant(f0)}, {0}, 1);
    CHECK(r.rows() == 1);
    CHECK(r.cols() == 1);
    CHECK(r(0, 0) == 2.5);

    // widths 6, 64, 64 concatenate to 134
    Tensor a(5, 6, 0.1), b(5, 64, 0.2), c(5, 64, 0.3);
    Tensor wide = graph_readout(tape, {tape.constant(a), tape.constant(b), tape.constant(c)},
                                {0, 0, 1, 1, 1}, 2);
    CHECK(wide.cols() == 134);
    CHECK(wide.rows() == 2);
}

TEST_CASE("graph_readout: duplicated graph yields identical rows") {
    Graph g = gen_random_graph(6, 0.4, 2, 2, 99);
    FeatureSpace space = FeatureSpace::labels(*g.vocab());
    Graph two = disjoint_union(std::vector<const Graph*>{&g, &g});
    Batch b = make_batch(two, space);
    b.graph_segments.assign(static_cast<std::size_t>(two.num_nodes()), 0);
    for (int v = g.num_nodes(); v < two.num_nodes(); ++v)
        b.graph_segments[static_cast<std::size_t>(v)] = 1;
    b.num_graphs = 2;

    Tape tape;
    Tensor r = graph_readout(tape, {tape.constant(b.f0)}, b.graph_segments, 2);
    for (int c = 0; c < r.cols(); ++c) CHECK(r(0, c) == r(1, c));
}

TEST_CASE("model_forward: zero classifier weights leave only the bias") {
    Graph g = gen_random_graph(5, 0.4, 2, 2, 5);
    FeatureSpace space = FeatureSpace::labels(*g.vocab());
    Batch b = make_batch(g, space);
    b.targets = {1};
    Rng rng(8);
    EdGNNModel m = EdGNNModel::make(TaskKind::graph, space.width, 4, 2,
                                    g.vocab()->edge_labels.size(), 2, EdgeFeatureMode::one_hot,
                                    0.0, rng);
    for (std::int64_t i = 0; i < m.cls_w.size(); ++i) m.cls_w.raw()[i] = 0.0;
    m.cls_b(0, 0) = -1.5;
    m.cls_b(0, 1) = 2.5;
    Tape tape;
    Rng fwd(0);
    ForwardResult fr = model_forward(tape, m, b, false, fwd);
    CHECK(fr.logits.cols() == 2);  // binary task
    CHECK(fr.logits(0, 0) == -1.5);
    CHECK(fr.logits(0, 1) == 2.5);
}

TEST_CASE("model_forward: graph logits are permutation invariant") {
    Rng rng(55);
    for (int trial = 0; trial < 10; ++trial) {
        Graph g = gen_random_graph(8, 0.3, 2, 2, 600 + static_cast<std::uint64_t>(trial));
        std::vector<int> perm(static_cast<std::size_t>(g.num_nodes()));
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        Graph h = permute(g, perm);

        FeatureSpace space = FeatureSpace::labels(*g.vocab());
        Rng init(1000 + static_cast<std::uint64_t>(trial));
        EdGNNModel m = EdGNNModel::make(TaskKind::graph, space.width, 6, 2,
                                        g.vocab()->edge_labels.size(), 3,
                                        EdgeFeatureMode::one_hot, 0.0, init);
        auto logits_of = [&](const Graph& graph) {
            Batch b = make_batch(graph, space);
            b.targets = {0};
            Tape tape;
            Rng fwd(0);
            return model_forward(tape, m, b, false, fwd).logits;
        };
        CHECK(max_abs_diff(logits_of(g), logits_of(h)) < 1e-9);
    }
}

TEST_CASE("model_forward: node task selects labeled rows") {
    Graph g = reverse_augment(gen_random_graph(7, 0.3, 1, 2, 44));
    FeatureSpace space = FeatureSpace::in_degrees(g);
    Batch b = make_batch(g, space);
    b.target_rows = {2, 5};
    b.targets = {0, 1};
    Rng rng(4);
    EdGNNModel m = EdGNNModel::make(TaskKind::node, space.width, 4, 2,
                                    g.vocab()->edge_labels.size(), 2, EdgeFeatureMode::one_hot,
                                    0.0, rng);
    Tape tape;
    Rng fwd(0);
    ForwardResult fr = model_forward(tape, m, b, false, fwd);
    CHECK(fr.logits.rows() == 2);
    CHECK(fr.logits.cols() == 2);
}

TEST_CASE("theorem 1 (small instance): WL-equal implies feature-equal at each step") {
    Rng rng(313);
    for (int trial = 0; trial < 30; ++trial) {
        Graph g = gen_random_graph(4 + rng.uniform_int(8), 0.3, 1 + rng.uniform_int(2),
                                   1 + rng.uniform_int(2), 9000 + static_cast<std::uint64_t>(trial));
        FeatureSpace space = FeatureSpace::labels(*g.vocab());
        Batch b = make_batch(g, space);
        int d_e = g.vocab()->edge_labels.size();

        Tape tape;
        Tensor f = tape.constant(b.f0);
        Tensor s_in = tape.constant(b.counts_in);
        Tensor s_out = tape.constant(b.counts_out);
        Coloring c = initial_coloring(g);
        int d_in = space.width;
        for (int t = 1; t <= 3; ++t) {
            EdGNNLayer l = random_layer(d_in, 8, d_e, rng);
            f = layer_forward(tape, watch_layer(tape, l), b.neighbors, f, s_in, s_out);
            d_in = 8;
            c = wl_step(g, c, WlVariant::directed_labeled);
            for (int u = 0; u < g.num_nodes(); ++u)
                for (int v = u + 1; v < g.num_nodes(); ++v) {
                    if (c.colors[static_cast<std::size_t>(u)] != c.colors[static_cast<std::size_t>(v)])
                        continue;
                    for (int k = 0; k < f.cols(); ++k)
                        CHECK(std::abs(f(u, k) - f(v, k)) < 1e-8);
                }
        }
    }
}

TEST_CASE("checkpoint: save and load round-trips every field") {
    Rng rng(21);
    EdGNNModel m = EdGNNModel::make(TaskKind::node, 5, 7, 2, 4, 3, EdgeFeatureMode::learned,
                                    0.5, rng);
    std::filesystem::path path =
        std::filesystem::temp_directory_path() / "edgnn_ckpt_test.bin";
    save_checkpoint(m, path.string());
    EdGNNModel r = load_checkpoint(path.string());
    std::filesystem::remove(path);

    CHECK(r.task == m.task);
    CHECK(r.edge_table.mode == m.edge_table.mode);
    CHECK(r.input_dim == m.input_dim);
    CHECK(r.hidden_dim == m.hidden_dim);
    CHECK(r.num_classes == m.num_classes);
    CHECK(r.dropout == m.dropout);
    REQUIRE(r.layers.size() == m.layers.size());
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        CHECK(max_abs_diff(r.layers[i].w1, m.layers[i].w1) == 0.0);
        CHECK(max_abs_diff(r.layers[i].w2, m.layers[i].w2) == 0.0);
        CHECK(max_abs_diff(r.layers[i].w3, m.layers[i].w3) == 0.0);
        CHECK(max_abs_diff(r.layers[i].w4, m.layers[i].w4) == 0.0);
    }
    CHECK(max_abs_diff(r.cls_w, m.cls_w) == 0.0);
    CHECK(max_abs_diff(r.cls_b, m.cls_b) == 0.0);
    CHECK(max_abs_diff(r.edge_table.table, m.edge_table.table) == 0.0);
    CHECK_THROWS_AS(load_checkpoint(path.string() + ".missing"), std::runtime_error);
}
