// Acceptance suite: runs every release criterion end to end and prints one
// pass/fail line per criterion. Exits nonzero if any criterion fails.
//
//   acceptance --cli <edgnn binary> --data <fixture dir> [--only N]

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "edgnn/data.hpp"
#include "edgnn/fixtures.hpp"
#include "edgnn/model.hpp"
#include "edgnn/rng.hpp"
#include "edgnn/train.hpp"
#include "edgnn/wl.hpp"

using namespace edgnn;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_cli;
fs::path g_data;

int run_cli(const std::string& args) {
    std::string cmd = g_cli + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}

std::vector<int> identity_permutation(int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    return p;
}

LayerHandles watch_layer(Tape& tape, const EdGNNLayer& l) {
    return {tape.watch(l.w1), tape.watch(l.w2), tape.watch(l.w3), tape.watch(l.w4)};
}

EdGNNLayer random_layer(int d_in, int d_out, int d_e, Rng& rng) {
    return {glorot(d_in, d_out, rng), glorot(d_in, d_out, rng), glorot(d_e, d_out, rng),
            glorot(d_e, d_out, rng)};
}

// ---------------------------------------------------------------- criteria

bool wl_corner_cases(std::string& detail) {
    auto [c6, c33] = gen_wl_hard_pair(6);
    Graph p3 = build_graph(3, {"a", "a", "a"}, {{0, 1, "e"}, {1, 2, "e"}});
    Graph c3 = build_graph(3, {"a", "a", "a"}, {{0, 1, "e"}, {1, 2, "e"}, {2, 0, "e"}});

    WlTestResult hard = wl_isomorphism_test(c6, c33, WlVariant::directed_labeled);
    WlTestResult split = wl_isomorphism_test(p3, c3, WlVariant::directed_labeled);
    if (hard.verdict != WlVerdict::PossiblyIsomorphic) {
        detail = "C6 vs C3+C3 was not PossiblyIsomorphic";
        return false;
    }
    if (split.verdict != WlVerdict::NonIsomorphic || split.decided_at_step != 1) {
        detail = "P3 vs C3 did not split at step 1";
        return false;
    }

    fs::path dir = g_data / "wl_cases";
    fs::create_directories(dir);
    save_graph_json(c6, dir / "c6.json");
    save_graph_json(c33, dir / "c33.json");
    save_graph_json(p3, dir / "p3.json");
    save_graph_json(c3, dir / "c3.json");
    int hard_rc = run_cli("wl-test --a " + (dir / "c6.json").string() + " --b " +
                          (dir / "c33.json").string());
    int split_rc = run_cli("wl-test --a " + (dir / "p3.json").string() + " --b " +
                           (dir / "c3.json").string());
    if (hard_rc != 0 || split_rc != 1) {
        detail = "CLI exit codes were " + std::to_string(hard_rc) + "/" + std::to_string(split_rc) +
                 ", expected 0/1";
        return false;
    }
    detail = "C6 vs C3+C3 possibly isomorphic; P3 vs C3 split at step 1; CLI exits 0/1";
    return true;
}

bool permutation_invariance(std::string& detail) {
    Rng rng(20250810);
    int checked = 0;
    for (int trial = 0; trial < 500; ++trial) {
        int n = 2 + rng.uniform_int(29);
        double p = 0.05 + 0.4 * rng.uniform();
        Graph g = gen_random_graph(n, p, 1 + rng.uniform_int(3), 1 + rng.uniform_int(3),
                                   rng.next_u64());
        std::vector<int> perm = identity_permutation(n);
        rng.shuffle(perm);
        Graph h = permute(g, perm);
        for (WlVariant variant : {WlVariant::undirected, WlVariant::directed_labeled}) {
            WlTestResult r = wl_isomorphism_test(g, h, variant);
            if (r.verdict != WlVerdict::PossiblyIsomorphic) {
                detail = "trial " + std::to_string(trial) + " was declared non-isomorphic";
                return false;
            }
            for (const Coloring& c : r.joint_history)
                for (int v = 0; v < n; ++v)
                    if (c.colors[static_cast<std::size_t>(v)] !=
                        c.colors[static_cast<std::size_t>(n + perm[static_cast<std::size_t>(v)])]) {
                        detail = "canonical ids diverged at step " + std::to_string(c.step);
                        return false;
                    }
            ++checked;
        }
    }
    detail = std::to_string(checked) + " (graph, permutation, variant) runs, all invariant";
    return true;
}

bool theorem1(std::string& detail) {
    Rng rng(31);
    int pairs_checked = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        int n = 3 + rng.uniform_int(13);
        // sparse, label-poor graphs keep many vertices WL-equivalent
        Graph g = gen_random_graph(n, 0.03 + 0.25 * rng.uniform(), 1 + rng.uniform_int(2),
                                   1 + rng.uniform_int(2), rng.next_u64());
        FeatureSpace space = FeatureSpace::labels(*g.vocab());
        Batch b = make_batch(g, space);
        int d_e = g.vocab()->edge_labels.size();

        Tape tape;
        Tensor f = tape.constant(b.f0);
        Tensor s_in = tape.constant(b.counts_in);
        Tensor s_out = tape.constant(b.counts_out);
        Coloring c = initial_coloring(g);
        int d_in = space.width;
        int width = 4 + rng.uniform_int(13);
        for (int t = 1; t <= 3; ++t) {
            EdGNNLayer l = random_layer(d_in, width, d_e, rng);
            f = layer_forward(tape, watch_layer(tape, l), b.neighbors, f, s_in, s_out);
            d_in = width;
            c = wl_step(g, c, WlVariant::directed_labeled);
            for (int u = 0; u < n; ++u)
                for (int v = u + 1; v < n; ++v) {
                    if (c.colors[static_cast<std::size_t>(u)] != c.colors[static_cast<std::size_t>(v)])
                        continue;
                    ++pairs_checked;
                    for (int k = 0; k < f.cols(); ++k)
                        worst = std::max(worst, std::abs(f(u, k) - f(v, k)));
                }
        }
    }
    std::ostringstream os;
    os << "200 graphs, " << pairs_checked << " WL-equal pairs, max gap " << worst;
    detail = os.str();
    return worst < 1e-8;
}

bool theorem2(std::string& detail) {
    Rng rng(47);
    int graphs_checked = 0, graphs_ok = 0;
    std::vector<std::string> failures;
    for (int trial = 0; trial < 200; ++trial) {
        int n = 3 + rng.uniform_int(10);
        Graph g = gen_random_graph(n, 0.08 + 0.35 * rng.uniform(), 1 + rng.uniform_int(3),
                                   1 + rng.uniform_int(3), rng.next_u64());
        FeatureSpace space = FeatureSpace::labels(*g.vocab());
        Batch b = make_batch(g, space);
        int d_e = g.vocab()->edge_labels.size();

        Tape tape;
        Tensor f = tape.constant(b.f0);
        Tensor s_in = tape.constant(b.counts_in);
        Tensor s_out = tape.constant(b.counts_out);
        Coloring c = initial_coloring(g);
        int d_in = space.width;
        bool ok = true;
        for (int t = 1; t <= 3 && ok; ++t) {
            EdGNNLayer l = random_layer(d_in, 64, d_e, rng);
            f = layer_forward(tape, watch_layer(tape, l), b.neighbors, f, s_in, s_out);
            d_in = 64;
            c = wl_step(g, c, WlVariant::directed_labeled);
            // partition of rounded embeddings vs the WL partition
            std::map<std::vector<long long>, int> cell_of;
            std::vector<int> embed_cell(static_cast<std::size_t>(n));
            for (int v = 0; v < n; ++v) {
                std::vector<long long> key(static_cast<std::size_t>(f.cols()));
                for (int k = 0; k < f.cols(); ++k)
                    key[static_cast<std::size_t>(k)] = llround(f(v, k) / 1e-6);
                embed_cell[static_cast<std::size_t>(v)] =
                    cell_of.emplace(key, static_cast<int>(cell_of.size())).first->second;
            }
            for (int u = 0; u < n && ok; ++u)
                for (int v = u + 1; v < n && ok; ++v)
                    if ((c.colors[static_cast<std::size_t>(u)] == c.colors[static_cast<std::size_t>(v)]) !=
                        (embed_cell[static_cast<std::size_t>(u)] == embed_cell[static_cast<std::size_t>(v)]))
                        ok = false;
        }
        ++graphs_checked;
        if (ok) ++graphs_ok;
        else if (failures.size() < 5) failures.push_back("trial " + std::to_string(trial));
    }
    double rate = static_cast<double>(graphs_ok) / graphs_checked;
    std::ostringstream os;
    os << graphs_ok << "/" << graphs_checked << " graphs matched (" << 100.0 * rate << "%)";
    if (!failures.empty()) {
        os << "; failures:";
        for (const std::string& f : failures) os << " " << f;
    }
    detail = os.str();
    return rate >= 0.95;
}

bool layer_equivalence(std::string& detail) {
    Rng rng(53);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Graph g = gen_random_graph(3 + rng.uniform_int(12), 0.1 + 0.3 * rng.uniform(),
                                   1 + rng.uniform_int(3), 1 + rng.uniform_int(3), rng.next_u64());
        FeatureSpace space = FeatureSpace::labels(*g.vocab());
        Batch b = make_batch(g, space);
        EdGNNLayer l = random_layer(space.width, 1 + rng.uniform_int(16),
                                    g.vocab()->edge_labels.size(), rng);
        Tape tape;
        Tensor f = tape.constant(b.f0);
        Tensor s_in = tape.constant(b.counts_in);
        Tensor s_out = tape.constant(b.counts_out);
        Tensor direct = layer_forward(tape, watch_layer(tape, l), b.neighbors, f, s_in, s_out);
        Tensor cat = layer_forward_concat(tape, watch_layer(tape, l), b.neighbors, f, s_in, s_out);
        worst = std::max(worst, max_abs_diff(direct, cat));
    }
    std::ostringstream os;
    os << "100 configurations, max elementwise gap " << worst;
    detail = os.str();
    return worst < 1e-9;
}

bool gradient_check(std::string& detail) {
    GradCheckResult r = run_gradcheck(20, 7);
    std::ostringstream os;
    os << r.seeds_run << "/20 seeds, " << r.params_checked << " parameters, max rel err "
       << r.max_rel_err;
    detail = os.str();
    if (!r.notes.empty()) detail += "; first issue: " + r.notes.front();
    return r.ok && r.max_rel_err < 1e-4;
}

bool dataset_statistics(std::string& detail) {
    DatasetStats m = load_tu_dataset(g_data / "mutag").stats();
    DatasetStats p = load_tu_dataset(g_data / "ptc_fr").stats();
    NodeTask aifb = load_triples_task(g_data / "aifb" / "triples.tsv",
                                      g_data / "aifb" / "train.tsv",
                                      g_data / "aifb" / "test.tsv", true);
    NodeTask mnode = load_triples_task(g_data / "mutag_node" / "triples.tsv",
                                       g_data / "mutag_node" / "train.tsv",
                                       g_data / "mutag_node" / "test.tsv", true);
    std::vector<std::string> bad;
    auto expect = [&](bool cond, const std::string& what) {
        if (!cond) bad.push_back(what);
    };
    expect(m.num_graphs == 188, "mutag graphs != 188");
    expect(m.num_classes == 2, "mutag classes != 2");
    expect(m.num_node_labels == 6, "mutag node labels != 6");
    expect(m.num_edge_labels == 3, "mutag edge labels != 3");
    expect(std::abs(m.avg_nodes - 17.9) < 0.1, "mutag avg nodes off");
    expect(std::abs(m.avg_bonds - 19.8) < 0.1, "mutag avg bonds off");
    expect(p.num_graphs == 351, "ptc_fr graphs != 351");
    expect(p.num_node_labels == 19, "ptc_fr node labels != 19");
    expect(p.num_edge_labels == 4, "ptc_fr edge labels != 4");
    expect(std::abs(p.avg_nodes - 14.6) < 0.1, "ptc_fr avg nodes off");
    expect(std::abs(p.avg_bonds - 15.0) < 0.1, "ptc_fr avg bonds off");
    expect(aifb.num_entities == 8285, "aifb nodes != 8285");
    expect(aifb.num_triples == 29043, "aifb edges != 29043");
    expect(aifb.num_relations == 45, "aifb relations != 45");
    expect(aifb.graph.vocab()->edge_labels.size() == 90, "aifb reversed relations != 90");
    expect(aifb.class_dict.size() == 4, "aifb classes != 4");
    expect(mnode.num_entities == 23644, "mutag_node nodes != 23644");
    expect(mnode.num_triples == 74227, "mutag_node edges != 74227");
    expect(mnode.num_relations == 23, "mutag_node relations != 23");
    if (!bad.empty()) {
        detail = bad.front() + (bad.size() > 1 ? " (+" + std::to_string(bad.size() - 1) + " more)" : "");
        return false;
    }
    detail = "MUTAG 188/2/6/3, PTC FR 351/2/19/4, AIFB 8285/29043/45, node-MUTAG 23644/74227/23";
    return true;
}

bool train_graph_criterion(const std::string& dir, double floor, std::string& detail) {
    GraphDataset ds = load_tu_dataset(g_data / dir);
    TrainConfig cfg = TrainConfig::graph_defaults();
    cfg.dataset = dir;
    cfg.seed = 1;
    Metrics m = train_graph_classifier(cfg, ds);
    std::ostringstream os;
    os << "mean " << 100.0 * m.aggregate.mean << "% +- " << 100.0 * m.aggregate.stddev
       << " (max run " << 100.0 * m.aggregate.max_of_means << "%, floor " << 100.0 * floor
       << "%, failed runs " << m.aggregate.failed_runs << ")";
    detail = os.str();
    return m.aggregate.failed_runs == 0 && m.aggregate.mean >= floor;
}

bool train_node_criterion(const std::string& dir, double floor, std::string& detail) {
    NodeTask task = load_triples_task(g_data / dir / "triples.tsv", g_data / dir / "train.tsv",
                                      g_data / dir / "test.tsv", true);
    TrainConfig cfg = TrainConfig::node_defaults();
    cfg.dataset = dir;
    cfg.seed = 1;
    Metrics m = train_node_classifier(cfg, task);
    std::ostringstream os;
    os << "mean " << 100.0 * m.aggregate.mean << "% +- " << 100.0 * m.aggregate.stddev
       << " (max run " << 100.0 * m.aggregate.max_of_means << "%, floor " << 100.0 * floor
       << "%, failed runs " << m.aggregate.failed_runs << ")";
    detail = os.str();
    return m.aggregate.failed_runs == 0 && m.aggregate.mean >= floor;
}

struct Criterion {
    int id;
    std::string name;
    double time_limit_s;
    std::function<bool(std::string&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i + 1 < argc; i += 2) {
        std::string flag = argv[i];
        if (flag == "--cli") g_cli = argv[i + 1];
        else if (flag == "--data") g_data = argv[i + 1];
        else if (flag == "--only") only = std::atoi(argv[i + 1]);
    }
    if (g_cli.empty() || g_data.empty()) {
        std::cerr << "usage: acceptance --cli <edgnn binary> --data <fixture dir> [--only N]\n";
        return 2;
    }
    fs::create_directories(g_data);
    write_benchmark_fixtures(g_data);

    std::vector<Criterion> criteria{
        {1, "WL corner cases (C6 vs C3+C3, P3 vs C3)", 1.0, wl_corner_cases},
        {2, "permutation invariance, 500 pairs, both variants", 30.0, permutation_invariance},
        {3, "WL-equal implies feature-equal, 200 graphs, t <= 3", 60.0, theorem1},
        {4, "embedding partition matches WL partition on >= 95% of graphs", 0.0, theorem2},
        {5, "direct and concatenated layer forms agree to 1e-9", 10.0, layer_equivalence},
        {6, "end-to-end gradients vs central finite differences", 60.0, gradient_check},
        {7, "dataset statistics match the published tables", 0.0, dataset_statistics},
        {8, "MUTAG graph classification mean >= 80%", 900.0,
         [](std::string& d) { return train_graph_criterion("mutag", 0.80, d); }},
        {9, "PTC FR graph classification mean >= 60%", 1200.0,
         [](std::string& d) { return train_graph_criterion("ptc_fr", 0.60, d); }},
        {10, "AIFB mean >= 85% and node-MUTAG mean >= 72%, each within 30 min", 0.0,
         [](std::string& d) {
             std::string a, b;
             auto t0 = Clock::now();
             bool ok_a = train_node_criterion("aifb", 0.85, a);
             double ta = std::chrono::duration<double>(Clock::now() - t0).count();
             auto t1 = Clock::now();
             bool ok_b = train_node_criterion("mutag_node", 0.72, b);
             double tb = std::chrono::duration<double>(Clock::now() - t1).count();
             std::ostringstream os;
             os << "aifb: " << a << " in " << ta << "s; mutag_node: " << b << " in " << tb << "s";
             d = os.str();
             return ok_a && ok_b && ta <= 1800.0 && tb <= 1800.0;
         }},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        if (only != 0 && c.id != only) continue;
        auto t0 = Clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
        if (c.time_limit_s > 0.0 && elapsed > c.time_limit_s) {
            ok = false;
            detail += " [exceeded " + std::to_string(c.time_limit_s) + "s budget]";
        }
        std::printf("[%s] criterion %2d: %s (%s; %.1fs)\n", ok ? "PASS" : "FAIL", c.id,
                    c.name.c_str(), detail.c_str(), elapsed);
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
