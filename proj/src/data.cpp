#include "edgnn/data.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "edgnn/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace edgnn {

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    // Trailing blank lines are tolerated; interior ones are not.
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

[[noreturn]] void line_error(const fs::path& path, std::size_t lineno, const std::string& what) {
    throw std::runtime_error(path.string() + ":" + std::to_string(lineno + 1) + ": " + what);
}

long parse_long(const fs::path& path, std::size_t lineno, const std::string& text) {
    try {
        std::size_t used = 0;
        long v = std::stol(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        line_error(path, lineno, "expected an integer, got '" + text + "'");
    }
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    std::size_t b = s.find_last_not_of(" \t");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

}  // namespace

DatasetStats GraphDataset::stats() const {
    DatasetStats s;
    s.num_graphs = static_cast<int>(graphs.size());
    s.num_classes = class_dict.size();
    s.num_node_labels = vocab ? vocab->node_labels.size() : 0;
    s.num_edge_labels = vocab ? vocab->edge_labels.size() : 0;
    double nodes = 0.0, edges = 0.0;
    for (const Graph& g : graphs) {
        nodes += g.num_nodes();
        edges += g.num_edges();
    }
    if (!graphs.empty()) {
        s.avg_nodes = nodes / s.num_graphs;
        s.avg_directed_edges = edges / s.num_graphs;
        s.avg_bonds = edges / 2.0 / s.num_graphs;
    }
    return s;
}

GraphDataset load_tu_dataset(const fs::path& dir) {
    std::string prefix;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        if (name.size() > 6 && name.ends_with("_A.txt")) {
            prefix = name.substr(0, name.size() - 6);
            break;
        }
    }
    if (prefix.empty())
        throw std::runtime_error("load_tu_dataset: no *_A.txt file in " + dir.string());

    const fs::path a_path = dir / (prefix + "_A.txt");
    const fs::path ind_path = dir / (prefix + "_graph_indicator.txt");
    const fs::path glab_path = dir / (prefix + "_graph_labels.txt");
    const fs::path nlab_path = dir / (prefix + "_node_labels.txt");
    const fs::path elab_path = dir / (prefix + "_edge_labels.txt");

    auto a_lines = read_lines(a_path);
    auto ind_lines = read_lines(ind_path);
    auto glab_lines = read_lines(glab_path);
    auto nlab_lines = read_lines(nlab_path);
    auto elab_lines = read_lines(elab_path);

    if (elab_lines.size() != a_lines.size())
        throw std::runtime_error("load_tu_dataset: " + elab_path.string() + " has " +
                                 std::to_string(elab_lines.size()) + " lines but the edge list has " +
                                 std::to_string(a_lines.size()));
    if (nlab_lines.size() != ind_lines.size())
        throw std::runtime_error("load_tu_dataset: node label and graph indicator line counts differ");

    const int num_graphs = static_cast<int>(glab_lines.size());
    const int total_nodes = static_cast<int>(ind_lines.size());

    // Node -> graph map (file is 1-based).
    std::vector<int> node_graph(static_cast<std::size_t>(total_nodes));
    for (std::size_t i = 0; i < ind_lines.size(); ++i) {
        long gid = parse_long(ind_path, i, trim(ind_lines[i]));
        if (gid < 1 || gid > num_graphs)
            line_error(ind_path, i, "graph id " + std::to_string(gid) + " outside [1, " +
                                        std::to_string(num_graphs) + "]");
        node_graph[i] = static_cast<int>(gid - 1);
    }

    auto vocab = std::make_shared<LabelVocab>();
    std::vector<int> node_label_ids(static_cast<std::size_t>(total_nodes));
    for (std::size_t i = 0; i < nlab_lines.size(); ++i)
        node_label_ids[i] = vocab->node_labels.intern(trim(nlab_lines[i]));

    // Per-graph node lists and local re-basing to 0.
    std::vector<int> local_id(static_cast<std::size_t>(total_nodes));
    std::vector<int> graph_size(static_cast<std::size_t>(num_graphs), 0);
    for (int v = 0; v < total_nodes; ++v) local_id[static_cast<std::size_t>(v)] = graph_size[static_cast<std::size_t>(node_graph[static_cast<std::size_t>(v)])]++;

    std::vector<std::vector<int>> labels_per_graph(static_cast<std::size_t>(num_graphs));
    for (int gi = 0; gi < num_graphs; ++gi)
        labels_per_graph[static_cast<std::size_t>(gi)].resize(static_cast<std::size_t>(graph_size[static_cast<std::size_t>(gi)]));
    for (int v = 0; v < total_nodes; ++v)
        labels_per_graph[static_cast<std::size_t>(node_graph[static_cast<std::size_t>(v)])][static_cast<std::size_t>(local_id[static_cast<std::size_t>(v)])] =
            node_label_ids[static_cast<std::size_t>(v)];

    std::vector<std::vector<Edge>> edges_per_graph(static_cast<std::size_t>(num_graphs));
    for (std::size_t i = 0; i < a_lines.size(); ++i) {
        std::string line = a_lines[i];
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        long u = 0, v = 0;
        if (!(ss >> u >> v)) line_error(a_path, i, "expected 'u, v', got '" + a_lines[i] + "'");
        std::string rest;
        if (ss >> rest) line_error(a_path, i, "trailing tokens in '" + a_lines[i] + "'");
        if (u < 1 || u > total_nodes || v < 1 || v > total_nodes)
            line_error(a_path, i, "node id outside [1, " + std::to_string(total_nodes) + "]");
        int su = static_cast<int>(u - 1), sv = static_cast<int>(v - 1);
        if (node_graph[static_cast<std::size_t>(su)] != node_graph[static_cast<std::size_t>(sv)])
            line_error(a_path, i, "edge joins nodes of different graphs");
        int label = vocab->edge_labels.intern(trim(elab_lines[i]));
        edges_per_graph[static_cast<std::size_t>(node_graph[static_cast<std::size_t>(su)])].push_back(
            {local_id[static_cast<std::size_t>(su)], local_id[static_cast<std::size_t>(sv)], label});
    }

    GraphDataset ds;
    ds.vocab = vocab;
    for (int gi = 0; gi < num_graphs; ++gi) {
        ds.graphs.emplace_back(graph_size[static_cast<std::size_t>(gi)], labels_per_graph[static_cast<std::size_t>(gi)],
                               edges_per_graph[static_cast<std::size_t>(gi)], vocab);
        ds.graph_labels.push_back(ds.class_dict.intern(trim(glab_lines[static_cast<std::size_t>(gi)])));
    }
    return ds;
}

void save_tu_dataset(const GraphDataset& ds, const fs::path& dir, const std::string& prefix) {
    fs::create_directories(dir);
    std::ofstream a(dir / (prefix + "_A.txt"));
    std::ofstream ind(dir / (prefix + "_graph_indicator.txt"));
    std::ofstream glab(dir / (prefix + "_graph_labels.txt"));
    std::ofstream nlab(dir / (prefix + "_node_labels.txt"));
    std::ofstream elab(dir / (prefix + "_edge_labels.txt"));
    if (!a || !ind || !glab || !nlab || !elab)
        throw std::runtime_error("save_tu_dataset: cannot create files under " + dir.string());

    int base = 0;
    for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
        const Graph& g = ds.graphs[gi];
        glab << ds.class_dict.name(ds.graph_labels[gi]) << "\n";
        for (int v = 0; v < g.num_nodes(); ++v) {
            ind << gi + 1 << "\n";
            nlab << ds.vocab->node_labels.name(g.node_label(v)) << "\n";
        }
        for (const Edge& e : g.edges()) {
            a << base + e.src + 1 << ", " << base + e.dst + 1 << "\n";
            elab << ds.vocab->edge_labels.name(e.label) << "\n";
        }
        base += g.num_nodes();
    }
}

NodeTask load_triples_task(const fs::path& triples, const fs::path& train, const fs::path& test,
                           bool reverse) {
    auto triple_lines = read_lines(triples);
    NodeTask task;
    task.reversed = reverse;

    auto vocab = std::make_shared<LabelVocab>();
    int entity_label = vocab->node_labels.intern("entity");
    std::vector<Edge> edges;
    edges.reserve(triple_lines.size());
    for (std::size_t i = 0; i < triple_lines.size(); ++i) {
        const std::string& line = triple_lines[i];
        std::size_t t1 = line.find('\t');
        std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos)
            line_error(triples, i, "expected subject<TAB>relation<TAB>object");
        std::string subj = line.substr(0, t1);
        std::string rel = line.substr(t1 + 1, t2 - t1 - 1);
        std::string obj = line.substr(t2 + 1);
        if (subj.empty() || rel.empty() || obj.empty()) line_error(triples, i, "empty field");
        int s = task.entity_dict.intern(subj);
        int o = task.entity_dict.intern(obj);
        int r = vocab->edge_labels.intern(rel);
        edges.push_back({s, o, r});
    }
    task.num_entities = task.entity_dict.size();
    task.num_triples = static_cast<int>(edges.size());
    task.num_relations = vocab->edge_labels.size();

    std::vector<int> labels(static_cast<std::size_t>(task.num_entities), entity_label);
    Graph base(task.num_entities, std::move(labels), std::move(edges), vocab);
    task.graph = reverse ? reverse_augment(base) : std::move(base);

    auto read_split = [&](const fs::path& path) {
        std::vector<std::pair<int, int>> out;
        auto lines = read_lines(path);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            std::size_t t1 = lines[i].find('\t');
            if (t1 == std::string::npos) line_error(path, i, "expected node<TAB>class");
            std::string node = lines[i].substr(0, t1);
            std::string cls = lines[i].substr(t1 + 1);
            auto id = task.entity_dict.find(node);
            if (!id) line_error(path, i, "node '" + node + "' does not appear in the triple file");
            out.emplace_back(*id, task.class_dict.intern(cls));
        }
        return out;
    };
    task.train_nodes = read_split(train);
    task.test_nodes = read_split(test);
    return task;
}

FoldPlan kfold_split(const GraphDataset& ds, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("kfold_split: k must be at least 2");
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(ds.class_dict.size()));
    for (std::size_t i = 0; i < ds.graph_labels.size(); ++i)
        by_class[static_cast<std::size_t>(ds.graph_labels[i])].push_back(static_cast<int>(i));
    for (std::size_t c = 0; c < by_class.size(); ++c)
        if (static_cast<int>(by_class[c].size()) < k)
            throw std::invalid_argument("kfold_split: class " + ds.class_dict.name(static_cast<int>(c)) +
                                        " has only " + std::to_string(by_class[c].size()) +
                                        " graphs for k=" + std::to_string(k));

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.folds.resize(static_cast<std::size_t>(k));

    Rng rng(Rng::mix(seed, 0x666f6c64ULL));  // fold-assignment stream
    std::vector<std::vector<int>> test_of_fold(static_cast<std::size_t>(k));
    // Deal round-robin, carrying the position across classes so overall
    // fold sizes stay within one of each other.
    std::size_t deal_at = 0;
    for (auto& members : by_class) {
        rng.shuffle(members);
        for (int i : members) test_of_fold[deal_at++ % static_cast<std::size_t>(k)].push_back(i);
    }

    for (int f = 0; f < k; ++f) {
        Fold& fold = plan.folds[static_cast<std::size_t>(f)];
        fold.test = test_of_fold[static_cast<std::size_t>(f)];
        std::sort(fold.test.begin(), fold.test.end());
        std::vector<char> in_test(ds.graphs.size(), 0);
        for (int i : fold.test) in_test[static_cast<std::size_t>(i)] = 1;

        // 10% of each class's training portion (>= 1) goes to validation.
        Rng vrng(Rng::mix(seed, 0x76616cULL + static_cast<std::uint64_t>(f)));
        std::vector<char> in_val(ds.graphs.size(), 0);
        for (auto& members : by_class) {
            std::vector<int> pool;
            for (int i : members)
                if (!in_test[static_cast<std::size_t>(i)]) pool.push_back(i);
            std::sort(pool.begin(), pool.end());
            vrng.shuffle(pool);
            std::size_t take = std::max<std::size_t>(1, (pool.size() + 9) / 10);
            take = std::min(take, pool.size());
            for (std::size_t i = 0; i < take; ++i) in_val[static_cast<std::size_t>(pool[i])] = 1;
        }
        for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
            if (in_test[i]) continue;
            (in_val[i] ? fold.val : fold.train).push_back(static_cast<int>(i));
        }
    }
    return plan;
}

std::string fold_plan_to_json(const FoldPlan& plan) {
    json j;
    j["k"] = plan.k;
    j["seed"] = plan.seed;
    j["folds"] = json::array();
    for (const Fold& f : plan.folds)
        j["folds"].push_back({{"train", f.train}, {"val", f.val}, {"test", f.test}});
    return j.dump(2);
}

namespace {

Graph cycle_graphs(const std::vector<int>& cycle_lengths) {
    auto vocab = std::make_shared<LabelVocab>();
    int nl = vocab->node_labels.intern("a");
    int el = vocab->edge_labels.intern("e");
    int n = std::accumulate(cycle_lengths.begin(), cycle_lengths.end(), 0);
    std::vector<Edge> edges;
    int base = 0;
    for (int len : cycle_lengths) {
        for (int i = 0; i < len; ++i) edges.push_back({base + i, base + (i + 1) % len, el});
        base += len;
    }
    return Graph(n, std::vector<int>(static_cast<std::size_t>(n), nl), std::move(edges), vocab);
}

}  // namespace

std::pair<Graph, Graph> gen_wl_hard_pair(int n) {
    if (n < 6 || n % 2 != 0)
        throw std::invalid_argument("gen_wl_hard_pair: n must be even and >= 6, got " + std::to_string(n));
    return {cycle_graphs({n}), cycle_graphs({n / 2, n / 2})};
}

Graph gen_random_graph(int n, double p, int num_node_labels, int num_edge_labels,
                       std::uint64_t seed) {
    if (n < 0 || p < 0.0 || p > 1.0 || num_node_labels < 1 || num_edge_labels < 1)
        throw std::invalid_argument("gen_random_graph: invalid arguments");
    Rng rng(seed);
    auto vocab = std::make_shared<LabelVocab>();
    for (int i = 0; i < num_node_labels; ++i) vocab->node_labels.intern("n" + std::to_string(i));
    for (int i = 0; i < num_edge_labels; ++i) vocab->edge_labels.intern("e" + std::to_string(i));
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) labels.push_back(rng.uniform_int(num_node_labels));
    std::vector<Edge> edges;
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
            if (u == v) continue;
            if (rng.uniform() < p) edges.push_back({u, v, rng.uniform_int(num_edge_labels)});
        }
    return Graph(n, std::move(labels), std::move(edges), vocab);
}

Graph load_graph_json(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    json j = json::parse(f);
    std::vector<std::string> nodes = j.at("nodes").get<std::vector<std::string>>();
    std::vector<std::tuple<int, int, std::string>> edges;
    for (const json& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 3)
            throw std::runtime_error(path.string() + ": each edge must be [src, dst, label]");
        edges.emplace_back(e[0].get<int>(), e[1].get<int>(), e[2].get<std::string>());
    }
    return build_graph(static_cast<int>(nodes.size()), nodes, edges);
}

void save_graph_json(const Graph& g, const fs::path& path) {
    json j;
    j["nodes"] = json::array();
    for (int v = 0; v < g.num_nodes(); ++v) j["nodes"].push_back(g.vocab()->node_labels.name(g.node_label(v)));
    j["edges"] = json::array();
    for (const Edge& e : g.edges())
        j["edges"].push_back({e.src, e.dst, g.vocab()->edge_labels.name(e.label)});
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot create " + path.string());
    f << j.dump(2) << "\n";
}

}  // namespace edgnn
