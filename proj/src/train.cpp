#include "edgnn/train.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <thread>

using json = nlohmann::json;

namespace edgnn {

TrainConfig TrainConfig::graph_defaults() {
    TrainConfig c;
    c.task = TaskKind::graph;
    c.layers = 2;
    c.hidden = 64;
    c.lr = 1e-4;
    c.weight_decay = 5e-4;
    c.dropout = 0.0;
    c.batch_size = 8;
    c.max_epochs = 40;
    c.patience = 5;
    c.runs = 10;
    c.folds = 10;
    return c;
}

TrainConfig TrainConfig::node_defaults() {
    TrainConfig c;
    c.task = TaskKind::node;
    c.layers = 2;
    c.hidden = 64;
    c.lr = 5e-3;
    c.weight_decay = 0.0;
    c.dropout = 0.5;
    c.batch_size = 0;
    c.max_epochs = 400;
    c.patience = 20;
    c.runs = 10;
    c.folds = 0;
    return c;
}

namespace {

int resolve_jobs(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::max(1u, std::min(hw, 8u)));
}

// Results are written to pre-assigned slots, so the schedule cannot affect
// the output.
void run_parallel(std::vector<std::function<void()>>& tasks, int jobs) {
    jobs = std::min<int>(jobs, static_cast<int>(tasks.size()));
    if (jobs <= 1) {
        for (auto& t : tasks) t();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j)
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                tasks[i]();
            }
        });
    for (auto& t : pool) t.join();
}

struct EvalResult {
    double loss = 0.0;
    double acc = 0.0;
};

EvalResult evaluate(const EdGNNModel& model, const Batch& batch) {
    Tape tape;
    Rng rng(0);
    ForwardResult fr = model_forward(tape, model, batch, /*train_mode=*/false, rng);
    Tensor loss = tape.softmax_cross_entropy(fr.logits, batch.targets);
    int correct = 0;
    for (int r = 0; r < fr.logits.rows(); ++r) {
        int arg = 0;
        for (int c = 1; c < fr.logits.cols(); ++c)
            if (fr.logits(r, c) > fr.logits(r, arg)) arg = c;
        if (arg == batch.targets[static_cast<std::size_t>(r)]) ++correct;
    }
    EvalResult res;
    res.loss = loss(0, 0);
    res.acc = fr.logits.rows() > 0 ? static_cast<double>(correct) / fr.logits.rows() : 0.0;
    return res;
}

Batch build_graph_batch(const GraphDataset& ds, const FeatureSpace& space,
                        std::span<const int> idx) {
    std::vector<const Graph*> parts;
    parts.reserve(idx.size());
    for (int i : idx) parts.push_back(&ds.graphs[static_cast<std::size_t>(i)]);
    Graph u = disjoint_union(parts);
    Batch b = make_batch(u, space);
    b.graph_segments.clear();
    b.graph_segments.reserve(static_cast<std::size_t>(u.num_nodes()));
    for (std::size_t gi = 0; gi < parts.size(); ++gi)
        for (int v = 0; v < parts[gi]->num_nodes(); ++v)
            b.graph_segments.push_back(static_cast<int>(gi));
    b.num_graphs = static_cast<int>(parts.size());
    b.targets.clear();
    for (int i : idx) b.targets.push_back(ds.graph_labels[static_cast<std::size_t>(i)]);
    return b;
}

std::vector<Tensor> snapshot(const std::vector<Tensor*>& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const Tensor* p : params) out.push_back(p->clone());
    return out;
}

void restore(const std::vector<Tensor*>& params, const std::vector<Tensor>& snap) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->vec() = snap[i].vec();
}

void train_step(EdGNNModel& model, const Batch& batch, AdamState& adam, Rng& rng, int epoch) {
    Tape tape;
    ForwardResult fr = model_forward(tape, model, batch, /*train_mode=*/true, rng);
    Tensor loss = tape.softmax_cross_entropy(fr.logits, batch.targets);
    if (!std::isfinite(loss(0, 0)))
        throw std::runtime_error("divergence: non-finite training loss at epoch " +
                                 std::to_string(epoch));
    tape.backward(loss);
    std::vector<Tensor> grads;
    grads.reserve(fr.param_handles.size());
    for (const Tensor& h : fr.param_handles) grads.push_back(tape.grad(h));
    std::vector<Tensor*> params = model.params();
    adam_step(params, grads, adam);
}

FoldRecord train_graph_fold(const GraphDataset& ds, const FeatureSpace& space, const Fold& fold,
                            const TrainConfig& cfg, int run, int fold_idx) {
    FoldRecord rec;
    rec.run = run;
    rec.fold = fold_idx;
    try {
        Rng rng(Rng::mix(Rng::mix(cfg.seed, static_cast<std::uint64_t>(run)),
                         0x666f6c64ULL + static_cast<std::uint64_t>(fold_idx)));
        EdGNNModel model = EdGNNModel::make(
            TaskKind::graph, space.width, cfg.hidden, cfg.layers, ds.vocab->edge_labels.size(),
            ds.class_dict.size(), cfg.edge_mode, cfg.dropout, rng);
        AdamState adam = AdamState::init(
            model.params(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
        Batch val_batch = build_graph_batch(ds, space, fold.val);
        Batch test_batch = build_graph_batch(ds, space, fold.test);

        double best_val = std::numeric_limits<double>::infinity();
        std::vector<Tensor> best_weights = snapshot(model.params());
        int best_epoch = 0;
        int last_epoch = 0;
        std::vector<int> order = fold.train;
        for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
            last_epoch = epoch;
            rng.shuffle(order);
            for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
                std::size_t end = std::min(at + static_cast<std::size_t>(cfg.batch_size), order.size());
                Batch batch = build_graph_batch(ds, space, {order.data() + at, end - at});
                train_step(model, batch, adam, rng, epoch);
            }
            EvalResult val = evaluate(model, val_batch);
            if (!std::isfinite(val.loss))
                throw std::runtime_error("divergence: non-finite validation loss at epoch " +
                                         std::to_string(epoch));
            if (val.loss < best_val) {
                best_val = val.loss;
                best_epoch = epoch;
                best_weights = snapshot(model.params());
            } else if (epoch - best_epoch >= cfg.patience) {
                break;
            }
        }
        restore(model.params(), best_weights);
        rec.test_acc = evaluate(model, test_batch).acc;
        rec.best_epoch = best_epoch;
        rec.stopped_epoch = last_epoch;
        rec.best_val_loss = best_val;
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.note = e.what();
    }
    return rec;
}

// Stratified 10% (at least one node per class) of the fixed training split.
std::pair<std::vector<std::pair<int, int>>, std::vector<std::pair<int, int>>> carve_validation(
    const std::vector<std::pair<int, int>>& train_nodes, int num_classes, Rng& rng) {
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < train_nodes.size(); ++i)
        by_class[static_cast<std::size_t>(train_nodes[i].second)].push_back(static_cast<int>(i));
    std::vector<char> in_val(train_nodes.size(), 0);
    for (auto& members : by_class) {
        if (members.empty()) continue;
        rng.shuffle(members);
        std::size_t take = std::max<std::size_t>(1, (members.size() + 9) / 10);
        take = std::min(take, members.size());
        for (std::size_t i = 0; i < take; ++i) in_val[static_cast<std::size_t>(members[i])] = 1;
    }
    std::pair<std::vector<std::pair<int, int>>, std::vector<std::pair<int, int>>> out;
    for (std::size_t i = 0; i < train_nodes.size(); ++i)
        (in_val[i] ? out.second : out.first).push_back(train_nodes[i]);
    return out;
}

Batch with_targets(const Batch& base, const std::vector<std::pair<int, int>>& nodes) {
    Batch b = base;
    b.target_rows.clear();
    b.targets.clear();
    for (auto [node, cls] : nodes) {
        b.target_rows.push_back(node);
        b.targets.push_back(cls);
    }
    return b;
}

FoldRecord train_node_run(const NodeTask& task, const Batch& base, const FeatureSpace& space,
                          const TrainConfig& cfg, int run) {
    FoldRecord rec;
    rec.run = run;
    rec.fold = 0;
    try {
        Rng rng(Rng::mix(cfg.seed, static_cast<std::uint64_t>(run)));
        auto [train_nodes, val_nodes] = carve_validation(task.train_nodes, task.class_dict.size(), rng);
        Batch train_batch = with_targets(base, train_nodes);
        Batch val_batch = with_targets(base, val_nodes);
        Batch test_batch = with_targets(base, task.test_nodes);

        EdGNNModel model = EdGNNModel::make(
            TaskKind::node, space.width, cfg.hidden, cfg.layers,
            task.graph.vocab()->edge_labels.size(), task.class_dict.size(), cfg.edge_mode,
            cfg.dropout, rng);
        AdamState adam = AdamState::init(
            model.params(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});

        double best_val = std::numeric_limits<double>::infinity();
        std::vector<Tensor> best_weights = snapshot(model.params());
        int best_epoch = 0;
        int last_epoch = 0;
        for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
            last_epoch = epoch;
            train_step(model, train_batch, adam, rng, epoch);
            EvalResult val = evaluate(model, val_batch);
            if (!std::isfinite(val.loss))
                throw std::runtime_error("divergence: non-finite validation loss at epoch " +
                                         std::to_string(epoch));
            if (val.loss < best_val) {
                best_val = val.loss;
                best_epoch = epoch;
                best_weights = snapshot(model.params());
            } else if (epoch - best_epoch >= cfg.patience) {
                break;
            }
        }
        restore(model.params(), best_weights);
        rec.test_acc = evaluate(model, test_batch).acc;
        rec.best_epoch = best_epoch;
        rec.stopped_epoch = last_epoch;
        rec.best_val_loss = best_val;
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.note = e.what();
    }
    return rec;
}

}  // namespace

Aggregate aggregate_from_records(const std::vector<FoldRecord>& per_fold,
                                 std::vector<RunRecord>& per_run_out) {
    per_run_out.clear();
    int max_run = -1;
    for (const FoldRecord& f : per_fold) max_run = std::max(max_run, f.run);
    Aggregate agg;
    std::vector<double> means;
    for (int run = 0; run <= max_run; ++run) {
        double sum = 0.0;
        int count = 0;
        bool failed = false;
        for (const FoldRecord& f : per_fold) {
            if (f.run != run) continue;
            failed = failed || f.failed;
            sum += f.test_acc;
            ++count;
        }
        if (count == 0) continue;
        RunRecord r;
        r.run = run;
        r.failed = failed;
        r.mean_acc = failed ? 0.0 : sum / count;
        per_run_out.push_back(r);
        if (failed) {
            ++agg.failed_runs;
            continue;
        }
        means.push_back(r.mean_acc);
        agg.max_of_means = std::max(agg.max_of_means, r.mean_acc);
    }
    for (const FoldRecord& f : per_fold)
        if (!f.failed) agg.max_of_folds = std::max(agg.max_of_folds, f.test_acc);
    if (!means.empty()) {
        double sum = 0.0;
        for (double v : means) sum += v;
        agg.mean = sum / static_cast<double>(means.size());
        if (means.size() > 1) {
            double ss = 0.0;
            for (double v : means) ss += (v - agg.mean) * (v - agg.mean);
            agg.stddev = std::sqrt(ss / static_cast<double>(means.size() - 1));
        }
    }
    return agg;
}

Metrics train_graph_classifier(const TrainConfig& cfg, const GraphDataset& ds) {
    if (cfg.task != TaskKind::graph)
        throw std::invalid_argument("train_graph_classifier: config task is not graph");
    Metrics m;
    m.config = cfg;
    FeatureSpace space = FeatureSpace::labels(*ds.vocab);
    std::vector<FoldPlan> plans;
    plans.reserve(static_cast<std::size_t>(cfg.runs));
    for (int run = 0; run < cfg.runs; ++run)
        plans.push_back(kfold_split(ds, cfg.folds, Rng::mix(cfg.seed, static_cast<std::uint64_t>(run))));

    m.per_fold.resize(static_cast<std::size_t>(cfg.runs) * static_cast<std::size_t>(cfg.folds));
    std::vector<std::function<void()>> tasks;
    for (int run = 0; run < cfg.runs; ++run)
        for (int f = 0; f < cfg.folds; ++f) {
            std::size_t slot = static_cast<std::size_t>(run) * static_cast<std::size_t>(cfg.folds) +
                               static_cast<std::size_t>(f);
            const Fold& fold = plans[static_cast<std::size_t>(run)].folds[static_cast<std::size_t>(f)];
            tasks.push_back([&, run, f, slot, fold] {
                m.per_fold[slot] = train_graph_fold(ds, space, fold, cfg, run, f);
            });
        }
    run_parallel(tasks, resolve_jobs(cfg.jobs));
    m.aggregate = aggregate_from_records(m.per_fold, m.per_run);
    return m;
}

Metrics train_node_classifier(const TrainConfig& cfg, const NodeTask& task) {
    if (cfg.task != TaskKind::node)
        throw std::invalid_argument("train_node_classifier: config task is not node");
    Metrics m;
    m.config = cfg;
    FeatureSpace space = FeatureSpace::in_degrees(task.graph);
    Batch base = make_batch(task.graph, space);

    m.per_fold.resize(static_cast<std::size_t>(cfg.runs));
    std::vector<std::function<void()>> tasks;
    for (int run = 0; run < cfg.runs; ++run)
        tasks.push_back([&, run] {
            m.per_fold[static_cast<std::size_t>(run)] = train_node_run(task, base, space, cfg, run);
        });
    run_parallel(tasks, resolve_jobs(cfg.jobs));
    m.aggregate = aggregate_from_records(m.per_fold, m.per_run);
    return m;
}

namespace {

json config_to_json(const TrainConfig& c) {
    return json{{"task", c.task == TaskKind::graph ? "graph" : "node"},
                {"layers", c.layers},
                {"hidden", c.hidden},
                {"lr", c.lr},
                {"weight_decay", c.weight_decay},
                {"dropout", c.dropout},
                {"batch_size", c.batch_size},
                {"max_epochs", c.max_epochs},
                {"patience", c.patience},
                {"runs", c.runs},
                {"folds", c.folds},
                {"seed", c.seed},
                {"dataset", c.dataset},
                {"reverse_edges", c.reverse_edges},
                {"edge_mode", c.edge_mode == EdgeFeatureMode::one_hot ? "one_hot" : "learned"},
                {"jobs", c.jobs}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.task = j.at("task").get<std::string>() == "graph" ? TaskKind::graph : TaskKind::node;
    c.layers = j.at("layers").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.lr = j.at("lr").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.dropout = j.at("dropout").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.patience = j.at("patience").get<int>();
    c.runs = j.at("runs").get<int>();
    c.folds = j.at("folds").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.dataset = j.at("dataset").get<std::string>();
    c.reverse_edges = j.at("reverse_edges").get<bool>();
    c.edge_mode = j.at("edge_mode").get<std::string>() == "one_hot" ? EdgeFeatureMode::one_hot
                                                                    : EdgeFeatureMode::learned;
    c.jobs = j.at("jobs").get<int>();
    return c;
}

}  // namespace

std::string metrics_to_json(const Metrics& m) {
    json j;
    j["config"] = config_to_json(m.config);
    j["per_fold"] = json::array();
    for (const FoldRecord& f : m.per_fold)
        j["per_fold"].push_back(json{{"run", f.run},
                                     {"fold", f.fold},
                                     {"test_acc", f.test_acc},
                                     {"best_epoch", f.best_epoch},
                                     {"stopped_epoch", f.stopped_epoch},
                                     {"best_val_loss", f.best_val_loss},
                                     {"failed", f.failed},
                                     {"note", f.note}});
    j["per_run"] = json::array();
    for (const RunRecord& r : m.per_run)
        j["per_run"].push_back(json{{"run", r.run}, {"mean_acc", r.mean_acc}, {"failed", r.failed}});
    j["aggregate"] = json{{"mean", m.aggregate.mean},
                          {"std", m.aggregate.stddev},
                          {"max_of_means", m.aggregate.max_of_means},
                          {"max_of_folds", m.aggregate.max_of_folds},
                          {"failed_runs", m.aggregate.failed_runs}};
    return j.dump(2) + "\n";
}

Metrics metrics_from_json(const std::string& text) {
    json j = json::parse(text);
    Metrics m;
    m.config = config_from_json(j.at("config"));
    for (const json& f : j.at("per_fold")) {
        FoldRecord r;
        r.run = f.at("run").get<int>();
        r.fold = f.at("fold").get<int>();
        r.test_acc = f.at("test_acc").get<double>();
        r.best_epoch = f.at("best_epoch").get<int>();
        r.stopped_epoch = f.at("stopped_epoch").get<int>();
        r.best_val_loss = f.at("best_val_loss").get<double>();
        r.failed = f.at("failed").get<bool>();
        r.note = f.at("note").get<std::string>();
        m.per_fold.push_back(r);
    }
    for (const json& rr : j.at("per_run")) {
        RunRecord r;
        r.run = rr.at("run").get<int>();
        r.mean_acc = rr.at("mean_acc").get<double>();
        r.failed = rr.at("failed").get<bool>();
        m.per_run.push_back(r);
    }
    const json& a = j.at("aggregate");
    m.aggregate.mean = a.at("mean").get<double>();
    m.aggregate.stddev = a.at("std").get<double>();
    m.aggregate.max_of_means = a.at("max_of_means").get<double>();
    m.aggregate.max_of_folds = a.at("max_of_folds").get<double>();
    m.aggregate.failed_runs = a.at("failed_runs").get<int>();
    return m;
}

std::string render_report(const std::vector<std::pair<std::string, Metrics>>& entries) {
    std::ostringstream out;
    out << "accuracy over runs; std = sample standard deviation over run means (n-1 denominator)\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-24s %14s %14s %14s %8s\n", "name", "avg +- std",
                  "max(run-avg)", "max(fold)", "failed");
    out << buf;
    for (const auto& [name, metrics] : entries) {
        std::vector<RunRecord> recomputed_runs;
        Aggregate agg = aggregate_from_records(metrics.per_fold, recomputed_runs);
        std::snprintf(buf, sizeof(buf), "%-24s %6.1f +- %4.1f %14.1f %14.1f %8d\n", name.c_str(),
                      100.0 * agg.mean, 100.0 * agg.stddev, 100.0 * agg.max_of_means,
                      100.0 * agg.max_of_folds, agg.failed_runs);
        out << buf;
    }
    return out.str();
}

GradCheckResult run_gradcheck(int num_seeds, std::uint64_t seed) {
    GradCheckResult res;
    const double h = 1e-5;
    for (int s = 0; s < num_seeds; ++s) {
        bool done = false;
        for (int attempt = 0; attempt < 50 && !done; ++attempt) {
            Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(s) * 100 + static_cast<std::uint64_t>(attempt)));
            int num_graphs = 2 + rng.uniform_int(2);
            int node_labels = 2 + rng.uniform_int(2);
            int edge_labels = 2 + rng.uniform_int(2);

            Graph unioned = gen_random_graph(4 + rng.uniform_int(4), 0.35, node_labels, edge_labels,
                                             rng.next_u64());
            std::vector<int> sizes{unioned.num_nodes()};
            for (int gi = 1; gi < num_graphs; ++gi) {
                Graph g = gen_random_graph(4 + rng.uniform_int(4), 0.35, node_labels, edge_labels,
                                           rng.next_u64());
                sizes.push_back(g.num_nodes());
                unioned = disjoint_union(unioned, g);
            }
            FeatureSpace space = FeatureSpace::labels(*unioned.vocab());
            Batch batch = make_batch(unioned, space);
            batch.graph_segments.clear();
            for (std::size_t gi = 0; gi < sizes.size(); ++gi)
                for (int v = 0; v < sizes[gi]; ++v) batch.graph_segments.push_back(static_cast<int>(gi));
            batch.num_graphs = num_graphs;
            for (int gi = 0; gi < num_graphs; ++gi) batch.targets.push_back(rng.uniform_int(2));

            Rng init_rng(rng.next_u64());
            EdgeFeatureMode mode = s % 3 == 2 ? EdgeFeatureMode::learned : EdgeFeatureMode::one_hot;
            EdGNNModel model = EdGNNModel::make(TaskKind::graph, space.width, 4, 2,
                                                unioned.vocab()->edge_labels.size(), 2, mode, 0.0,
                                                init_rng);

            auto loss_value = [&]() {
                Tape tape;
                Rng r0(0);
                ForwardResult fr = model_forward(tape, model, batch, false, r0);
                return tape.softmax_cross_entropy(fr.logits, batch.targets)(0, 0);
            };

            Tape tape;
            Rng r0(0);
            ForwardResult fr = model_forward(tape, model, batch, false, r0);
            double min_pre = std::numeric_limits<double>::infinity();
            for (const Tensor& pre : fr.pre_activations)
                for (std::int64_t i = 0; i < pre.size(); ++i)
                    min_pre = std::min(min_pre, std::abs(pre.raw()[i]));
            if (min_pre <= 1e-3) continue;  // too close to the ReLU kink; resample

            Tensor loss = tape.softmax_cross_entropy(fr.logits, batch.targets);
            tape.backward(loss);
            std::vector<Tensor> grads;
            for (const Tensor& handle : fr.param_handles) grads.push_back(tape.grad(handle));

            std::vector<Tensor*> params = model.params();
            for (std::size_t pi = 0; pi < params.size(); ++pi) {
                Tensor& p = *params[pi];
                for (std::int64_t k = 0; k < p.size(); ++k) {
                    const double saved = p.raw()[k];
                    p.raw()[k] = saved + h;
                    double lp = loss_value();
                    p.raw()[k] = saved - h;
                    double lm = loss_value();
                    p.raw()[k] = saved;
                    double numeric = (lp - lm) / (2 * h);
                    double analytic = grads[pi].raw()[k];
                    ++res.params_checked;
                    double diff = std::abs(analytic - numeric);
                    if (diff < 1e-9) continue;
                    double rel = diff / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
                    res.max_rel_err = std::max(res.max_rel_err, rel);
                    if (rel >= 1e-4)
                        res.notes.push_back("seed " + std::to_string(s) + " param " +
                                            std::to_string(pi) + "[" + std::to_string(k) +
                                            "]: analytic " + std::to_string(analytic) +
                                            " vs numeric " + std::to_string(numeric));
                }
            }
            done = true;
        }
        if (!done) {
            res.notes.push_back("seed " + std::to_string(s) +
                                ": no configuration cleared the ReLU kink margin");
        } else {
            ++res.seeds_run;
        }
    }
    res.ok = res.seeds_run == num_seeds && res.notes.empty();
    return res;
}

}  // namespace edgnn
