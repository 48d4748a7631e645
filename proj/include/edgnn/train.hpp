#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgnn/data.hpp"
#include "edgnn/model.hpp"

namespace edgnn {

struct TrainConfig {
    TaskKind task = TaskKind::graph;
    int layers = 2;
    int hidden = 64;
    double lr = 1e-4;
    double weight_decay = 5e-4;
    double dropout = 0.0;
    int batch_size = 8;
    int max_epochs = 40;
    int patience = 5;
    int runs = 10;
    int folds = 10;  // graph task only
    std::uint64_t seed = 0;
    std::string dataset;
    bool reverse_edges = true;                            // node task; false = "reg" variant
    EdgeFeatureMode edge_mode = EdgeFeatureMode::one_hot; // learned = "emb" variant
    int jobs = 0;                                         // 0 = hardware default

    static TrainConfig graph_defaults();
    static TrainConfig node_defaults();
};

struct FoldRecord {
    int run = 0;
    int fold = 0;
    double test_acc = 0.0;
    int best_epoch = 0;
    int stopped_epoch = 0;
    double best_val_loss = 0.0;
    bool failed = false;
    std::string note;
};

struct RunRecord {
    int run = 0;
    double mean_acc = 0.0;
    bool failed = false;
};

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  // sample std over run means (n-1)
    double max_of_means = 0.0;
    double max_of_folds = 0.0;
    int failed_runs = 0;
};

struct Metrics {
    TrainConfig config;
    std::vector<FoldRecord> per_fold;
    std::vector<RunRecord> per_run;
    Aggregate aggregate;
};

/// Stratified k-fold cross validation, `runs` seeds, minibatch training by
/// disjoint union, early stopping on validation cross entropy with
/// best-epoch weight restore.
Metrics train_graph_classifier(const TrainConfig& cfg, const GraphDataset& ds);

/// Full-graph training on the fixed split; an internal stratified 10%
/// carve-out of the training nodes drives early stopping.
Metrics train_node_classifier(const TrainConfig& cfg, const NodeTask& task);

/// Recomputes run means and the aggregate from fold records.
Aggregate aggregate_from_records(const std::vector<FoldRecord>& per_fold,
                                 std::vector<RunRecord>& per_run_out);

std::string metrics_to_json(const Metrics& m);
Metrics metrics_from_json(const std::string& text);

/// Side-by-side table over several metrics files (text form).
std::string render_report(const std::vector<std::pair<std::string, Metrics>>& entries);

struct GradCheckResult {
    int seeds_run = 0;
    int params_checked = 0;
    double max_rel_err = 0.0;
    bool ok = false;
    std::vector<std::string> notes;
};

/// Central finite differences (step 1e-5) against tape gradients on random
/// end-to-end graph-classification losses; configurations whose ReLU
/// pre-activations come within 1e-3 of the kink are resampled.
GradCheckResult run_gradcheck(int num_seeds, std::uint64_t seed);

}  // namespace edgnn
