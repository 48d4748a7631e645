#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "edgnn/data.hpp"
#include "edgnn/fixtures.hpp"
#include "edgnn/train.hpp"
#include "edgnn/wl.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace edgnn;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot create " + path);
    f << text;
}

int cmd_wl_test(const std::string& a_path, const std::string& b_path, const std::string& variant,
                const std::string& out) {
    Graph a = load_graph_json(a_path);
    Graph b = load_graph_json(b_path);
    WlVariant v = variant == "undirected" ? WlVariant::undirected : WlVariant::directed_labeled;
    WlTestResult res = wl_isomorphism_test(a, b, v);

    std::vector<int> rows_a, rows_b;
    for (int i = 0; i < res.nodes_a; ++i) rows_a.push_back(i);
    if (!res.joint_history.empty())
        for (int i = res.nodes_a; i < static_cast<int>(res.joint_history[0].colors.size()); ++i)
            rows_b.push_back(i);

    for (const Coloring& c : res.joint_history) {
        auto ha = color_histogram(c, rows_a);
        auto hb = color_histogram(c, rows_b);
        std::cout << "step " << c.step << ":";
        std::map<int, std::pair<int, int>> merged;
        for (auto [color, n] : ha) merged[color].first = n;
        for (auto [color, n] : hb) merged[color].second = n;
        for (auto [color, counts] : merged) {
            std::cout << "  c" << color << ": " << counts.first << "/" << counts.second;
            if (counts.first != counts.second) std::cout << " <-";
        }
        std::cout << "\n";
    }
    bool possibly = res.verdict == WlVerdict::PossiblyIsomorphic;
    std::cout << (possibly ? "PossiblyIsomorphic" : "NonIsomorphic") << " (decided at step "
              << res.decided_at_step << ")\n";
    if (!out.empty()) {
        json j{{"verdict", possibly ? "PossiblyIsomorphic" : "NonIsomorphic"},
               {"decided_at_step", res.decided_at_step},
               {"steps", res.joint_history.size()}};
        write_text(out, j.dump(2) + "\n");
    }
    return possibly ? 0 : 1;
}

void add_common_train_flags(CLI::App* cmd, TrainConfig& cfg) {
    cmd->add_option("--layers", cfg.layers, "message-passing layers");
    cmd->add_option("--hidden", cfg.hidden, "hidden width");
    cmd->add_option("--lr", cfg.lr, "learning rate");
    cmd->add_option("--weight-decay", cfg.weight_decay, "decoupled weight decay");
    cmd->add_option("--dropout", cfg.dropout, "dropout probability");
    cmd->add_option("--max-epochs", cfg.max_epochs, "epoch cap");
    cmd->add_option("--patience", cfg.patience, "early-stopping patience");
    cmd->add_option("--runs", cfg.runs, "number of seeds");
    cmd->add_option("--seed", cfg.seed, "base seed");
    cmd->add_option("--jobs", cfg.jobs, "parallel jobs (0 = auto)");
}

int report_metrics(const Metrics& m, const std::string& name, const std::string& out) {
    std::cout << render_report({{name, m}});
    if (!out.empty()) write_text(out, metrics_to_json(m));
    for (const FoldRecord& f : m.per_fold)
        if (f.failed)
            std::cerr << "run " << f.run << " fold " << f.fold << " failed: " << f.note << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Directed labeled Weisfeiler-Lehman refinement and edGNN training toolkit"};
    app.require_subcommand(1);

    // wl-test
    std::string wa, wb, wvariant = "directed_labeled", wout;
    CLI::App* wl = app.add_subcommand("wl-test", "pairwise color-refinement test on two graph files");
    wl->add_option("--a", wa, "first graph (JSON)")->required();
    wl->add_option("--b", wb, "second graph (JSON)")->required();
    wl->add_option("--variant", wvariant, "undirected | directed_labeled")
        ->check(CLI::IsMember({"undirected", "directed_labeled"}));
    wl->add_option("--out", wout, "write verdict JSON here");

    // train-graph
    TrainConfig gcfg = TrainConfig::graph_defaults();
    std::string gout;
    CLI::App* tg = app.add_subcommand("train-graph", "k-fold graph classification training");
    tg->add_option("--dataset", gcfg.dataset, "dataset directory (adjacency corpus layout)")->required();
    tg->add_option("--batch", gcfg.batch_size, "minibatch size");
    tg->add_option("--folds", gcfg.folds, "cross-validation folds");
    add_common_train_flags(tg, gcfg);
    tg->add_option("--out", gout, "write metrics JSON here");

    // train-node
    TrainConfig ncfg = TrainConfig::node_defaults();
    std::string nout;
    bool reg = false, emb = false;
    CLI::App* tn = app.add_subcommand("train-node", "fixed-split node classification training");
    tn->add_option("--dataset", ncfg.dataset, "directory with triples.tsv, train.tsv, test.tsv")->required();
    tn->add_flag("--reg", reg, "do not add reversed edges");
    tn->add_flag("--emb", emb, "learned edge embeddings instead of one-hot");
    add_common_train_flags(tn, ncfg);
    tn->add_option("--out", nout, "write metrics JSON here");

    // gradcheck
    int gc_seeds = 20;
    std::uint64_t gc_seed = 0;
    std::string gc_out;
    CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check of the tape gradients");
    gc->add_option("--seeds", gc_seeds, "number of random configurations");
    gc->add_option("--seed", gc_seed, "base seed");
    gc->add_option("--out", gc_out, "write summary JSON here");

    // report
    std::vector<std::string> report_files;
    std::string rep_out;
    CLI::App* rep = app.add_subcommand("report", "tabulate metrics JSON files");
    rep->add_option("files", report_files, "metrics JSON files")->required();
    rep->add_option("--out", rep_out, "write combined JSON here");

    // make-fixtures
    std::string fx_out = "data";
    CLI::App* fx = app.add_subcommand("make-fixtures", "write the deterministic benchmark corpora");
    fx->add_option("--out", fx_out, "output root directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (wl->parsed()) return cmd_wl_test(wa, wb, wvariant, wout);

        if (tg->parsed()) {
            GraphDataset ds = load_tu_dataset(gcfg.dataset);
            Metrics m = train_graph_classifier(gcfg, ds);
            return report_metrics(m, fs::path(gcfg.dataset).filename().string(), gout);
        }

        if (tn->parsed()) {
            ncfg.reverse_edges = !reg;
            ncfg.edge_mode = emb ? EdgeFeatureMode::learned : EdgeFeatureMode::one_hot;
            fs::path dir(ncfg.dataset);
            NodeTask task = load_triples_task(dir / "triples.tsv", dir / "train.tsv",
                                              dir / "test.tsv", ncfg.reverse_edges);
            Metrics m = train_node_classifier(ncfg, task);
            return report_metrics(m, dir.filename().string(), nout);
        }

        if (gc->parsed()) {
            GradCheckResult r = run_gradcheck(gc_seeds, gc_seed);
            std::cout << "gradcheck: " << (r.ok ? "ok" : "FAILED") << " (" << r.seeds_run << "/"
                      << gc_seeds << " seeds, " << r.params_checked
                      << " parameters, max rel err " << r.max_rel_err << ")\n";
            for (const std::string& n : r.notes) std::cerr << "  " << n << "\n";
            if (!gc_out.empty()) {
                json j{{"ok", r.ok},
                       {"seeds_run", r.seeds_run},
                       {"params_checked", r.params_checked},
                       {"max_rel_err", r.max_rel_err},
                       {"notes", r.notes}};
                write_text(gc_out, j.dump(2) + "\n");
            }
            return r.ok ? 0 : 1;
        }

        if (rep->parsed()) {
            std::vector<std::pair<std::string, Metrics>> entries;
            json combined = json::array();
            for (const std::string& file : report_files) {
                std::ifstream f(file);
                if (!f) throw std::runtime_error("cannot open " + file);
                std::stringstream ss;
                ss << f.rdbuf();
                Metrics m = metrics_from_json(ss.str());
                entries.emplace_back(fs::path(file).stem().string(), m);
                combined.push_back(json::parse(metrics_to_json(m)));
            }
            std::cout << render_report(entries);
            if (!rep_out.empty()) write_text(rep_out, combined.dump(2) + "\n");
            return 0;
        }

        if (fx->parsed()) {
            write_benchmark_fixtures(fx_out);
            std::cout << "fixtures ready under " << fx_out << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
