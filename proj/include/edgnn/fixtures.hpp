#pragma once

#include <filesystem>

#include "edgnn/data.hpp"

namespace edgnn {

/// Deterministic molecule-style graph-classification corpora. Statistics
/// (graph count, class count, label dictionary sizes, average nodes/bonds)
/// are pinned to the published benchmark values; the class signal is a
/// nitro-like motif count plus controlled label noise.
GraphDataset make_mutag_like();
GraphDataset make_ptc_fr_like();

/// Deterministic knowledge-graph node-classification corpora written as
/// triples.tsv / train.tsv / test.tsv. Entity, triple and relation counts
/// are pinned; labeled entities link to class hubs whose degrees are pinned
/// to distinct values so the class is recoverable via message passing.
void write_aifb_like(const std::filesystem::path& dir);
void write_mutag_node_like(const std::filesystem::path& dir);

/// Writes all four corpora under root/{mutag,ptc_fr,aifb,mutag_node},
/// skipping any that already exist.
void write_benchmark_fixtures(const std::filesystem::path& root);

}  // namespace edgnn
