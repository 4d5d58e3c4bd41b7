#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "voyagecast/config.hpp"
#include "voyagecast/eval.hpp"
#include "voyagecast/features.hpp"
#include "voyagecast/ingest.hpp"
#include "voyagecast/train.hpp"

namespace voyagecast::pipeline {

/// Where each command reads and writes.
///
///   data/raw/        ais.csv statics.csv geofences.geojson ground_truth.jsonl
///   data/processed/  voyages.csv diagnostics.json port_counts.csv series/
///   runs/<id>/       config/ checkpoints/ logs/ reports/
struct Layout {
  explicit Layout(const RunConfig& cfg);

  std::string raw_dir, ais, statics, geofences, ground_truth;
  std::string processed_dir, voyages, diagnostics, port_counts, series_dir;
  std::string run_dir, config_dir, checkpoint, log, timings, reports_dir, attention_dir;
};

// In-memory stages ----------------------------------------------------------

/// Standardized sliding-window samples split chronologically.
struct Dataset {
  std::vector<features::SegmentSeries> series;
  features::Catalog catalog;
  features::FeatureStats stats;
  features::Split split;
  model::VocabSizes vocab;
  std::vector<std::string> names;      ///< "start->end", by segment index
  std::vector<std::size_t> totals;     ///< records per segment, by segment index
};

/// Builds samples for the lookback/horizon of `shape`. Statistics are fitted
/// on the training split unless `fixed` is given.
Dataset prepare(std::vector<features::SegmentSeries> series, features::Catalog catalog,
                const RunConfig& cfg, const model::ModelConfig& shape,
                const features::FeatureStats* fixed = nullptr);

/// Series for every retained segment over windows [1, windows_until(data.end)].
std::vector<features::SegmentSeries> build_series(const std::vector<ingest::VoyageRecord>& records,
                                                  const RunConfig& cfg,
                                                  features::Catalog& catalog);

struct Experiment {
  train::FitResult fit;
  eval::MetricsReport report;
};

/// Trains from scratch on the dataset and scores the test split.
Experiment run_experiment(const Dataset& data, const RunConfig& cfg,
                          std::optional<eval::Ablation> ablation = std::nullopt);

/// Scores a model that always predicts the mean observed training target.
eval::MetricsReport constant_baseline(const Dataset& data);

struct AblationRow {
  std::string name;
  eval::Aggregate weighted;
  eval::Aggregate unweighted;
  double delta_mae = 0.0;   ///< weighted, ablated minus full
  double delta_mape = 0.0;  ///< weighted, ablated minus full
};

std::vector<AblationRow> ablation_suite(const Dataset& data, const RunConfig& cfg,
                                        const Experiment& full);

struct SweepRow {
  std::string kind;  ///< "horizon" or "capacity"
  model::ModelConfig model;
  std::size_t parameters = 0;
  int best_epoch = -1;
  eval::Aggregate weighted;
  eval::Aggregate unweighted;
};

/// The capacity grid: n_block {1,2} x d_emb {16,32} x d_model {32,64}.
std::vector<model::ModelConfig> capacity_grid(const model::ModelConfig& base);

// Commands ------------------------------------------------------------------
// Each writes its resolved config to <output dir>/<command>.config.

void synth(const RunConfig& cfg);
ingest::SegmentationDiagnostics preprocess(const RunConfig& cfg);
void counts(const RunConfig& cfg);
void featurize(const RunConfig& cfg);
train::FitResult train(const RunConfig& cfg);
eval::MetricsReport evaluate(const RunConfig& cfg);
std::vector<AblationRow> ablate(const RunConfig& cfg);
/// Exports attention maps of test sample `index`.
void attention(const RunConfig& cfg, std::size_t index);
std::vector<SweepRow> sweep(const RunConfig& cfg, const std::vector<int>& horizons, bool capacity);

void write_ablation_csv(const std::string& path, const eval::MetricsReport& full,
                        const std::vector<AblationRow>& rows);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

}  // namespace voyagecast::pipeline
