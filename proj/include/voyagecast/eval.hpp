#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "voyagecast/features.hpp"
#include "voyagecast/model.hpp"
#include "voyagecast/train.hpp"

namespace voyagecast::eval {

using model::Matrix;

/// Lower bound applied to predicted durations before scoring (hours).
inline constexpr double kPredictionFloor = 0.1;

struct Prediction {
  WindowIndex anchor = 0;
  int k = 0;  ///< 1-based future step
  double value = 0.0;
};

/// All predictions issued for one observed ground-truth record.
struct RecordPredictions {
  std::size_t segment = 0;
  WindowIndex window = 0;
  double y = 0.0;
  std::vector<Prediction> preds;  ///< sorted by k
};

struct PredictionSet {
  int H = 0;
  std::vector<RecordPredictions> records;  ///< sorted by (segment, window)
};

/// Gathers row i of `y_hat` ([N x H]) as the predictions of samples[i].
/// Only positions with mask 1 contribute.
PredictionSet collate_predictions(std::span<const features::Sample> samples, const Matrix& y_hat,
                                  double floor = kPredictionFloor);

PredictionSet collate_predictions(const model::ModelParams& params, const model::ModelConfig& cfg,
                                  std::span<const features::Sample> samples,
                                  const train::ExecConfig& exec = {});

struct RecordError {
  std::size_t segment = 0;
  WindowIndex window = 0;
  double y = 0.0;
  int coverage = 0;  ///< number of predictions averaged
  double mae = 0.0;
  double mape = 0.0;  ///< fraction, not percent
};

struct SegmentError {
  std::size_t segment = 0;
  std::size_t records = 0;  ///< v: test records on the segment
  double mae = 0.0;
  double mape = 0.0;
  double mean_duration = 0.0;  ///< mean ground truth over the test records
};

/// Records with a non-positive ground truth are skipped and counted in
/// `excluded` when given.
std::vector<RecordError> record_errors(const PredictionSet& set, std::size_t* excluded = nullptr);
std::vector<SegmentError> segment_errors(std::span<const RecordError> records);

struct Aggregate {
  double mae = 0.0;
  double mape = 0.0;
};

Aggregate aggregate(std::span<const SegmentError> segments, bool weighted);

struct StepProfile {
  std::vector<double> mae;   ///< index k-1
  std::vector<double> mape;  ///< index k-1
  std::size_t records = 0;   ///< fully covered records used
};

/// Per-step errors over records that received all H predictions. Empty
/// vectors when no record is fully covered.
StepProfile per_step_profile(const PredictionSet& set);

struct GroupRow {
  std::string label;
  std::size_t segments = 0;
  std::size_t records = 0;
  Aggregate weighted;
  Aggregate unweighted;
};

/// Bins on mean duration: <24h, 24-72h, 72-168h, 168-504h, then "other".
std::vector<GroupRow> group_by_duration(std::span<const SegmentError> segments);
/// Bins on total record counts (parallel to `segments`): 75-150, 151-500,
/// 501-1000, 1001-5000, then "other".
std::vector<GroupRow> group_by_record_count(std::span<const SegmentError> segments,
                                            std::span<const std::size_t> counts);

/// Segment MAE after z-scoring truth and predictions with the segment's own
/// ground-truth mean and population std. Segments with zero spread are
/// skipped.
struct NormalizedError {
  std::size_t segment = 0;
  double mae = 0.0;
};
std::vector<NormalizedError> normalized_segment_mae(const PredictionSet& set);

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;
};

/// Simple OLS of y on x with a two-sided t interval on the slope.
Regression sensitivity_regression(std::span<const double> x, std::span<const double> y,
                                  double level = 0.95);

struct MetricsReport {
  std::vector<std::string> segment_names;  ///< indexed by segment id
  std::vector<std::size_t> segment_record_totals;  ///< indexed by segment id
  std::vector<RecordError> records;
  std::vector<SegmentError> segments;
  Aggregate weighted;
  Aggregate unweighted;
  StepProfile profile;
  std::vector<GroupRow> by_duration;
  std::vector<GroupRow> by_record_count;
  std::size_t excluded = 0;
};

/// Scores a prediction set. `names` and `totals` are indexed by segment id.
MetricsReport build_report(const PredictionSet& set, std::vector<std::string> names,
                           std::vector<std::size_t> totals);

/// metrics.json plus segments.csv, steps.csv and groups.csv in `dir`.
void write_report(const std::string& dir, const MetricsReport& report);

/// Attention maps of one sample in eval mode, index block*n_head + head.
std::vector<Matrix> attention_maps(const model::ModelParams& params, const model::ModelConfig& cfg,
                                   const features::Sample& sample);

/// Writes block<b>_head<h>.csv for every map and mean.csv with their average.
void export_attention(const std::string& dir, std::span<const Matrix> maps, int n_head);

enum class Ablation { kTimeSeries, kVessel, kSegment, kNoAuxiliary };

struct AblationSpec {
  Ablation kind;
  std::string name;
};

/// The four single-factor removals, in reporting order.
std::vector<AblationSpec> ablations();

/// Applies a feature-group removal to standardized samples. kNoAuxiliary
/// leaves samples untouched and is handled through eta.
void apply_ablation(std::vector<features::Sample>& samples, Ablation kind);

}  // namespace voyagecast::eval
