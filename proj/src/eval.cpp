#include "voyagecast/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"

#include "voyagecast/csv.hpp"
#include "voyagecast/error.hpp"

namespace voyagecast::eval {

PredictionSet collate_predictions(std::span<const features::Sample> samples, const Matrix& y_hat,
                                  double floor) {
  PredictionSet set;
  if (samples.empty()) return set;
  set.H = samples.front().horizon;
  if (y_hat.rows() != static_cast<tensor::Index>(samples.size()) || y_hat.cols() != set.H) {
    throw ShapeError("collate_predictions: predictions " + tensor::shape_string(y_hat) +
                     " do not match " + std::to_string(samples.size()) + " samples x H=" +
                     std::to_string(set.H));
  }
  std::map<std::pair<std::size_t, WindowIndex>, RecordPredictions> by_record;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const features::Sample& s = samples[i];
    if (s.horizon != set.H) throw ShapeError("collate_predictions: samples mix horizons");
    for (int h = 0; h < s.horizon; ++h) {
      if (s.mask[static_cast<std::size_t>(h)] == 0.0) continue;
      const WindowIndex window = s.anchor + h;
      auto& rec = by_record[{s.segment, window}];
      rec.segment = s.segment;
      rec.window = window;
      rec.y = s.y_target[static_cast<std::size_t>(h)];
      rec.preds.push_back(
          {s.anchor, h + 1, std::max(floor, y_hat(static_cast<tensor::Index>(i), h))});
    }
  }
  set.records.reserve(by_record.size());
  for (auto& [key, rec] : by_record) {
    std::sort(rec.preds.begin(), rec.preds.end(),
              [](const Prediction& a, const Prediction& b) { return a.k < b.k; });
    set.records.push_back(std::move(rec));
  }
  return set;
}

PredictionSet collate_predictions(const model::ModelParams& params, const model::ModelConfig& cfg,
                                  std::span<const features::Sample> samples,
                                  const train::ExecConfig& exec) {
  const train::Predictions p = train::predict(params, cfg, samples, exec);
  return collate_predictions(samples, p.y);
}

std::vector<RecordError> record_errors(const PredictionSet& set, std::size_t* excluded) {
  std::vector<RecordError> out;
  std::size_t skipped = 0;
  for (const RecordPredictions& r : set.records) {
    if (!(r.y > 0.0) || r.preds.empty()) {
      ++skipped;
      continue;
    }
    RecordError e{r.segment, r.window, r.y, static_cast<int>(r.preds.size()), 0.0, 0.0};
    for (const Prediction& p : r.preds) {
      const double err = std::abs(r.y - p.value);
      e.mae += err;
      e.mape += err / r.y;
    }
    e.mae /= e.coverage;
    e.mape /= e.coverage;
    out.push_back(e);
  }
  if (excluded) *excluded = skipped;
  return out;
}

std::vector<SegmentError> segment_errors(std::span<const RecordError> records) {
  std::map<std::size_t, SegmentError> by_segment;
  for (const RecordError& r : records) {
    SegmentError& s = by_segment[r.segment];
    s.segment = r.segment;
    ++s.records;
    s.mae += r.mae;
    s.mape += r.mape;
    s.mean_duration += r.y;
  }
  std::vector<SegmentError> out;
  for (auto& [id, s] : by_segment) {
    const double v = static_cast<double>(s.records);
    s.mae /= v;
    s.mape /= v;
    s.mean_duration /= v;
    out.push_back(s);
  }
  return out;
}

Aggregate aggregate(std::span<const SegmentError> segments, bool weighted) {
  if (segments.empty()) throw ValidationError("cannot aggregate over an empty segment set");
  Aggregate a;
  double weight = 0.0;
  for (const SegmentError& s : segments) {
    const double w = weighted ? static_cast<double>(s.records) : 1.0;
    a.mae += w * s.mae;
    a.mape += w * s.mape;
    weight += w;
  }
  a.mae /= weight;
  a.mape /= weight;
  return a;
}

StepProfile per_step_profile(const PredictionSet& set) {
  StepProfile p;
  const auto H = static_cast<std::size_t>(set.H);
  std::vector<double> mae(H, 0.0), mape(H, 0.0);
  for (const RecordPredictions& r : set.records) {
    if (r.preds.size() != H || !(r.y > 0.0)) continue;
    ++p.records;
    for (const Prediction& x : r.preds) {
      const double err = std::abs(r.y - x.value);
      mae[static_cast<std::size_t>(x.k - 1)] += err;
      mape[static_cast<std::size_t>(x.k - 1)] += err / r.y;
    }
  }
  if (p.records == 0) return p;
  for (std::size_t k = 0; k < H; ++k) {
    mae[k] /= static_cast<double>(p.records);
    mape[k] /= static_cast<double>(p.records);
  }
  p.mae = std::move(mae);
  p.mape = std::move(mape);
  return p;
}

namespace {

std::vector<GroupRow> group_rows(std::span<const SegmentError> segments,
                                 const std::vector<std::string>& labels,
                                 const std::vector<int>& bin_of) {
  std::vector<std::vector<SegmentError>> bins(labels.size());
  for (std::size_t i = 0; i < segments.size(); ++i)
    bins[static_cast<std::size_t>(bin_of[i])].push_back(segments[i]);
  std::vector<GroupRow> rows;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    GroupRow row;
    row.label = labels[b];
    row.segments = bins[b].size();
    for (const auto& s : bins[b]) row.records += s.records;
    if (!bins[b].empty()) {
      row.weighted = aggregate(bins[b], true);
      row.unweighted = aggregate(bins[b], false);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::vector<GroupRow> group_by_duration(std::span<const SegmentError> segments) {
  const std::vector<std::string> labels = {"<24h", "24-72h", "72-168h", "168-504h", "other"};
  std::vector<int> bin;
  for (const SegmentError& s : segments) {
    const double d = s.mean_duration;
    bin.push_back(d < 24.0 ? 0 : d < 72.0 ? 1 : d < 168.0 ? 2 : d <= 504.0 ? 3 : 4);
  }
  return group_rows(segments, labels, bin);
}

std::vector<GroupRow> group_by_record_count(std::span<const SegmentError> segments,
                                            std::span<const std::size_t> counts) {
  if (counts.size() != segments.size())
    throw ValidationError("record counts must parallel the segment list");
  const std::vector<std::string> labels = {"75-150", "151-500", "501-1000", "1001-5000", "other"};
  std::vector<int> bin;
  for (std::size_t c : counts) {
    bin.push_back(c >= 75 && c <= 150      ? 0
                  : c >= 151 && c <= 500   ? 1
                  : c >= 501 && c <= 1000  ? 2
                  : c >= 1001 && c <= 5000 ? 3
                                           : 4);
  }
  return group_rows(segments, labels, bin);
}

std::vector<NormalizedError> normalized_segment_mae(const PredictionSet& set) {
  std::map<std::size_t, std::vector<const RecordPredictions*>> by_segment;
  for (const auto& r : set.records)
    if (!r.preds.empty()) by_segment[r.segment].push_back(&r);
  std::vector<NormalizedError> out;
  for (const auto& [segment, recs] : by_segment) {
    double mean = 0.0;
    for (const auto* r : recs) mean += r->y;
    mean /= static_cast<double>(recs.size());
    double var = 0.0;
    for (const auto* r : recs) var += (r->y - mean) * (r->y - mean);
    const double sd = std::sqrt(var / static_cast<double>(recs.size()));
    if (!(sd > 0.0)) continue;
    double total = 0.0;
    for (const auto* r : recs) {
      const double zy = (r->y - mean) / sd;
      double err = 0.0;
      for (const Prediction& p : r->preds) err += std::abs(zy - (p.value - mean) / sd);
      total += err / static_cast<double>(r->preds.size());
    }
    out.push_back({segment, total / static_cast<double>(recs.size())});
  }
  return out;
}

Regression sensitivity_regression(std::span<const double> x, std::span<const double> y,
                                  double level) {
  if (x.size() != y.size()) throw ValidationError("regression inputs differ in length");
  if (x.size() < 3) throw ValidationError("regression needs at least 3 points");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("regressor has zero variance");
  Regression r;
  r.n = x.size();
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (r.intercept + r.slope * x[i]);
    sse += e * e;
  }
  r.slope_std_error = std::sqrt(sse / (n - 2.0) / sxx);
  const boost::math::students_t dist(n - 2.0);
  const double q = boost::math::quantile(dist, 0.5 + level / 2.0);
  r.ci_low = r.slope - q * r.slope_std_error;
  r.ci_high = r.slope + q * r.slope_std_error;
  return r;
}

MetricsReport build_report(const PredictionSet& set, std::vector<std::string> names,
                           std::vector<std::size_t> totals) {
  MetricsReport rep;
  rep.segment_names = std::move(names);
  rep.segment_record_totals = std::move(totals);
  rep.records = record_errors(set, &rep.excluded);
  rep.segments = segment_errors(rep.records);
  if (rep.segments.empty()) throw ValidationError("no scored records in the evaluation split");
  rep.weighted = aggregate(rep.segments, true);
  rep.unweighted = aggregate(rep.segments, false);
  rep.profile = per_step_profile(set);
  rep.by_duration = group_by_duration(rep.segments);
  std::vector<std::size_t> counts;
  for (const SegmentError& s : rep.segments) {
    counts.push_back(s.segment < rep.segment_record_totals.size()
                         ? rep.segment_record_totals[s.segment]
                         : s.records);
  }
  rep.by_record_count = group_by_record_count(rep.segments, counts);
  return rep;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
  return out;
}

nlohmann::ordered_json aggregate_json(const Aggregate& a) {
  return {{"mae", a.mae}, {"mape", a.mape}};
}

std::string segment_label(const MetricsReport& r, std::size_t id) {
  return id < r.segment_names.size() ? r.segment_names[id] : std::to_string(id);
}

}  // namespace

void write_report(const std::string& dir, const MetricsReport& r) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  using nlohmann::ordered_json;
  ordered_json j;
  j["records"] = r.records.size();
  j["segments"] = r.segments.size();
  j["excluded_records"] = r.excluded;
  j["weighted"] = aggregate_json(r.weighted);
  j["unweighted"] = aggregate_json(r.unweighted);
  ordered_json seg = ordered_json::array();
  for (const SegmentError& s : r.segments) {
    seg.push_back({{"segment", segment_label(r, s.segment)},
                   {"v", s.records},
                   {"mae", s.mae},
                   {"mape", s.mape},
                   {"mean_duration", s.mean_duration}});
  }
  j["per_segment"] = std::move(seg);
  j["per_step"] = {{"records", r.profile.records}, {"mae", r.profile.mae}, {"mape", r.profile.mape}};
  auto groups = [](const std::vector<GroupRow>& rows) {
    ordered_json g = ordered_json::array();
    for (const GroupRow& row : rows) {
      g.push_back({{"group", row.label},
                   {"segments", row.segments},
                   {"records", row.records},
                   {"weighted", aggregate_json(row.weighted)},
                   {"unweighted", aggregate_json(row.unweighted)}});
    }
    return g;
  };
  j["by_duration"] = groups(r.by_duration);
  j["by_record_count"] = groups(r.by_record_count);
  open_out(fs::path(dir) / "metrics.json") << j.dump(2) << '\n';

  auto segs = open_out(fs::path(dir) / "segments.csv");
  segs << "segment,v,mae,mape,mean_duration\n";
  for (const SegmentError& s : r.segments) {
    csv::write_row(segs, {segment_label(r, s.segment), std::to_string(s.records),
                          csv::format_double(s.mae), csv::format_double(s.mape),
                          csv::format_double(s.mean_duration)});
  }
  auto steps = open_out(fs::path(dir) / "steps.csv");
  steps << "k,mae,mape\n";
  for (std::size_t k = 0; k < r.profile.mae.size(); ++k) {
    csv::write_row(steps, {std::to_string(k + 1), csv::format_double(r.profile.mae[k]),
                           csv::format_double(r.profile.mape[k])});
  }
  auto grp = open_out(fs::path(dir) / "groups.csv");
  grp << "scheme,group,segments,records,weighted_mae,weighted_mape,unweighted_mae,unweighted_mape\n";
  auto dump = [&](const char* scheme, const std::vector<GroupRow>& rows) {
    for (const GroupRow& row : rows) {
      csv::write_row(grp, {scheme, row.label, std::to_string(row.segments),
                           std::to_string(row.records), csv::format_double(row.weighted.mae),
                           csv::format_double(row.weighted.mape),
                           csv::format_double(row.unweighted.mae),
                           csv::format_double(row.unweighted.mape)});
    }
  };
  dump("duration", r.by_duration);
  dump("record_count", r.by_record_count);
}

std::vector<Matrix> attention_maps(const model::ModelParams& params, const model::ModelConfig& cfg,
                                   const features::Sample& sample) {
  tensor::Tape tape;
  const model::BoundParams bound = model::bind(tape, params, false);
  const model::Batch batch = model::make_batch(std::span<const features::Sample>(&sample, 1));
  const auto out = model::forward(bound, cfg, batch, {});
  std::vector<Matrix> maps;
  for (const auto& a : out.attention) maps.push_back(a.value());
  return maps;
}

void export_attention(const std::string& dir, std::span<const Matrix> maps, int n_head) {
  namespace fs = std::filesystem;
  if (maps.empty()) throw ValidationError("no attention maps to export");
  fs::create_directories(dir);
  auto write = [&](const fs::path& p, const Matrix& m) {
    auto out = open_out(p);
    for (tensor::Index i = 0; i < m.rows(); ++i) {
      std::vector<std::string> row;
      for (tensor::Index j = 0; j < m.cols(); ++j) row.push_back(csv::format_double(m(i, j)));
      csv::write_row(out, row);
    }
  };
  Matrix mean = Matrix::Zero(maps.front().rows(), maps.front().cols());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto block = static_cast<int>(i) / n_head;
    const auto head = static_cast<int>(i) % n_head;
    write(fs::path(dir) / ("block" + std::to_string(block) + "_head" + std::to_string(head) + ".csv"),
          maps[i]);
    mean += maps[i];
  }
  write(fs::path(dir) / "mean.csv", mean / static_cast<double>(maps.size()));
}

std::vector<AblationSpec> ablations() {
  return {{Ablation::kTimeSeries, "without_time_series"},
          {Ablation::kVessel, "without_vessel"},
          {Ablation::kSegment, "without_segment"},
          {Ablation::kNoAuxiliary, "without_auxiliary_task"}};
}

void apply_ablation(std::vector<features::Sample>& samples, Ablation kind) {
  if (kind == Ablation::kNoAuxiliary) return;
  const features::FeatureGroup group = kind == Ablation::kTimeSeries ? features::FeatureGroup::kTimeSeries
                                       : kind == Ablation::kVessel   ? features::FeatureGroup::kVessel
                                                                     : features::FeatureGroup::kSegment;
  for (auto& s : samples) features::drop_feature_group(s, group);
}

}  // namespace voyagecast::eval
