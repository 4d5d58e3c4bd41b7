#include "voyagecast/pipeline.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>

#include "voyagecast/checkpoint.hpp"
#include "voyagecast/error.hpp"
#include "voyagecast/synth.hpp"

namespace voyagecast::pipeline {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw IoError("missing input '" + path + "'");
}

std::ofstream open_out(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

features::SeriesBundle load_bundle(const Layout& layout) {
  require_file(join(layout.series_dir, "manifest.csv"));
  return features::read_series_bundle(layout.series_dir);
}

}  // namespace

Layout::Layout(const RunConfig& cfg)
    : raw_dir(cfg.data.raw_dir),
      ais(join(raw_dir, "ais.csv")),
      statics(join(raw_dir, "statics.csv")),
      geofences(join(raw_dir, "geofences.geojson")),
      ground_truth(join(raw_dir, "ground_truth.jsonl")),
      processed_dir(cfg.data.processed_dir),
      voyages(join(processed_dir, "voyages.csv")),
      diagnostics(join(processed_dir, "diagnostics.json")),
      port_counts(join(processed_dir, "port_counts.csv")),
      series_dir(join(processed_dir, "series")),
      run_dir(cfg.run_dir),
      config_dir(join(run_dir, "config")),
      checkpoint(join(join(run_dir, "checkpoints"), "best.json")),
      log(join(join(run_dir, "logs"), "train.jsonl")),
      timings(join(join(run_dir, "logs"), "timings.jsonl")),
      reports_dir(join(run_dir, "reports")),
      attention_dir(join(join(run_dir, "reports"), "attention")) {}

Dataset prepare(std::vector<features::SegmentSeries> series, features::Catalog catalog,
                const RunConfig& cfg, const model::ModelConfig& shape,
                const features::FeatureStats* fixed) {
  Dataset d;
  std::vector<features::Sample> all;
  for (std::size_t i = 0; i < series.size(); ++i) {
    auto s = features::sliding_samples(series[i], i, shape.L, shape.H, cfg.timeline);
    all.insert(all.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    d.names.push_back(series[i].segment.first + "->" + series[i].segment.second);
    d.totals.push_back(series[i].record_count);
  }
  d.split = features::chronological_split(std::move(all), cfg.data.train_end, cfg.data.val_end,
                                          cfg.timeline);
  d.stats = fixed ? *fixed : features::fit_stats(d.split.train, catalog);
  const features::CategoryMap map = features::category_map(d.stats, catalog);
  for (auto* part : {&d.split.train, &d.split.val, &d.split.test})
    for (auto& s : *part) features::apply_stats(s, d.stats, map);
  d.vocab = vocab_sizes(d.stats, cfg.timeline.windows_per_day());
  d.series = std::move(series);
  d.catalog = std::move(catalog);
  return d;
}

std::vector<features::SegmentSeries> build_series(const std::vector<ingest::VoyageRecord>& records,
                                                  const RunConfig& cfg,
                                                  features::Catalog& catalog) {
  const WindowIndex last = windows_until(cfg.data.end, cfg.timeline);
  const auto counts = ingest::port_vessel_counts(records, cfg.timeline, last);
  const ingest::SegmentFilter kept = ingest::filter_segments(records, cfg.data.min_segment_records);
  catalog = features::Catalog::from_records(kept.records);
  return features::build_segment_series(kept.records, counts, catalog, 1, last, cfg.seed);
}

Experiment run_experiment(const Dataset& data, const RunConfig& cfg,
                          std::optional<eval::Ablation> ablation) {
  model::ModelConfig m = cfg.model;
  const features::Split* split = &data.split;
  features::Split ablated;
  if (ablation) {
    if (*ablation == eval::Ablation::kNoAuxiliary) {
      m.eta = 1.0;
    } else {
      ablated = data.split;
      for (auto* part : {&ablated.train, &ablated.val, &ablated.test})
        eval::apply_ablation(*part, *ablation);
      split = &ablated;
    }
  }
  Experiment e;
  e.fit = train::fit(split->train, split->val, m, cfg.train, data.vocab, cfg.exec);
  const eval::PredictionSet preds = eval::collate_predictions(e.fit.best, m, split->test, cfg.exec);
  e.report = eval::build_report(preds, data.names, data.totals);
  return e;
}

eval::MetricsReport constant_baseline(const Dataset& data) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : data.split.train)
    for (std::size_t k = 0; k < s.mask.size(); ++k)
      if (s.mask[k] != 0.0) {
        sum += s.y_target[k];
        ++n;
      }
  if (n == 0) throw ValidationError("training split has no observed targets");
  const int H = data.split.test.empty() ? 0 : data.split.test.front().horizon;
  const model::Matrix y_hat = model::Matrix::Constant(
      static_cast<tensor::Index>(data.split.test.size()), H, sum / static_cast<double>(n));
  return eval::build_report(eval::collate_predictions(data.split.test, y_hat), data.names,
                            data.totals);
}

std::vector<AblationRow> ablation_suite(const Dataset& data, const RunConfig& cfg,
                                        const Experiment& full) {
  std::vector<AblationRow> rows;
  for (const auto& spec : eval::ablations()) {
    const Experiment e = run_experiment(data, cfg, spec.kind);
    AblationRow r;
    r.name = spec.name;
    r.weighted = e.report.weighted;
    r.unweighted = e.report.unweighted;
    r.delta_mae = e.report.weighted.mae - full.report.weighted.mae;
    r.delta_mape = e.report.weighted.mape - full.report.weighted.mape;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<model::ModelConfig> capacity_grid(const model::ModelConfig& base) {
  std::vector<model::ModelConfig> grid;
  for (int n_block : {1, 2})
    for (int d_emb : {16, 32})
      for (int d_model : {32, 64}) {
        model::ModelConfig m = base;
        m.n_block = n_block;
        m.d_emb = d_emb;
        m.d_model = d_model;
        grid.push_back(m);
      }
  return grid;
}

// Commands ------------------------------------------------------------------

void synth(const RunConfig& cfg) {
  const Layout layout(cfg);
  const synth::World world = synth::generate_world(cfg.world);
  synth::write_world(layout.raw_dir, world);
  write_config(join(layout.raw_dir, "synth.config"), cfg);
}

ingest::SegmentationDiagnostics preprocess(const RunConfig& cfg) {
  const Layout layout(cfg);
  for (const auto& p : {layout.ais, layout.statics, layout.geofences}) require_file(p);
  const auto fences = ingest::read_geofences(layout.geofences);
  const auto statics = ingest::read_statics(layout.statics);
  ingest::SegmentationDiagnostics diag;
  ingest::SegmentationOptions opts;
  opts.min_dwell = cfg.data.min_dwell;
  const auto records =
      ingest::segment_all(ingest::read_ais(layout.ais), fences, statics, cfg.timeline, diag, opts);
  fs::create_directories(layout.processed_dir);
  ingest::write_voyages(layout.voyages, records);
  ingest::write_diagnostics(layout.diagnostics, diag);
  write_config(join(layout.processed_dir, "preprocess.config"), cfg);
  return diag;
}

void counts(const RunConfig& cfg) {
  const Layout layout(cfg);
  require_file(layout.voyages);
  const auto records = ingest::read_voyages(layout.voyages);
  const WindowIndex last = windows_until(cfg.data.end, cfg.timeline);
  ingest::write_port_counts(layout.port_counts,
                            ingest::port_vessel_counts(records, cfg.timeline, last));
  write_config(join(layout.processed_dir, "counts.config"), cfg);
}

void featurize(const RunConfig& cfg) {
  const Layout layout(cfg);
  require_file(layout.voyages);
  require_file(layout.port_counts);
  const auto records = ingest::read_voyages(layout.voyages);
  const auto port_counts = ingest::read_port_counts(layout.port_counts);
  const WindowIndex last = windows_until(cfg.data.end, cfg.timeline);
  const ingest::SegmentFilter kept = ingest::filter_segments(records, cfg.data.min_segment_records);
  const features::Catalog catalog = features::Catalog::from_records(kept.records);
  const auto series =
      features::build_segment_series(kept.records, port_counts, catalog, 1, last, cfg.seed);
  features::write_series_bundle(layout.series_dir, series, catalog);
  write_config(join(layout.processed_dir, "featurize.config"), cfg);
}

train::FitResult train(const RunConfig& cfg) {
  const Layout layout(cfg);
  auto bundle = load_bundle(layout);
  const Dataset data = prepare(std::move(bundle.series), std::move(bundle.catalog), cfg, cfg.model);
  if (data.split.train.empty()) throw ValidationError("no training samples; check data.train_end and model.L/H");
  train::FitResult fit =
      train::fit(data.split.train, data.split.val, cfg.model, cfg.train, data.vocab, cfg.exec);
  if (fit.best_epoch < 0) throw ValidationError("training diverged before the first epoch finished");

  Checkpoint c;
  c.model = cfg.model;
  c.vocab = data.vocab;
  c.stats = data.stats;
  c.params = fit.best;
  c.adam = fit.adam;
  c.epoch = fit.best_epoch;
  c.val_loss = fit.best_val_loss;
  fs::create_directories(fs::path(layout.checkpoint).parent_path());
  save_checkpoint(layout.checkpoint, c);
  {
    auto out = open_out(layout.log);
    train::write_log(out, fit.log);
  }
  {
    auto out = open_out(layout.timings);
    train::write_timings(out, fit.log);
  }
  write_config(join(layout.config_dir, "train.config"), cfg);
  return fit;
}

eval::MetricsReport evaluate(const RunConfig& cfg) {
  const Layout layout(cfg);
  require_file(layout.checkpoint);
  const Checkpoint c = load_checkpoint(layout.checkpoint);
  auto bundle = load_bundle(layout);
  const Dataset data =
      prepare(std::move(bundle.series), std::move(bundle.catalog), cfg, c.model, &c.stats);
  const eval::PredictionSet preds =
      eval::collate_predictions(c.params, c.model, data.split.test, cfg.exec);
  eval::MetricsReport report = eval::build_report(preds, data.names, data.totals);
  eval::write_report(layout.reports_dir, report);
  write_config(join(layout.config_dir, "evaluate.config"), cfg);
  return report;
}

std::vector<AblationRow> ablate(const RunConfig& cfg) {
  const Layout layout(cfg);
  auto bundle = load_bundle(layout);
  const Dataset data = prepare(std::move(bundle.series), std::move(bundle.catalog), cfg, cfg.model);
  const Experiment full = run_experiment(data, cfg);
  auto rows = ablation_suite(data, cfg, full);
  write_ablation_csv(join(layout.reports_dir, "ablation.csv"), full.report, rows);
  write_config(join(layout.config_dir, "ablate.config"), cfg);
  return rows;
}

void attention(const RunConfig& cfg, std::size_t index) {
  const Layout layout(cfg);
  require_file(layout.checkpoint);
  const Checkpoint c = load_checkpoint(layout.checkpoint);
  auto bundle = load_bundle(layout);
  const Dataset data =
      prepare(std::move(bundle.series), std::move(bundle.catalog), cfg, c.model, &c.stats);
  if (index >= data.split.test.size())
    throw ValidationError("test sample " + std::to_string(index) + " out of range (" +
                          std::to_string(data.split.test.size()) + " samples)");
  const auto maps = eval::attention_maps(c.params, c.model, data.split.test[index]);
  eval::export_attention(layout.attention_dir, maps, c.model.n_head);
  write_config(join(layout.config_dir, "attention.config"), cfg);
}

std::vector<SweepRow> sweep(const RunConfig& cfg, const std::vector<int>& horizons, bool capacity) {
  const Layout layout(cfg);
  const auto bundle = load_bundle(layout);
  std::vector<SweepRow> rows;
  auto run = [&](const std::string& kind, const model::ModelConfig& m) {
    RunConfig c = cfg;
    c.model = m;
    c.model.validate();
    const Dataset data = prepare(bundle.series, bundle.catalog, c, m);
    const Experiment e = run_experiment(data, c);
    SweepRow r;
    r.kind = kind;
    r.model = m;
    r.parameters = model::parameter_count(m, data.vocab);
    r.best_epoch = e.fit.best_epoch;
    r.weighted = e.report.weighted;
    r.unweighted = e.report.unweighted;
    rows.push_back(r);
  };
  for (int H : horizons) {
    model::ModelConfig m = cfg.model;
    m.H = H;
    run("horizon", m);
  }
  if (capacity)
    for (const auto& m : capacity_grid(cfg.model)) run("capacity", m);
  write_sweep_csv(join(layout.reports_dir, "sweep.csv"), rows);
  write_config(join(layout.config_dir, "sweep.config"), cfg);
  return rows;
}

void write_ablation_csv(const std::string& path, const eval::MetricsReport& full,
                        const std::vector<AblationRow>& rows) {
  auto out = open_out(path);
  out << "ablation,full_mae,full_mape,weighted_mae,weighted_mape,unweighted_mae,unweighted_mape,"
         "delta_mae,delta_mape\n";
  for (const auto& r : rows) {
    out << r.name << ',' << fmt(full.weighted.mae) << ',' << fmt(full.weighted.mape) << ','
        << fmt(r.weighted.mae) << ',' << fmt(r.weighted.mape) << ',' << fmt(r.unweighted.mae)
        << ',' << fmt(r.unweighted.mape) << ',' << fmt(r.delta_mae) << ',' << fmt(r.delta_mape)
        << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  auto out = open_out(path);
  out << "kind,L,H,n_block,d_emb,d_model,parameters,best_epoch,weighted_mae,weighted_mape,"
         "unweighted_mae,unweighted_mape\n";
  for (const auto& r : rows) {
    out << r.kind << ',' << r.model.L << ',' << r.model.H << ',' << r.model.n_block << ','
        << r.model.d_emb << ',' << r.model.d_model << ',' << r.parameters << ',' << r.best_epoch
        << ',' << fmt(r.weighted.mae) << ',' << fmt(r.weighted.mape) << ','
        << fmt(r.unweighted.mae) << ',' << fmt(r.unweighted.mape) << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace voyagecast::pipeline
