// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [N ...]   run only the listed criteria (default: all)
//
// Exit status is 0 only when every selected criterion passes.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "gradcheck.hpp"
#include "support.hpp"
#include "voyagecast/config.hpp"
#include "voyagecast/eval.hpp"
#include "voyagecast/pipeline.hpp"
#include "voyagecast/synth.hpp"
#include "voyagecast/train.hpp"

namespace vc = voyagecast;
namespace fs = std::filesystem;
namespace m = voyagecast::model;
using vc::tensor::Matrix;
using vc::tensor::Tape;
using vc::tensor::Var;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<vc::features::Sample> random_samples(const m::ModelConfig& c, int n, vc::Rng& rng) {
  std::vector<vc::features::Sample> out;
  for (int i = 0; i < n; ++i) out.push_back(testing::random_sample(c.L, c.H, testing::tiny_vocab(), rng));
  return out;
}

// 1 -------------------------------------------------------------------------

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  m::ModelConfig c;
  c.L = 4;
  c.H = 2;
  c.d_model = 8;
  c.d_emb = 4;
  c.n_head = 2;
  c.n_block = 1;
  c.d_temp = 4;
  const auto p = m::ModelParams::init(c, testing::tiny_vocab(), vc::Rng(1));
  vc::Rng rng(2);
  const auto set = random_samples(c, 3, rng);
  const auto batch = m::make_batch(std::span<const vc::features::Sample>(set));
  std::vector<Matrix> inputs;
  for (std::size_t i = 0; i < p.size(); ++i) inputs.push_back(p.value(i));
  const testing::ScalarFn f = [&](Tape&, const std::vector<Var>& leaves) {
    const m::BoundParams bound{&p, leaves};
    const auto r = m::forward(bound, c, batch, {});
    return m::loss(r.output, batch, c.beta, c.eta, batch.size);
  };
  const auto rep = testing::gradcheck(f, inputs);
  const double secs = seconds_since(t0);
  return {rep.failed == 0 && rep.checked == p.scalar_count() && secs < 60.0,
          fmt("%zu/%zu parameters within tolerance, worst %.2e, %.1f s", rep.checked - rep.failed,
              rep.checked, rep.worst, secs)};
}

// 2 -------------------------------------------------------------------------

Outcome causality() {
  m::ModelConfig c;
  c.L = 8;
  c.H = 4;
  c.d_model = 8;
  c.d_emb = 4;
  c.n_head = 2;
  c.n_block = 2;
  c.d_temp = 4;
  const auto v = testing::tiny_vocab();
  vc::Rng rng(3);
  int failures = 0;
  const int trials = 1000;
  for (int trial = 0; trial < trials; ++trial) {
    auto p = m::ModelParams::init(c, v, vc::Rng(100 + static_cast<std::uint64_t>(trial)));
    p.at("b4").setConstant(0.5);
    auto sample = testing::random_sample(c.L, c.H, v, rng);
    const int cut = static_cast<int>(rng.below(static_cast<std::uint64_t>(c.steps())));
    auto changed = sample;
    for (int k = cut; k < c.steps(); ++k) {
      const auto i = static_cast<std::size_t>(k);
      for (std::size_t ch = 0; ch < vc::features::kNumContinuous; ++ch)
        changed.cont(i, static_cast<vc::features::Continuous>(ch)) += 4.0 * rng.uniform() - 2.0;
      changed.cat(i, vc::features::kTerminal) = static_cast<int>(rng.below(3));
      changed.cat(i, vc::features::kCarrier) = static_cast<int>(rng.below(3));
      changed.cat(i, vc::features::kWeekday) = static_cast<int>(rng.below(7));
    }
    for (int h = 0; h < c.H; ++h) {
      changed.y_target[static_cast<std::size_t>(h)] = 1.0 + 90.0 * rng.uniform();
      changed.x_target[static_cast<std::size_t>(h)] = 10.0 * rng.uniform();
    }
    auto run = [&](const vc::features::Sample& s) {
      Tape tape;
      const auto bound = m::bind(tape, p, false);
      return m::forward(bound, c, m::make_batch(std::span<const vc::features::Sample>(&s, 1)), {})
          .output.value();
    };
    const Matrix a = run(sample), b = run(changed);
    for (int h = 0; h < c.H && c.L + h < cut; ++h)
      if (a(h, 0) != b(h, 0) || a(h, 1) != b(h, 1)) {
        ++failures;
        break;
      }
  }
  return {failures == 0, fmt("%d/%d trials left earlier outputs bit-identical", trials - failures, trials)};
}

// 3 -------------------------------------------------------------------------

Outcome mask_correctness() {
  m::ModelConfig c;
  c.L = 6;
  c.H = 5;
  c.d_model = 8;
  c.d_emb = 4;
  c.n_head = 2;
  c.n_block = 1;
  c.d_temp = 4;
  const auto v = testing::tiny_vocab();
  vc::Rng rng(4);
  int failures = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    const auto p = m::ModelParams::init(c, v, vc::Rng(500 + static_cast<std::uint64_t>(trial)));
    auto set = random_samples(c, 4, rng);
    auto noisy = set;
    for (auto& s : noisy)
      for (std::size_t h = 0; h < s.mask.size(); ++h)
        if (s.mask[h] == 0.0) s.y_target[h] = 1e3 * (rng.uniform() - 0.5);
    auto grad = [&](const std::vector<vc::features::Sample>& s) {
      std::vector<const vc::features::Sample*> ptrs;
      for (const auto& x : s) ptrs.push_back(&x);
      return vc::train::batch_gradient(p, c, ptrs, false, vc::Rng(0), {});
    };
    const auto a = grad(set), b = grad(noisy);
    bool same = a.loss == b.loss;
    for (std::size_t i = 0; same && i < a.grads.size(); ++i) same = a.grads[i] == b.grads[i];
    failures += same ? 0 : 1;
  }
  return {failures == 0, fmt("%d/%d trials with identical loss and gradients", trials - failures, trials)};
}

// 4 -------------------------------------------------------------------------

Outcome metric_oracle() {
  vc::Rng rng(5);
  const int H = 12;
  vc::eval::PredictionSet set;
  set.H = H;
  // Oracle data kept as flat parallel arrays.
  std::vector<std::size_t> seg_of;
  std::vector<double> truth;
  std::vector<std::vector<std::pair<int, double>>> preds;
  for (int i = 0; i < 5000; ++i) {
    const std::size_t seg = rng.below(37);
    const double y = 2.0 + 200.0 * rng.uniform();
    std::vector<std::pair<int, double>> p;
    const bool full = rng.uniform() < 0.4;
    for (int k = 1; k <= H; ++k)
      if (full || rng.uniform() < 0.5) p.push_back({k, std::max(0.1, y + 40.0 * (rng.uniform() - 0.5))});
    if (p.empty()) p.push_back({1, y});
    vc::eval::RecordPredictions r;
    r.segment = seg;
    r.window = i + 1;
    r.y = y;
    for (auto [k, val] : p) r.preds.push_back({r.window - k + 1, k, val});
    set.records.push_back(r);
    seg_of.push_back(seg);
    truth.push_back(y);
    preds.push_back(p);
  }
  std::sort(set.records.begin(), set.records.end(), [](const auto& a, const auto& b) {
    return std::pair(a.segment, a.window) < std::pair(b.segment, b.window);
  });
  const auto report = vc::eval::build_report(set, {}, {});

  double worst = 0.0;
  auto note = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };

  std::map<std::size_t, std::array<double, 3>> seg;  // mae sum, mape sum, count
  std::vector<double> step_mae(H, 0.0), step_mape(H, 0.0);
  double full_records = 0;
  std::map<std::pair<std::size_t, long long>, std::pair<double, double>> rec_err;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    double a = 0, b = 0;
    for (auto [k, val] : preds[i]) {
      a += std::abs(truth[i] - val);
      b += std::abs(truth[i] - val) / truth[i];
    }
    a /= static_cast<double>(preds[i].size());
    b /= static_cast<double>(preds[i].size());
    rec_err[{seg_of[i], static_cast<long long>(i + 1)}] = {a, b};
    auto& s = seg[seg_of[i]];
    s[0] += a;
    s[1] += b;
    s[2] += 1;
    if (static_cast<int>(preds[i].size()) == H) {
      full_records += 1;
      for (auto [k, val] : preds[i]) {
        step_mae[static_cast<std::size_t>(k - 1)] += std::abs(truth[i] - val);
        step_mape[static_cast<std::size_t>(k - 1)] += std::abs(truth[i] - val) / truth[i];
      }
    }
  }
  for (const auto& r : report.records) {
    const auto& [a, b] = rec_err.at({r.segment, r.window});
    note(r.mae, a);
    note(r.mape, b);
  }
  double wa = 0, wb = 0, ua = 0, ub = 0, n = 0;
  for (const auto& s : report.segments) {
    const auto& o = seg.at(s.segment);
    note(s.mae, o[0] / o[2]);
    note(s.mape, o[1] / o[2]);
    wa += o[0];
    wb += o[1];
    n += o[2];
    ua += o[0] / o[2];
    ub += o[1] / o[2];
  }
  const double ns = static_cast<double>(seg.size());
  note(report.weighted.mae, wa / n);
  note(report.weighted.mape, wb / n);
  note(report.unweighted.mae, ua / ns);
  note(report.unweighted.mape, ub / ns);
  bool shape_ok = report.records.size() == 5000 && report.segments.size() == seg.size() &&
                  report.profile.mae.size() == static_cast<std::size_t>(H) &&
                  report.profile.records == static_cast<std::size_t>(full_records);
  for (int k = 0; shape_ok && k < H; ++k) {
    note(report.profile.mae[static_cast<std::size_t>(k)], step_mae[static_cast<std::size_t>(k)] / full_records);
    note(report.profile.mape[static_cast<std::size_t>(k)], step_mape[static_cast<std::size_t>(k)] / full_records);
  }
  return {shape_ok && worst <= 1e-12,
          fmt("5000 records, %zu segments, %zu fully covered, max deviation %.2e", seg.size(),
              report.profile.records, worst)};
}

// 5 -------------------------------------------------------------------------

Outcome pipeline_closure() {
  const auto t0 = Clock::now();
  vc::synth::WorldSpec spec;  // 8 ports, 40 vessels, 365 days, 10 min
  const auto world = vc::synth::generate_world(spec);
  const vc::TimelineConfig tl;
  const auto schedule = world.schedule();

  std::vector<vc::ingest::VoyageRecord> records;
  vc::ingest::SegmentationDiagnostics diag;
  for (int v = 0; v < static_cast<int>(world.statics.size()); ++v) {
    auto part = vc::ingest::segment_voyages(vc::synth::emit_vessel_ais(world, v, spec.sample_interval),
                                            world.fences, world.statics[static_cast<std::size_t>(v)], tl, diag);
    records.insert(records.end(), part.begin(), part.end());
  }

  // Match on (imo, arrival instant).
  std::map<std::pair<std::string, long long>, double> recovered;
  for (const auto& r : records) recovered[{r.imo, (r.ata - spec.start).count()}] = r.duration * 3600.0;
  std::size_t matched = 0, within = 0;
  double worst = 0.0;
  for (const auto& v : schedule) {
    auto it = recovered.find({world.statics[static_cast<std::size_t>(v.vessel)].imo, v.arrival});
    if (it == recovered.end()) continue;
    ++matched;
    const double err = std::abs(it->second - static_cast<double>(v.arrival - v.departure));
    worst = std::max(worst, err);
    within += err <= 600.0 ? 1 : 0;
  }
  const double share = schedule.empty() ? 0.0 : static_cast<double>(within) / static_cast<double>(schedule.size());

  // Event tally from the schedule itself.
  const vc::WindowIndex last = vc::windows_until(spec.start + vc::Seconds(world.horizon_seconds()), tl);
  std::vector<std::string> ids;
  for (const auto& p : world.ports) ids.push_back(p.port_id);
  const auto counts = vc::ingest::port_vessel_counts(records, tl, last, ids);
  std::map<std::string, std::vector<long long>> delta;
  for (const auto& id : ids) delta[id].assign(static_cast<std::size_t>(last + 1), 0);
  for (const auto& v : schedule) {
    const auto dep = vc::window_of(spec.start + vc::Seconds(v.departure), tl);
    const auto arr = vc::window_of(spec.start + vc::Seconds(v.arrival), tl);
    if (dep <= last) --delta[world.ports[static_cast<std::size_t>(v.from)].port_id][static_cast<std::size_t>(dep)];
    if (arr <= last) ++delta[world.ports[static_cast<std::size_t>(v.to)].port_id][static_cast<std::size_t>(arr)];
  }
  std::size_t mismatched = 0, cells = 0;
  for (const auto& id : ids) {
    long long running = 0;
    for (vc::WindowIndex t = 1; t <= last; ++t) {
      running += delta[id][static_cast<std::size_t>(t)];
      ++cells;
      mismatched += counts.at(id).at(t) == running ? 0 : 1;
    }
  }
  return {share >= 0.99 && mismatched == 0,
          fmt("%zu/%zu voyages recovered within 10 min (%.2f%%, worst %.0f s), %zu/%zu count cells match, %.1f s",
              within, schedule.size(), 100.0 * share, worst, cells - mismatched, cells, seconds_since(t0))};
}

// 6, 7 ----------------------------------------------------------------------

/// Desk-scale learning run shared by the learning and horizon criteria.
struct LearningRun {
  bool done = false;
  double seconds = 0.0;
  vc::pipeline::Experiment full;
  vc::pipeline::Experiment no_series;
  vc::eval::MetricsReport baseline;
};

vc::RunConfig learning_config() {
  vc::RunConfig cfg;
  cfg.world.kappa = 0.3;
  cfg.model.L = 56;
  cfg.model.H = 28;
  cfg.model.d_model = 16;
  cfg.model.n_head = 4;
  cfg.model.d_emb = 8;
  cfg.model.d_temp = 16;
  cfg.train.batch_size = 128;
  cfg.train.max_epochs = 16;
  cfg.train.decay_every = 4;
  cfg.exec.threads = 1;
  cfg.sync();
  cfg.validate();
  return cfg;
}

LearningRun& learning_run() {
  static LearningRun run;
  if (run.done) return run;
  const auto t0 = Clock::now();
  const vc::RunConfig cfg = learning_config();
  const auto world = vc::synth::generate_world(cfg.world);
  std::vector<vc::ingest::VoyageRecord> records;
  vc::ingest::SegmentationDiagnostics diag;
  for (int v = 0; v < static_cast<int>(world.statics.size()); ++v) {
    auto part = vc::ingest::segment_voyages(vc::synth::emit_vessel_ais(world, v, cfg.world.sample_interval),
                                            world.fences, world.statics[static_cast<std::size_t>(v)],
                                            cfg.timeline, diag);
    records.insert(records.end(), part.begin(), part.end());
  }
  vc::features::Catalog catalog;
  auto series = vc::pipeline::build_series(records, cfg, catalog);
  const auto data = vc::pipeline::prepare(std::move(series), std::move(catalog), cfg, cfg.model);
  run.full = vc::pipeline::run_experiment(data, cfg);
  run.no_series = vc::pipeline::run_experiment(data, cfg, vc::eval::Ablation::kTimeSeries);
  run.baseline = vc::pipeline::constant_baseline(data);
  run.seconds = seconds_since(t0);
  run.done = true;
  std::printf("  learning run: %zu train / %zu val / %zu test samples, best epoch %d, %.0f s\n",
              data.split.train.size(), data.split.val.size(), data.split.test.size(),
              run.full.fit.best_epoch, run.seconds);
  return run;
}

Outcome learning_sanity() {
  const auto& r = learning_run();
  const double full = r.full.report.weighted.mape;
  const double base = r.baseline.weighted.mape;
  const double abl = r.no_series.report.weighted.mape;
  return {full < base && full < abl && r.seconds < 1800.0,
          fmt("weighted MAPE full %.2f%%, constant baseline %.2f%%, without time series %.2f%% "
              "(dMAE %+.3f h), %.0f s",
              100.0 * full, 100.0 * base, 100.0 * abl,
              r.no_series.report.weighted.mae - r.full.report.weighted.mae, r.seconds)};
}

Outcome horizon_stability() {
  const auto& p = learning_run().full.report.profile;
  if (p.mae.empty()) return {false, "no fully covered test record"};
  const auto [lo, hi] = std::minmax_element(p.mae.begin(), p.mae.end());
  double mean = 0.0;
  for (double v : p.mae) mean += v;
  mean /= static_cast<double>(p.mae.size());
  const double spread = *hi - *lo;
  return {spread <= 0.25 * mean,
          fmt("MAE(k) in [%.3f, %.3f] h over %zu records, spread %.1f%% of mean %.3f h", *lo, *hi,
              p.records, 100.0 * spread / mean, mean)};
}

// 8 -------------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = text.str();
  }
  return files;
}

Outcome determinism() {
  const auto home = fs::current_path();
  testing::TempDir a("determinism_a"), b("determinism_b");
  const std::vector<std::string> overrides = {
      "synth.n_ports=4",   "synth.n_vessels=8", "synth.n_segments=4", "model.L=16",
      "model.H=8",         "model.d_model=8",   "model.n_head=2",     "model.d_emb=4",
      "model.d_temp=4",    "train.max_epochs=2", "train.batch_size=64", "seed=11"};
  auto run = [&](const fs::path& dir) {
    fs::current_path(dir);
    const auto cfg = vc::resolve_config("", overrides);
    vc::pipeline::synth(cfg);
    vc::pipeline::preprocess(cfg);
    vc::pipeline::counts(cfg);
    vc::pipeline::featurize(cfg);
    vc::pipeline::train(cfg);
    vc::pipeline::evaluate(cfg);
    vc::pipeline::attention(cfg, 0);
    fs::current_path(home);
    // Wall-clock timings are the one output expected to differ.
    fs::remove(dir / "runs/default/logs/timings.jsonl");
    return snapshot(dir);
  };
  std::map<std::string, std::string> fa, fb;
  try {
    fa = run(a.path());
    fb = run(b.path());
  } catch (...) {
    fs::current_path(home);
    throw;
  }
  std::size_t differ = 0;
  std::set<std::string> names;
  for (const auto& [k, v] : fa) names.insert(k);
  for (const auto& [k, v] : fb) names.insert(k);
  for (const auto& n : names) differ += (fa.count(n) && fb.count(n) && fa[n] == fb[n]) ? 0 : 1;
  const bool has = fa.count("runs/default/checkpoints/best.json") && fa.count("runs/default/logs/train.jsonl") &&
                   fa.count("runs/default/reports/metrics.json");
  return {differ == 0 && has, fmt("%zu files compared, %zu differ", names.size(), differ)};
}

// 9 -------------------------------------------------------------------------

Outcome sensitivity() {
  vc::Rng rng(9);
  const int n = 40;
  std::vector<double> x, y;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd Y(n);
  for (int i = 0; i < n; ++i) {
    x.push_back(std::floor(75.0 + 2000.0 * rng.uniform()));
    y.push_back(0.8 + 2e-4 * x.back() + 0.3 * (rng.uniform() - 0.5));
    X(i, 0) = 1.0;
    X(i, 1) = x.back();
    Y(i) = y.back();
  }
  const Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::VectorXd beta = xtx.ldlt().solve(X.transpose() * Y);
  const double s2 = (Y - X * beta).squaredNorm() / (n - 2);
  const double se = std::sqrt(s2 * xtx.inverse()(1, 1));
  const double q = boost::math::quantile(boost::math::students_t(n - 2), 0.975);
  const auto r = vc::eval::sensitivity_regression(x, y);
  const double dev = std::max({std::abs(r.slope - beta(1)), std::abs(r.intercept - beta(0)),
                               std::abs(r.ci_low - (beta(1) - q * se)), std::abs(r.ci_high - (beta(1) + q * se))});

  std::vector<double> lx, ly;
  for (int i = 0; i < 10; ++i) {
    lx.push_back(100.0 * i);
    ly.push_back(0.25 + 0.5 * i);  // exactly 0.005 per record
  }
  const auto line = vc::eval::sensitivity_regression(lx, ly);
  const double width = line.ci_high - line.ci_low;
  return {dev <= 1e-10 && width <= 1e-12,
          fmt("max deviation from normal equations %.2e, exact-line CI width %.2e", dev, width)};
}

// 10 ------------------------------------------------------------------------

Outcome default_config() {
  const auto cfg = vc::resolve_config("", {});
  const auto& mc = cfg.model;
  const auto& tc = cfg.train;
  const bool ok = mc.d_emb == 32 && mc.d_model == 32 && mc.n_block == 2 && mc.n_head == 8 &&
                  mc.d_temp == 16 && mc.p_att == 0.1 && mc.p_ffn == 0.1 && tc.lr0 == 3e-3 &&
                  tc.decay == 0.5 && tc.decay_every == 10 && tc.batch_size == 1024 && mc.L == 168 &&
                  mc.H == 84 && cfg.timeline.delta_hours() == 6.0 && mc.beta == 0.8 && mc.eta == 0.9;
  const std::string text = vc::render_config(cfg);
  std::size_t matched = 0;
  const std::vector<std::string> expect = {
      "model.d_emb=32", "model.d_model=32", "model.n_block=2", "model.n_head=8", "model.d_temp=16",
      "model.p_att=0.1", "model.p_ffn=0.1", "train.lr0=0.003", "train.decay=0.5",
      "train.decay_every=10", "train.batch_size=1024", "model.L=168", "model.H=84",
      "timeline.delta_hours=6", "model.beta=0.8", "model.eta=0.9"};
  for (const auto& line : expect) matched += text.find(line + "\n") != std::string::npos ? 1 : 0;
  return {ok && matched == expect.size(), fmt("%zu/%zu default keys match", matched, expect.size())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"causality", causality},
      {"mask correctness", mask_correctness},
      {"metric oracle equivalence", metric_oracle},
      {"pipeline closure", pipeline_closure},
      {"learning sanity", learning_sanity},
      {"horizon stability", horizon_stability},
      {"determinism", determinism},
      {"sensitivity regression", sensitivity},
      {"default hyperparameters", default_config},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("criterion %2d %-26s %s  %s\n", id, criteria[i].first, o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
