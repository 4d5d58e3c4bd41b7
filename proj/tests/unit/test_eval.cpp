#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "doctest.h"
#include "support.hpp"
#include "voyagecast/csv.hpp"
#include "voyagecast/error.hpp"
#include "voyagecast/eval.hpp"

namespace vc = voyagecast;
namespace ev = voyagecast::eval;
using vc::tensor::Matrix;

namespace {

ev::RecordPredictions rec(std::size_t segment, vc::WindowIndex w, double y,
                          std::vector<std::pair<int, double>> preds) {
  ev::RecordPredictions r;
  r.segment = segment;
  r.window = w;
  r.y = y;
  for (auto [k, v] : preds) r.preds.push_back({w - k + 1, k, v});
  return r;
}

// Samples of one segment with anchors first..last. Window w carries target
// y(w) when observed(w).
struct Track {
  std::map<vc::WindowIndex, double> y;
};

std::vector<vc::features::Sample> track_samples(std::size_t segment, const Track& t, int H,
                                                vc::WindowIndex first, vc::WindowIndex last) {
  std::vector<vc::features::Sample> out;
  for (vc::WindowIndex a = first; a <= last; ++a) {
    vc::features::Sample s;
    s.segment = segment;
    s.anchor = a;
    s.lookback = 1;
    s.horizon = H;
    s.y_target.assign(static_cast<std::size_t>(H), 0.0);
    s.x_target.assign(static_cast<std::size_t>(H), 0.0);
    s.mask.assign(static_cast<std::size_t>(H), 0.0);
    for (int h = 0; h < H; ++h) {
      if (auto it = t.y.find(a + h); it != t.y.end()) {
        s.mask[static_cast<std::size_t>(h)] = 1.0;
        s.y_target[static_cast<std::size_t>(h)] = it->second;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("record and segment errors") {
  ev::PredictionSet set;
  set.H = 2;
  set.records = {rec(0, 5, 10.0, {{1, 8.0}, {2, 12.0}})};
  const auto r = ev::record_errors(set);
  REQUIRE(r.size() == 1);
  CHECK(r[0].mae == 2.0);
  CHECK(r[0].mape == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(r[0].coverage == 2);

  set.records = {rec(0, 5, 10.0, {{1, 10.0}}), rec(1, 6, 3.0, {{1, 3.0}, {2, 3.0}})};
  for (const auto& e : ev::record_errors(set)) {
    CHECK(e.mae == 0.0);
    CHECK(e.mape == 0.0);
  }

  set.records.push_back(rec(1, 7, 0.0, {{1, 2.0}}));
  std::size_t excluded = 0;
  CHECK(ev::record_errors(set, &excluded).size() == 2);
  CHECK(excluded == 1);
}

TEST_CASE("aggregation") {
  std::vector<ev::SegmentError> segs(2);
  segs[0].mae = 2.0;
  segs[0].records = 1;
  segs[1].mae = 4.0;
  segs[1].records = 3;
  CHECK(ev::aggregate(segs, false).mae == 3.0);
  CHECK(ev::aggregate(segs, true).mae == 3.5);
  const std::vector<ev::SegmentError> one(segs.begin(), segs.begin() + 1);
  CHECK(ev::aggregate(one, false).mae == ev::aggregate(one, true).mae);
  segs[0].records = 3;
  CHECK(ev::aggregate(segs, true).mae == ev::aggregate(segs, false).mae);
  CHECK_THROWS_AS(ev::aggregate(std::span<const ev::SegmentError>{}, true), vc::ValidationError);
}

TEST_CASE("metrics match a pooled scalar loop") {
  vc::Rng rng(12);
  ev::PredictionSet set;
  set.H = 6;
  // Pooled oracle input: (segment, record, prediction) triples.
  std::map<std::size_t, std::vector<std::pair<double, std::vector<double>>>> pooled;
  for (std::size_t s = 0; s < 9; ++s) {
    const int n = 1 + static_cast<int>(rng.below(40));
    for (int i = 0; i < n; ++i) {
      const double y = 1.0 + 100.0 * rng.uniform();
      const int cover = 1 + static_cast<int>(rng.below(6));
      std::vector<std::pair<int, double>> preds;
      std::vector<double> values;
      for (int k = 1; k <= cover; ++k) {
        const double v = y + 20.0 * (rng.uniform() - 0.5);
        preds.push_back({k, v});
        values.push_back(v);
      }
      set.records.push_back(rec(s, 10 + i, y, preds));
      pooled[s].push_back({y, values});
    }
  }
  const auto report = ev::build_report(set, {}, {});

  double w_mae = 0, w_mape = 0, u_mae = 0, u_mape = 0, total = 0;
  for (const auto& [s, recs] : pooled) {
    double mae = 0, mape = 0;
    for (const auto& [y, vals] : recs) {
      double a = 0, b = 0;
      for (double v : vals) {
        a += std::abs(y - v);
        b += std::abs(y - v) / y;
      }
      mae += a / static_cast<double>(vals.size());
      mape += b / static_cast<double>(vals.size());
    }
    const double v = static_cast<double>(recs.size());
    w_mae += mae;
    w_mape += mape;
    u_mae += mae / v;
    u_mape += mape / v;
    total += v;
  }
  CHECK(std::abs(report.weighted.mae - w_mae / total) < 1e-12);
  CHECK(std::abs(report.weighted.mape - w_mape / total) < 1e-12);
  CHECK(std::abs(report.unweighted.mae - u_mae / 9.0) < 1e-12);
  CHECK(std::abs(report.unweighted.mape - u_mape / 9.0) < 1e-12);

  // Weighted aggregate recomputed from the segment rows.
  double num = 0, den = 0;
  for (const auto& s : report.segments) {
    num += static_cast<double>(s.records) * s.mae;
    den += static_cast<double>(s.records);
  }
  CHECK(std::abs(report.weighted.mae - num / den) < 1e-12);
}

TEST_CASE("per-step profile") {
  ev::PredictionSet set;
  set.H = 2;
  set.records = {rec(0, 4, 10.0, {{1, 9.0}, {2, 12.0}})};
  auto p = ev::per_step_profile(set);
  REQUIRE(p.mae.size() == 2);
  CHECK(p.mae[0] == 1.0);
  CHECK(p.mae[1] == 2.0);
  CHECK(p.records == 1);

  // A partially covered record never changes the profile.
  set.records.push_back(rec(0, 5, 20.0, {{2, 1.0}}));
  const auto q = ev::per_step_profile(set);
  CHECK(q.mae == p.mae);
  CHECK(q.mape == p.mape);

  set.records = {rec(0, 5, 20.0, {{2, 1.0}})};
  p = ev::per_step_profile(set);
  CHECK(p.mae.empty());
  CHECK(p.records == 0);
}

TEST_CASE("collation matches anchor enumeration") {
  vc::Rng rng(3);
  const int H = 5;
  std::vector<vc::features::Sample> samples;
  std::vector<Track> tracks(3);
  for (std::size_t seg = 0; seg < tracks.size(); ++seg) {
    for (vc::WindowIndex w = 1; w <= 40; ++w)
      if (rng.uniform() < 0.5) tracks[seg].y[w] = 5.0 + 50.0 * rng.uniform();
    auto part = track_samples(seg, tracks[seg], H, 3, 30);
    samples.insert(samples.end(), part.begin(), part.end());
  }
  Matrix y_hat(static_cast<Eigen::Index>(samples.size()), H);
  for (Eigen::Index i = 0; i < y_hat.size(); ++i) y_hat.data()[i] = 30.0 * rng.uniform() - 5.0;

  const auto set = ev::collate_predictions(samples, y_hat);
  CHECK(set.H == H);

  // Oracle: every (segment, window, k) with anchor = window - k + 1 in range.
  std::multiset<std::tuple<std::size_t, vc::WindowIndex, int>> want, got;
  for (std::size_t seg = 0; seg < tracks.size(); ++seg)
    for (const auto& [w, y] : tracks[seg].y)
      for (int k = 1; k <= H; ++k) {
        const vc::WindowIndex a = w - k + 1;
        if (a >= 3 && a <= 30) want.insert({seg, w, k});
      }
  for (const auto& r : set.records) {
    CHECK(r.y == tracks[r.segment].y.at(r.window));
    int last_k = 0;
    for (const auto& p : r.preds) {
      got.insert({r.segment, r.window, p.k});
      CHECK(p.k > last_k);
      last_k = p.k;
      CHECK(p.anchor == r.window - p.k + 1);
      CHECK(p.value >= ev::kPredictionFloor);
      const auto row = static_cast<Eigen::Index>(r.segment * 28 + static_cast<std::size_t>(p.anchor - 3));
      CHECK(p.value == std::max(0.1, y_hat(row, p.k - 1)));
    }
  }
  CHECK(got == want);

  // Edge and interior coverage.
  Track one;
  one.y[3] = 7.0;
  one.y[10] = 8.0;
  const auto edge = track_samples(0, one, H, 3, 30);
  const auto es = ev::collate_predictions(edge, Matrix::Constant(static_cast<Eigen::Index>(edge.size()), H, 7.5));
  REQUIRE(es.records.size() == 2);
  CHECK(es.records[0].preds.size() == 1);
  CHECK(es.records[1].preds.size() == static_cast<std::size_t>(H));
  CHECK_THROWS_AS(ev::collate_predictions(edge, Matrix::Zero(2, H)), vc::ShapeError);
}

TEST_CASE("group bins") {
  std::vector<ev::SegmentError> segs;
  const double durations[] = {10.0, 24.0, 71.9, 72.0, 168.0, 504.0, 600.0};
  for (std::size_t i = 0; i < 7; ++i) {
    ev::SegmentError s;
    s.segment = i;
    s.records = i + 1;
    s.mae = static_cast<double>(i);
    s.mean_duration = durations[i];
    segs.push_back(s);
  }
  const auto d = ev::group_by_duration(segs);
  REQUIRE(d.size() == 5);
  CHECK(d[0].label == "<24h");
  CHECK(d[0].segments == 1);
  CHECK(d[1].segments == 2);
  CHECK(d[2].segments == 1);
  CHECK(d[3].segments == 2);
  CHECK(d[4].label == "other");
  CHECK(d[4].segments == 1);
  CHECK(d[1].records == 2 + 3);
  CHECK(d[1].weighted.mae == doctest::Approx((2.0 * 1 + 3.0 * 2) / 5.0));

  const std::vector<std::size_t> counts = {74, 75, 150, 151, 1000, 5000, 5001};
  const auto c = ev::group_by_record_count(segs, counts);
  REQUIRE(c.size() == 5);
  CHECK(c[0].segments == 2);
  CHECK(c[1].segments == 1);
  CHECK(c[2].segments == 1);
  CHECK(c[3].segments == 1);
  CHECK(c[4].segments == 2);
  CHECK_THROWS_AS(ev::group_by_record_count(segs, std::vector<std::size_t>{1}), vc::ValidationError);
}

TEST_CASE("normalized segment error") {
  ev::PredictionSet set;
  set.H = 3;
  // Truth {10, 20, 30}: mean 20, population std sqrt(200/3).
  set.records = {rec(0, 1, 10.0, {{1, 12.0}}), rec(0, 2, 20.0, {{1, 20.0}, {2, 26.0}}),
                 rec(0, 3, 30.0, {{1, 30.0}}), rec(1, 1, 5.0, {{1, 6.0}}), rec(1, 2, 5.0, {{1, 4.0}})};
  const auto n = ev::normalized_segment_mae(set);
  REQUIRE(n.size() == 1);  // segment 1 has zero spread
  const double sd = std::sqrt(200.0 / 3.0);
  CHECK(n[0].mae == doctest::Approx((2.0 / sd + 3.0 / sd + 0.0) / 3.0).epsilon(1e-14));

  // Rescaling a segment's truth and predictions leaves it unchanged.
  auto scaled = set;
  for (auto& r : scaled.records) {
    r.y = 4.0 * r.y + 7.0;
    for (auto& p : r.preds) p.value = 4.0 * p.value + 7.0;
  }
  CHECK(ev::normalized_segment_mae(scaled)[0].mae == doctest::Approx(n[0].mae).epsilon(1e-13));
}

TEST_CASE("sensitivity regression") {
  SUBCASE("exact line") {
    const std::vector<double> x = {1, 2, 3, 4, 5}, y = {3, 5, 7, 9, 11};
    const auto r = ev::sensitivity_regression(x, y);
    CHECK(r.slope == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(r.intercept == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.ci_high - r.ci_low < 1e-12);
  }
  SUBCASE("constant response") {
    const std::vector<double> x = {1, 5, 2, 8}, y = {0.3, 0.3, 0.3, 0.3};
    CHECK(ev::sensitivity_regression(x, y).slope == 0.0);
  }
  SUBCASE("random cloud against the normal equations") {
    vc::Rng rng(77);
    const int n = 60;
    Matrix X(n, 2);
    Eigen::VectorXd Y(n);
    std::vector<double> x, y;
    for (int i = 0; i < n; ++i) {
      x.push_back(75.0 + 900.0 * rng.uniform());
      y.push_back(0.5 - 1e-4 * x.back() + 0.2 * rng.uniform());
      X(i, 0) = 1.0;
      X(i, 1) = x.back();
      Y(i) = y.back();
    }
    const Eigen::MatrixXd xtx = X.transpose() * X;
    const Eigen::VectorXd beta = xtx.ldlt().solve(X.transpose() * Y);
    const Eigen::VectorXd resid = Y - X * beta;
    const double s2 = resid.squaredNorm() / (n - 2);
    const double se = std::sqrt(s2 * xtx.inverse()(1, 1));
    const double q = boost::math::quantile(boost::math::students_t(n - 2), 0.975);
    const auto r = ev::sensitivity_regression(x, y);
    CHECK(std::abs(r.slope - beta(1)) < 1e-10);
    CHECK(std::abs(r.intercept - beta(0)) < 1e-10);
    CHECK(std::abs(r.slope_std_error - se) < 1e-10);
    CHECK(std::abs(r.ci_low - (beta(1) - q * se)) < 1e-10);
    CHECK(std::abs(r.ci_high - (beta(1) + q * se)) < 1e-10);
    CHECK(r.n == static_cast<std::size_t>(n));
  }
  SUBCASE("errors") {
    const std::vector<double> x = {2, 2, 2}, y = {1, 2, 3};
    CHECK_THROWS_AS(ev::sensitivity_regression(x, y), vc::ValidationError);
    CHECK_THROWS_AS(ev::sensitivity_regression(std::vector<double>{1, 2}, std::vector<double>{1, 2}),
                    vc::ValidationError);
  }
}

TEST_CASE("attention export") {
  vc::model::ModelConfig c;
  c.d_emb = 2;
  c.d_model = 4;
  c.n_head = 2;
  c.n_block = 2;
  c.d_temp = 2;
  c.L = 4;
  c.H = 3;
  auto p = vc::model::ModelParams::init(c, testing::tiny_vocab(), vc::Rng(1));
  vc::Rng rng(2);
  const auto sample = testing::random_sample(c.L, c.H, testing::tiny_vocab(), rng);

  testing::TempDir dir("attn");
  SUBCASE("rows are causal distributions") {
    const auto maps = ev::attention_maps(p, c, sample);
    REQUIRE(maps.size() == 4);
    ev::export_attention(dir.path().string(), maps, c.n_head);
    for (const char* name : {"block0_head0.csv", "block0_head1.csv", "block1_head0.csv", "block1_head1.csv", "mean.csv"}) {
      std::ifstream in(dir.file(name));
      REQUIRE(in);
      std::string line;
      int row = 0;
      while (std::getline(in, line)) {
        const auto cells = vc::csv::split_line(line);
        REQUIRE(cells.size() == 7);
        double sum = 0.0;
        for (int col = 0; col < 7; ++col) {
          const double v = std::stod(cells[static_cast<std::size_t>(col)]);
          sum += v;
          if (col > row) CHECK(v == 0.0);
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
        ++row;
      }
      CHECK(row == 7);
    }
  }
  SUBCASE("zeroed queries and keys export uniform rows") {
    for (int b = 0; b < 2; ++b)
      for (int h = 0; h < 2; ++h) {
        const std::string pre = "block" + std::to_string(b) + ".head" + std::to_string(h) + ".";
        p.at(pre + "wq").setZero();
        p.at(pre + "wk").setZero();
      }
    const auto maps = ev::attention_maps(p, c, sample);
    ev::export_attention(dir.path().string(), maps, c.n_head);
    std::ifstream in(dir.file("mean.csv"));
    std::string line;
    for (int row = 0; std::getline(in, line); ++row) {
      const auto cells = vc::csv::split_line(line);
      for (int col = 0; col <= row; ++col)
        CHECK(std::stod(cells[static_cast<std::size_t>(col)]) == doctest::Approx(1.0 / (row + 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("ablation list") {
  const auto a = ev::ablations();
  REQUIRE(a.size() == 4);
  CHECK(a[0].kind == ev::Ablation::kTimeSeries);
  CHECK(a[3].kind == ev::Ablation::kNoAuxiliary);

  vc::Rng rng(5);
  std::vector<vc::features::Sample> s = {testing::random_sample(4, 2, testing::tiny_vocab(), rng)};
  const auto original = s;
  ev::apply_ablation(s, ev::Ablation::kNoAuxiliary);
  CHECK(s[0].continuous == original[0].continuous);
  ev::apply_ablation(s, ev::Ablation::kTimeSeries);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(s[0].cont(k, vc::features::kYIn) == 0.0);
    CHECK(s[0].cont(k, vc::features::kXIn) == 0.0);
    CHECK(s[0].cont(k, vc::features::kTeu) == original[0].cont(k, vc::features::kTeu));
  }
  ev::apply_ablation(s, ev::Ablation::kVessel);
  ev::apply_ablation(s, ev::Ablation::kSegment);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(s[0].cont(k, vc::features::kTeu) == 0.0);
    CHECK(s[0].cat(k, vc::features::kCarrier) == 0);
    CHECK(s[0].cat(k, vc::features::kStartPort) == 0);
    CHECK(s[0].cat(k, vc::features::kTerminal) == 0);
    CHECK(s[0].cat(k, vc::features::kWeekday) == original[0].cat(k, vc::features::kWeekday));
  }
}

TEST_CASE("report files") {
  ev::PredictionSet set;
  set.H = 2;
  set.records = {rec(0, 4, 10.0, {{1, 9.0}, {2, 12.0}}), rec(1, 4, 30.0, {{1, 33.0}})};
  const auto r = ev::build_report(set, {"A->B", "B->A"}, {80, 200});
  testing::TempDir dir("report");
  ev::write_report(dir.path().string(), r);
  for (const char* f : {"metrics.json", "segments.csv", "steps.csv", "groups.csv"})
    CHECK(std::filesystem::exists(dir.file(f)));
  std::ifstream in(dir.file("segments.csv"));
  std::stringstream text;
  text << in.rdbuf();
  CHECK(text.str().find("A->B") != std::string::npos);
  CHECK(r.by_record_count[0].segments == 1);
  CHECK(r.by_record_count[1].segments == 1);

  set.records.clear();
  CHECK_THROWS_AS(ev::build_report(set, {}, {}), vc::ValidationError);
}
