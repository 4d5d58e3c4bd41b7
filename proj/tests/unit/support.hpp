// Shared fixtures for the unit tests.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "voyagecast/features.hpp"
#include "voyagecast/ingest.hpp"
#include "voyagecast/model.hpp"
#include "voyagecast/rng.hpp"

namespace testing {

using namespace voyagecast;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("voyagecast_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Port with one berth at the centre, a +-0.15 pilotage square and an
/// anchorage east of it.
inline ingest::PortGeofence port_fence(const std::string& id, double cx, double cy) {
  ingest::PortGeofence f;
  f.port_id = id;
  f.port_name = "Port " + id;
  f.terminals = {id + "-T"};
  f.pilotage = rectangle(cx - 0.15, cy - 0.15, cx + 0.15, cy + 0.15);
  f.anchorage = rectangle(cx + 0.2, cy - 0.1, cx + 0.4, cy + 0.1);
  f.berths.push_back({id + "-B", id + "-T", rectangle(cx - 0.02, cy - 0.02, cx + 0.02, cy + 0.02)});
  return f;
}

inline ingest::VesselStatic vessel(const std::string& imo) {
  return {imo, "4" + imo, "Carrier", 8000.0, 40.0, 300.0};
}

inline ingest::AisPoint ais(const std::string& imo, Timestamp t, double lon, double lat) {
  ingest::AisPoint p;
  p.create_time = t;
  p.imo = imo;
  p.mmsi = "4" + imo;
  p.lon = lon;
  p.lat = lat;
  p.speed = 10.0;
  return p;
}

inline ingest::VoyageRecord record(const std::string& from, const std::string& to,
                                   WindowIndex window, double hours, const TimelineConfig& cfg,
                                   const std::string& imo = "9000001") {
  ingest::VoyageRecord r;
  r.window = window;
  r.imo = imo;
  r.width = 40;
  r.length = 300;
  r.teu = 8000;
  r.carrier = "Carrier";
  r.start_port = from;
  r.end_port = to;
  r.terminal = to + "-T";
  const Timestamp dep = window_bounds(window, cfg).start + Seconds(600);
  r.ata = dep + Seconds(static_cast<long long>(hours * 3600.0));
  r.duration = hours;
  return r;
}

/// Standardized sample with in-range categories, zero future inputs and a
/// random target mask (at least one observed step).
inline features::Sample random_sample(int L, int H, const model::VocabSizes& v, Rng& rng,
                                      std::size_t segment = 0) {
  features::Sample s;
  s.segment = segment;
  s.anchor = L + 1;
  s.lookback = L;
  s.horizon = H;
  const auto n = static_cast<std::size_t>(L + H);
  s.categorical.assign(n * features::kNumCategorical, 0);
  s.continuous.assign(n * features::kNumContinuous, 0.0);
  s.observed.assign(n, 0);
  const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(v.ports)));
  const int end = static_cast<int>(rng.below(static_cast<std::uint64_t>(v.ports)));
  for (std::size_t k = 0; k < n; ++k) {
    s.observed[k] = rng.uniform() < 0.6;
    s.cat(k, features::kWeekday) = static_cast<int>(rng.below(static_cast<std::uint64_t>(v.weekdays)));
    s.cat(k, features::kSlot) = static_cast<int>(rng.below(static_cast<std::uint64_t>(v.slots)));
    s.cat(k, features::kStartPort) = start;
    s.cat(k, features::kEndPort) = end;
    s.cat(k, features::kTerminal) = static_cast<int>(rng.below(static_cast<std::uint64_t>(v.terminals)));
    s.cat(k, features::kCarrier) = static_cast<int>(rng.below(static_cast<std::uint64_t>(v.carriers)));
    for (std::size_t c = features::kLength; c < features::kNumContinuous; ++c)
      s.cont(k, static_cast<features::Continuous>(c)) = 2.0 * rng.uniform() - 1.0;
    if (k < static_cast<std::size_t>(L)) {
      s.cont(k, features::kYIn) = s.observed[k] ? 2.0 * rng.uniform() - 1.0 : 0.0;
      s.cont(k, features::kXIn) = 2.0 * rng.uniform() - 1.0;
    }
  }
  s.y_target.assign(static_cast<std::size_t>(H), 0.0);
  s.x_target.assign(static_cast<std::size_t>(H), 0.0);
  s.mask.assign(static_cast<std::size_t>(H), 0.0);
  for (int h = 0; h < H; ++h) {
    const auto i = static_cast<std::size_t>(h);
    const bool obs = h == 0 || rng.uniform() < 0.6;
    s.mask[i] = obs ? 1.0 : 0.0;
    s.y_target[i] = obs ? 5.0 + 40.0 * rng.uniform() : 0.0;
    s.x_target[i] = std::floor(10.0 * rng.uniform()) - 5.0;
  }
  s.standardized = true;
  return s;
}

/// Tiny vocabulary used by model-level tests.
inline model::VocabSizes tiny_vocab() { return {4, 3, 3, 7, 4}; }

}  // namespace testing
