#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "voyagecast/ingest.hpp"
#include "voyagecast/timeline.hpp"

namespace voyagecast::features {

using ingest::Segment;

/// Corpus-wide dictionary of categorical values. Id 0 is the null value;
/// real values get ids 1..n in sorted order.
struct Catalog {
  std::vector<std::string> ports;
  std::vector<std::string> terminals;
  std::vector<std::string> carriers;

  static Catalog from_records(const std::vector<ingest::VoyageRecord>& records);

  int port_id(const std::string& v) const;
  int terminal_id(const std::string& v) const;
  int carrier_id(const std::string& v) const;
};

/// Per-segment arrays aligned on windows [first_window, last_window].
struct SegmentSeries {
  Segment segment;
  int start_port = 0;  ///< catalog id
  int end_port = 0;    ///< catalog id
  WindowIndex first_window = 1;
  WindowIndex last_window = 0;
  std::size_t record_count = 0;  ///< records before collision resolution

  std::vector<double> y;  ///< duration in hours, 0 where unobserved
  std::vector<double> x;  ///< destination-port relative vessel count
  std::vector<double> length, width, teu;
  std::vector<int> carrier, terminal;  ///< catalog ids, 0 where unobserved
  std::vector<unsigned char> observed;

  std::size_t size() const { return y.size(); }
  std::size_t offset(WindowIndex t) const { return static_cast<std::size_t>(t - first_window); }
};

/// One record per (segment, window); ties broken by a per-segment seeded draw.
std::vector<SegmentSeries> build_segment_series(
    const std::vector<ingest::VoyageRecord>& records,
    const std::map<std::string, ingest::PortCountSeries>& port_counts, const Catalog& catalog,
    WindowIndex first_window, WindowIndex last_window, std::uint64_t seed);

enum Continuous : std::size_t { kYIn = 0, kXIn, kLength, kWidth, kTeu, kNumContinuous };
enum Categorical : std::size_t {
  kWeekday = 0,
  kSlot,
  kStartPort,
  kEndPort,
  kTerminal,
  kCarrier,
  kNumCategorical
};

/// One sliding-window instance. Inputs cover the lookback and horizon
/// (L + H steps, row-major with one row per step); targets cover the horizon.
/// Categorical port/terminal/carrier entries hold catalog ids until
/// `apply_stats` maps them onto model vocabulary indices.
struct Sample {
  std::size_t segment = 0;  ///< index into the series list
  WindowIndex anchor = 0;   ///< first forecast window T
  int lookback = 0;
  int horizon = 0;
  std::vector<int> categorical;    ///< (L+H) x kNumCategorical
  std::vector<double> continuous;  ///< (L+H) x kNumContinuous
  std::vector<unsigned char> observed;  ///< (L+H) record present in window
  std::vector<double> y_target;    ///< H, raw hours
  std::vector<double> x_target;    ///< H, raw relative counts
  std::vector<double> mask;        ///< H, 1 where a record was observed
  bool standardized = false;

  int steps() const { return lookback + horizon; }
  double& cont(std::size_t step, Continuous c) { return continuous[step * kNumContinuous + c]; }
  double cont(std::size_t step, Continuous c) const { return continuous[step * kNumContinuous + c]; }
  int& cat(std::size_t step, Categorical c) { return categorical[step * kNumCategorical + c]; }
  int cat(std::size_t step, Categorical c) const { return categorical[step * kNumCategorical + c]; }
  bool has_target() const;
};

/// Samples for every anchor T with [T-L, T+H-1] inside [first, last], in
/// increasing T. Empty when the range holds fewer than L+H windows.
std::vector<Sample> sliding_samples(const SegmentSeries& series, std::size_t series_index, int L,
                                    int H, WindowIndex first, WindowIndex last,
                                    const TimelineConfig& cfg);

std::vector<Sample> sliding_samples(const SegmentSeries& series, std::size_t series_index, int L,
                                    int H, const TimelineConfig& cfg);

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

/// Half-open partition on the anchor window's start instant:
/// [.., train_end) train, [train_end, val_end) validation, the rest test.
Split chronological_split(std::vector<Sample> samples, Timestamp train_end, Timestamp val_end,
                          const TimelineConfig& cfg);

struct ChannelStats {
  double mean = 0.0;
  double std = 1.0;
  bool scaled = false;  ///< false when the channel had zero spread or no data
};

/// Values seen on the training split; index 0 is reserved for unknown.
struct Vocabulary {
  std::vector<std::string> values;
  std::unordered_map<std::string, int> index;

  void add(const std::string& v);
  int lookup(const std::string& v) const;
  int size() const { return static_cast<int>(values.size()) + 1; }
};

struct FeatureStats {
  std::array<ChannelStats, kNumContinuous> channels;
  Vocabulary ports, terminals, carriers;
};

FeatureStats fit_stats(const std::vector<Sample>& train, const Catalog& catalog);

/// Catalog-id to vocabulary-index lookup tables.
struct CategoryMap {
  std::vector<int> ports, terminals, carriers;
};
CategoryMap category_map(const FeatureStats& stats, const Catalog& catalog);

/// Standardizes observed continuous inputs (padding stays exactly zero) and
/// maps categorical ids to vocabulary indices. Targets stay in raw units.
void apply_stats(Sample& sample, const FeatureStats& stats, const CategoryMap& map);

enum class FeatureGroup { kTimeSeries, kVessel, kSegment };

/// Zeroes a feature group in an already standardized sample.
void drop_feature_group(Sample& sample, FeatureGroup group);

// Series cache bundle --------------------------------------------------------

void write_series_bundle(const std::string& dir, const std::vector<SegmentSeries>& series,
                         const Catalog& catalog);

struct SeriesBundle {
  std::vector<SegmentSeries> series;
  Catalog catalog;
};
SeriesBundle read_series_bundle(const std::string& dir);

}  // namespace voyagecast::features
