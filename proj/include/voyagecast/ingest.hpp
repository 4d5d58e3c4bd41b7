#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "voyagecast/geometry.hpp"
#include "voyagecast/timeline.hpp"

namespace voyagecast::ingest {

struct AisPoint {
  Timestamp create_time;
  std::string imo;
  std::string mmsi;
  double lat = 0.0;
  double lon = 0.0;
  double speed = 0.0;    ///< knots
  double head = 0.0;     ///< degrees [0, 360)
  double draught = 0.0;  ///< meters
};

struct Berth {
  std::string berth_id;
  std::string terminal;
  Polygon area;
};

struct PortGeofence {
  std::string port_name;
  std::string port_id;
  std::vector<std::string> terminals;
  Polygon anchorage;
  Polygon pilotage;
  std::vector<Berth> berths;

  /// Box covering every zone of the port; used to skip far-away ports cheaply.
  BoundingBox extent() const;
};

struct VesselStatic {
  std::string imo;
  std::string mmsi;
  std::string carrier;
  double teu = 0.0;
  double width = 0.0;
  double length = 0.0;
};

struct VoyageRecord {
  WindowIndex window = 0;  ///< window of the departure mark
  std::string imo;
  double width = 0.0;
  double length = 0.0;
  double teu = 0.0;
  std::string carrier;
  std::string start_port;  ///< port id
  std::string end_port;    ///< port id
  std::string terminal;
  Timestamp ata;           ///< arrival mark
  double duration = 0.0;   ///< hours

  Timestamp departure() const;
  bool operator==(const VoyageRecord&) const = default;
};

struct PortCountSeries {
  std::string port_id;
  /// counts[t - 1] is the relative vessel count at the end of window t.
  std::vector<long long> counts;

  long long at(WindowIndex t) const { return counts.at(static_cast<std::size_t>(t - 1)); }
};

struct SegmentationOptions {
  /// Minimum time between first and last point of a berth run for it to
  /// count as a berthing event. Zero means a single point suffices.
  Seconds min_dwell{0};
};

struct SegmentationDiagnostics {
  std::size_t points = 0;
  std::size_t berthing_events = 0;
  std::size_t voyages = 0;
  std::size_t skipped_same_port = 0;
  std::size_t skipped_missing_anchorage_entry = 0;
  std::size_t skipped_missing_pilotage_exit = 0;
  std::size_t skipped_before_epoch = 0;
  std::size_t skipped_unknown_vessel = 0;
  std::size_t dropped_duplicate_points = 0;

  SegmentationDiagnostics& operator+=(const SegmentationDiagnostics& o);
  std::size_t skipped() const;
};

/// Splits one vessel's time-sorted trace into voyage records between
/// consecutive berthing events at distinct ports. Departure mark is the last
/// point inside the origin pilotage area; arrival mark is the first point
/// inside the destination anchorage. Skipped voyages are tallied in `diag`.
std::vector<VoyageRecord> segment_voyages(const std::vector<AisPoint>& points,
                                          const std::vector<PortGeofence>& fences,
                                          const VesselStatic& vessel, const TimelineConfig& cfg,
                                          SegmentationDiagnostics& diag,
                                          const SegmentationOptions& opts = {});

/// Groups points by IMO, sorts each trace, segments every vessel that has a
/// static record, and returns records sorted by (imo, departure).
std::vector<VoyageRecord> segment_all(std::vector<AisPoint> points,
                                      const std::vector<PortGeofence>& fences,
                                      const std::vector<VesselStatic>& statics,
                                      const TimelineConfig& cfg, SegmentationDiagnostics& diag,
                                      const SegmentationOptions& opts = {});

/// Relative per-port vessel counts over windows 1..n_windows, starting from
/// zero. Ports listed in `ports` are always present, even with no traffic.
std::map<std::string, PortCountSeries> port_vessel_counts(
    const std::vector<VoyageRecord>& records, const TimelineConfig& cfg, WindowIndex n_windows,
    const std::vector<std::string>& ports = {});

using Segment = std::pair<std::string, std::string>;

struct AdjacencyMatrix {
  std::vector<std::string> ports;  ///< sorted row/column labels
  std::vector<unsigned char> cells;

  unsigned char operator()(std::size_t i, std::size_t j) const { return cells[i * ports.size() + j]; }
};

struct SegmentFilter {
  std::vector<Segment> segments;  ///< retained segments, sorted
  std::vector<VoyageRecord> records;
  AdjacencyMatrix adjacency;
};

/// Keeps segments with strictly more than `min_count` records.
SegmentFilter filter_segments(const std::vector<VoyageRecord>& records, std::size_t min_count);

// File formats -------------------------------------------------------------

std::vector<AisPoint> read_ais(const std::string& path);
void write_ais_csv(const std::string& path, const std::vector<AisPoint>& points);
/// Appends points to an open stream, optionally preceded by the header row.
void write_ais_csv(std::ostream& out, const std::vector<AisPoint>& points, bool header);

std::vector<PortGeofence> read_geofences(const std::string& path);
void write_geofences(const std::string& path, const std::vector<PortGeofence>& fences);

std::vector<VesselStatic> read_statics(const std::string& path);
void write_statics(const std::string& path, const std::vector<VesselStatic>& statics);

std::vector<VoyageRecord> read_voyages(const std::string& path);
void write_voyages(const std::string& path, const std::vector<VoyageRecord>& records);

std::map<std::string, PortCountSeries> read_port_counts(const std::string& path);
void write_port_counts(const std::string& path,
                       const std::map<std::string, PortCountSeries>& counts);

void write_diagnostics(const std::string& path, const SegmentationDiagnostics& diag);

}  // namespace voyagecast::ingest
