#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "voyagecast/ingest.hpp"
#include "voyagecast/timeline.hpp"

namespace voyagecast::synth {

struct WorldSpec {
  std::uint64_t seed = 7;
  int n_ports = 8;
  int n_vessels = 40;
  int n_segments = 12;
  int horizon_days = 365;
  Timestamp start = make_timestamp(2021, 1, 1);
  Seconds sample_interval{600};
  double base_min_hours = 24.0;
  double base_max_hours = 120.0;
  /// Duration sensitivity to the lagged destination occupancy.
  double kappa = 0.3;
  /// Trailing window over which destination occupancy is averaged before a
  /// departure. 0 uses the instantaneous count.
  double congestion_window_days = 21.0;
  double noise_std_hours = 1.5;
  double grid_spacing = 3.0;  ///< degrees between neighbouring port centres

  void validate() const;
};

struct Port {
  std::string port_id;
  std::string name;
  double lon = 0.0;  ///< centre
  double lat = 0.0;
  double congestion_period_days = 60.0;
  double congestion_phase = 0.0;
};

/// One sailing plus the following port call. All instants are seconds after
/// the spec start and fall on the sample grid.
struct Voyage {
  int vessel = 0;
  int from = 0;  ///< port index
  int to = 0;
  int berth = 0;  ///< berth index at the destination
  long long leave_berth = 0;
  long long departure = 0;  ///< leaves the origin pilotage area
  long long arrival = 0;    ///< enters the destination anchorage
  long long berth_in = 0;
  long long berth_out = 0;
  double base_hours = 0.0;
  double occupancy = 0.0;  ///< mean vessels at the destination over the trailing window
  double duration_hours() const { return static_cast<double>(arrival - departure) / 3600.0; }
};

struct VesselPlan {
  int loop = 0;
  int start_port = 0;
  int start_berth = 0;
  std::vector<Voyage> voyages;  ///< in time order
};

struct World {
  WorldSpec spec;
  std::vector<Port> ports;
  std::vector<ingest::PortGeofence> fences;  ///< parallel to `ports`
  std::vector<ingest::VesselStatic> statics;
  std::vector<std::vector<int>> loops;  ///< port cycles served by the fleet
  std::vector<std::pair<int, int>> segments;
  std::vector<double> base_hours;  ///< parallel to `segments`
  std::vector<VesselPlan> plans;   ///< parallel to `statics`

  /// Voyages whose destination berth is reached before the horizon ends,
  /// sorted by (vessel, departure).
  std::vector<Voyage> schedule() const;
  long long horizon_seconds() const;
  double base_for(int from, int to) const;
};

World generate_world(const WorldSpec& spec);

/// AIS trace of one vessel sampled on the grid start + k * interval.
std::vector<ingest::AisPoint> emit_vessel_ais(const World& world, int vessel, Seconds interval);
/// Every vessel, concatenated in vessel order.
std::vector<ingest::AisPoint> emit_ais(const World& world, Seconds interval);

/// Ground-truth voyages as records with exact marks and the sailing window.
std::vector<ingest::VoyageRecord> ground_truth_records(const World& world,
                                                       const TimelineConfig& cfg);

void write_ground_truth(std::ostream& out, const World& world);

/// Writes geofences.geojson, statics.csv, ais.csv and ground_truth.jsonl.
void write_world(const std::string& dir, const World& world);

}  // namespace voyagecast::synth
