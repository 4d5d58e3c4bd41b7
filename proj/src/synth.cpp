#include "voyagecast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <queue>
#include <random>
#include <tuple>

#include "json.hpp"

#include "voyagecast/error.hpp"
#include "voyagecast/rng.hpp"

namespace voyagecast::synth {

namespace {

constexpr int kBerthsPerPort = 2;
constexpr double kBerthHalf = 0.02;
constexpr double kBerthOffset = 0.06;
constexpr double kPilotHalf = 0.15;
constexpr double kAnchorWest = 0.2;
constexpr double kAnchorEast = 0.4;
constexpr double kAnchorHalf = 0.1;
constexpr double kOutboundX = 0.3;  ///< west of the centre
constexpr double kInboundX = 0.5;   ///< east of the centre
constexpr long long kHour = 3600;

struct Point {
  double lon, lat;
};

Point berth_centre(const Port& p, int berth) {
  return {p.lon, p.lat + (berth == 0 ? kBerthOffset : -kBerthOffset)};
}
Point pilot_exit(const Port& p) { return {p.lon - kPilotHalf, p.lat}; }
Point pilot_entry(const Port& p) { return {p.lon + kPilotHalf, p.lat}; }
Point anchor_entry(const Port& p) { return {p.lon + kAnchorEast, p.lat}; }
Point anchor_centre(const Port& p) { return {p.lon + (kAnchorWest + kAnchorEast) / 2.0, p.lat}; }

ingest::PortGeofence make_fence(const Port& p) {
  ingest::PortGeofence f;
  f.port_id = p.port_id;
  f.port_name = p.name;
  f.pilotage = rectangle(p.lon - kPilotHalf, p.lat - kPilotHalf, p.lon + kPilotHalf, p.lat + kPilotHalf);
  f.anchorage = rectangle(p.lon + kAnchorWest, p.lat - kAnchorHalf, p.lon + kAnchorEast,
                          p.lat + kAnchorHalf);
  for (int b = 0; b < kBerthsPerPort; ++b) {
    const Point c = berth_centre(p, b);
    ingest::Berth berth;
    berth.berth_id = p.port_id + "-B" + std::to_string(b + 1);
    berth.terminal = p.port_id + "-T" + std::to_string(b + 1);
    berth.area = rectangle(c.lon - kBerthHalf, c.lat - kBerthHalf, c.lon + kBerthHalf,
                           c.lat + kBerthHalf);
    f.terminals.push_back(berth.terminal);
    f.berths.push_back(std::move(berth));
  }
  return f;
}

bool boxes_overlap(const BoundingBox& a, const BoundingBox& b) {
  return a.min_lon <= b.max_lon && b.min_lon <= a.max_lon && a.min_lat <= b.max_lat &&
         b.min_lat <= a.max_lat;
}

/// Axis-aligned segment against a closed box.
bool segment_touches(Point a, Point b, const BoundingBox& box) {
  const double lo_x = std::min(a.lon, b.lon), hi_x = std::max(a.lon, b.lon);
  const double lo_y = std::min(a.lat, b.lat), hi_y = std::max(a.lat, b.lat);
  return lo_x <= box.max_lon && box.min_lon <= hi_x && lo_y <= box.max_lat && box.min_lat <= hi_y;
}

double top_lane(const std::vector<Port>& ports) {
  double top = ports.front().lat;
  for (const auto& p : ports) top = std::max(top, p.lat);
  return top + 1.0;
}

/// Open-sea polyline from the origin pilotage exit to the destination
/// anchorage entry, both included.
std::vector<Point> sea_route(const Port& from, const Port& to, double lane) {
  return {pilot_exit(from),
          {from.lon - kOutboundX, from.lat},
          {from.lon - kOutboundX, lane},
          {to.lon + kInboundX, lane},
          {to.lon + kInboundX, to.lat},
          anchor_entry(to)};
}

bool route_is_clear(const std::vector<Port>& ports, const std::vector<ingest::PortGeofence>& fences,
                    int from, int to) {
  const auto route = sea_route(ports[static_cast<std::size_t>(from)],
                               ports[static_cast<std::size_t>(to)], top_lane(ports));
  for (std::size_t s = 0; s + 1 < route.size(); ++s) {
    for (std::size_t p = 0; p < fences.size(); ++p) {
      std::vector<BoundingBox> zones = {fences[p].pilotage.bounds(), fences[p].anchorage.bounds()};
      for (std::size_t z = 0; z < zones.size(); ++z) {
        // The first leg starts on the origin pilotage edge and the last ends
        // on the destination anchorage edge.
        if (s == 0 && static_cast<int>(p) == from && z == 0) continue;
        if (s + 2 == route.size() && static_cast<int>(p) == to && z == 1) continue;
        if (segment_touches(route[s], route[s + 1], zones[z])) return false;
      }
    }
  }
  return true;
}

long long ticks_ceil(double seconds, long long tick) {
  return static_cast<long long>(std::ceil(seconds / static_cast<double>(tick))) * tick;
}

long long ticks_round(double seconds, long long tick) {
  return static_cast<long long>(std::llround(seconds / static_cast<double>(tick))) * tick;
}

// Step function of vessels present at one port, with its running integral so
// trailing means are exact. Changes must arrive in time order.
class Occupancy {
 public:
  void change(long long t, int delta) {
    steps_.push_back({t, area(t), count_ + delta});
    count_ += delta;
  }

  /// Time-weighted mean over [from, to], clipped at the simulation start.
  double mean(long long from, long long to) const {
    from = std::max(from, 0LL);
    if (to <= from) return count_;
    return (area(to) - area(from)) / static_cast<double>(to - from);
  }

 private:
  struct Step {
    long long t;
    double area;  ///< integral up to t
    int count;    ///< value from t on
  };

  double area(long long t) const {
    auto it = std::upper_bound(steps_.begin(), steps_.end(), t,
                               [](long long x, const Step& s) { return x < s.t; });
    if (it == steps_.begin()) return 0.0;
    --it;
    return it->area + static_cast<double>(it->count) * static_cast<double>(t - it->t);
  }

  std::vector<Step> steps_;
  int count_ = 0;
};

std::vector<std::vector<int>> build_loops(const WorldSpec& spec, Rng rng) {
  std::vector<int> sizes(static_cast<std::size_t>(spec.n_segments / 4), 4);
  const int rest = spec.n_segments % 4;
  if (rest == 1) {
    sizes.back() = 5;
  } else if (rest > 1) {
    sizes.push_back(rest);
  }
  for (int s : sizes) {
    if (s > spec.n_ports) {
      throw ConfigError("synth.n_ports is too small for loops of " + std::to_string(s) + " ports");
    }
  }

  std::vector<int> order(static_cast<std::size_t>(spec.n_ports));
  for (int i = 0; i < spec.n_ports; ++i) order[static_cast<std::size_t>(i)] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<std::vector<int>> loops;
  std::vector<std::pair<int, int>> used;
  std::size_t cursor = 0;
  for (int size : sizes) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      std::vector<int> loop;
      if (attempt == 0 && cursor + static_cast<std::size_t>(size) <= order.size()) {
        loop.assign(order.begin() + static_cast<long>(cursor),
                    order.begin() + static_cast<long>(cursor) + size);
      } else {
        std::vector<int> pool(order);
        for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
        loop.assign(pool.begin(), pool.begin() + size);
      }
      bool fresh = true;
      for (int i = 0; i < size && fresh; ++i) {
        const std::pair<int, int> leg{loop[static_cast<std::size_t>(i)],
                                      loop[static_cast<std::size_t>((i + 1) % size)]};
        fresh = std::find(used.begin(), used.end(), leg) == used.end();
      }
      if (!fresh) continue;
      for (int i = 0; i < size; ++i)
        used.emplace_back(loop[static_cast<std::size_t>(i)],
                          loop[static_cast<std::size_t>((i + 1) % size)]);
      loops.push_back(std::move(loop));
      placed = true;
    }
    if (!placed) throw ConfigError("could not lay out distinct service loops; add ports");
    cursor += static_cast<std::size_t>(size);
  }
  return loops;
}

}  // namespace

void WorldSpec::validate() const {
  if (n_ports < 2) throw ConfigError("synth.n_ports must be at least 2");
  if (n_vessels < 1) throw ConfigError("synth.n_vessels must be at least 1");
  if (n_segments < 2) throw ConfigError("synth.n_segments must be at least 2");
  if (horizon_days < 1) throw ConfigError("synth.horizon_days must be at least 1");
  if (sample_interval.count() < 1) throw ConfigError("synth.ais_interval must be positive");
  if (kHour % sample_interval.count() != 0 && sample_interval.count() % kHour != 0)
    throw ConfigError("synth.ais_interval must divide an hour");
  if (!(base_min_hours > 0.0 && base_max_hours >= base_min_hours))
    throw ConfigError("synth base durations must be positive with min <= max");
  if (!(kappa >= 0.0)) throw ConfigError("synth.kappa must not be negative");
  if (!(noise_std_hours >= 0.0)) throw ConfigError("synth.noise_std must not be negative");
  if (!(congestion_window_days >= 0.0)) throw ConfigError("synth.congestion_window_days must not be negative");
  if (!(grid_spacing > 1.0)) throw ConfigError("synth.grid_spacing must exceed 1 degree");
}

long long World::horizon_seconds() const { return static_cast<long long>(spec.horizon_days) * 24 * kHour; }

double World::base_for(int from, int to) const {
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (segments[i] == std::pair{from, to}) return base_hours[i];
  throw ValidationError("no service between ports " + std::to_string(from) + " and " +
                        std::to_string(to));
}

std::vector<Voyage> World::schedule() const {
  std::vector<Voyage> out;
  for (const auto& plan : plans)
    for (const auto& v : plan.voyages)
      if (v.berth_in < horizon_seconds()) out.push_back(v);
  return out;
}

World generate_world(const WorldSpec& spec) {
  spec.validate();
  const Rng root(spec.seed);
  World w;
  w.spec = spec;

  // Port grid, respaced until zones and sea lanes are clear.
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.n_ports))));
  Rng port_rng = root.derive("ports");
  std::vector<Port> ports;
  for (int i = 0; i < spec.n_ports; ++i) {
    Port p;
    char id[16];
    std::snprintf(id, sizeof id, "P%02d", i + 1);
    p.port_id = id;
    p.name = std::string("Harbor ") + (id + 1);
    p.congestion_period_days = 30.0 + 60.0 * port_rng.uniform();
    p.congestion_phase = 2.0 * std::numbers::pi * port_rng.uniform();
    ports.push_back(p);
  }
  w.loops = build_loops(spec, root.derive("loops"));
  for (const auto& loop : w.loops)
    for (std::size_t i = 0; i < loop.size(); ++i)
      w.segments.emplace_back(loop[i], loop[(i + 1) % loop.size()]);

  double spacing = spec.grid_spacing;
  for (int attempt = 0;; ++attempt) {
    for (int i = 0; i < spec.n_ports; ++i) {
      ports[static_cast<std::size_t>(i)].lon = 100.0 + spacing * (i % cols);
      ports[static_cast<std::size_t>(i)].lat = spacing * (i / cols);
    }
    std::vector<ingest::PortGeofence> fences;
    for (const auto& p : ports) fences.push_back(make_fence(p));
    bool clear = true;
    for (std::size_t a = 0; a < fences.size() && clear; ++a)
      for (std::size_t b = a + 1; b < fences.size() && clear; ++b)
        clear = !boxes_overlap(fences[a].extent(), fences[b].extent());
    for (const auto& [from, to] : w.segments) clear = clear && route_is_clear(ports, fences, from, to);
    if (clear) {
      w.ports = ports;
      w.fences = std::move(fences);
      break;
    }
    if (attempt == 8) throw ValidationError("could not place ports without overlapping zones");
    spacing *= 1.5;
  }

  const long long tick = spec.sample_interval.count();
  Rng base_rng = root.derive("base");
  for (std::size_t i = 0; i < w.segments.size(); ++i) {
    const double h = spec.base_min_hours + (spec.base_max_hours - spec.base_min_hours) * base_rng.uniform();
    w.base_hours.push_back(static_cast<double>(std::max(tick, ticks_round(h * kHour, tick))) / kHour);
  }

  Rng vessel_rng = root.derive("vessels");
  const double teus[] = {4000, 6500, 8500, 11000, 14000, 18000};
  const char* carriers[] = {"Aurora Lines", "Borealis Shipping", "Cygnus Container",
                            "Delta Maritime", "Equinox Feeder"};
  for (int v = 0; v < spec.n_vessels; ++v) {
    ingest::VesselStatic s;
    s.imo = std::to_string(9100001 + v);
    s.mmsi = std::to_string(477100001 + v);
    s.carrier = carriers[vessel_rng.below(std::size(carriers))];
    s.teu = teus[vessel_rng.below(std::size(teus))];
    s.length = std::round(170.0 + s.teu / 80.0);
    s.width = std::round(25.0 + s.teu / 700.0);
    w.statics.push_back(s);
  }

  // Event-driven fleet simulation.
  const long long horizon = w.horizon_seconds();
  const double ref = std::max(1.0, static_cast<double>(spec.n_vessels) / spec.n_ports);
  auto latent = [&](int port, long long t) {
    const Port& p = w.ports[static_cast<std::size_t>(port)];
    const double days = static_cast<double>(t) / (24.0 * kHour);
    return std::sin(2.0 * std::numbers::pi * days / p.congestion_period_days + p.congestion_phase);
  };

  std::vector<Occupancy> occupancy(static_cast<std::size_t>(spec.n_ports));
  const auto window = static_cast<long long>(spec.congestion_window_days * 24.0 * kHour);
  std::vector<int> position(static_cast<std::size_t>(spec.n_vessels), 0);  // index within loop
  std::vector<Rng> rngs;
  std::vector<long long> leave(static_cast<std::size_t>(spec.n_vessels), 0);
  enum Kind { kArrive = 0, kDepart = 1 };
  using Event = std::tuple<long long, int, int>;  // time, vessel, kind
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;

  const int n_loops = static_cast<int>(w.loops.size());
  for (int v = 0; v < spec.n_vessels; ++v) {
    rngs.push_back(root.derive("voyage", static_cast<std::uint64_t>(v)));
    Rng& r = rngs.back();
    VesselPlan plan;
    plan.loop = v % n_loops;
    const auto& loop = w.loops[static_cast<std::size_t>(plan.loop)];
    position[static_cast<std::size_t>(v)] = (v / n_loops) % static_cast<int>(loop.size());
    plan.start_port = loop[static_cast<std::size_t>(position[static_cast<std::size_t>(v)])];
    plan.start_berth = static_cast<int>(r.below(kBerthsPerPort));
    occupancy[static_cast<std::size_t>(plan.start_port)].change(0, +1);
    const long long out = ticks_ceil(tick + 48.0 * kHour * r.uniform(), tick);
    leave[static_cast<std::size_t>(v)] = out;
    events.emplace(out + kHour, v, kDepart);
    w.plans.push_back(std::move(plan));
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  while (!events.empty()) {
    const auto [t, v, kind] = events.top();
    events.pop();
    if (t >= horizon) continue;
    VesselPlan& plan = w.plans[static_cast<std::size_t>(v)];
    Rng& r = rngs[static_cast<std::size_t>(v)];
    const auto& loop = w.loops[static_cast<std::size_t>(plan.loop)];
    int& pos = position[static_cast<std::size_t>(v)];

    if (kind == kDepart) {
      Voyage voy;
      voy.vessel = v;
      voy.from = loop[static_cast<std::size_t>(pos)];
      voy.to = loop[static_cast<std::size_t>((pos + 1) % static_cast<int>(loop.size()))];
      voy.leave_berth = leave[static_cast<std::size_t>(v)];
      voy.departure = t;
      voy.base_hours = w.base_for(voy.from, voy.to);
      voy.occupancy = occupancy[static_cast<std::size_t>(voy.to)].mean(t - window, t);
      occupancy[static_cast<std::size_t>(voy.from)].change(t, -1);
      const double mult = 1.0 + spec.kappa * (voy.occupancy / ref - 1.0);
      double hours = voy.base_hours * mult + spec.noise_std_hours * normal(r);
      hours = std::max(hours, 0.25 * voy.base_hours);
      voy.arrival = t + std::max(tick, ticks_round(hours * kHour, tick));
      // Provisional port call, replaced when the arrival is simulated.
      voy.berth_in = voy.arrival + 2 * kHour;
      voy.berth_out = voy.berth_in + 24 * kHour;
      plan.voyages.push_back(voy);
      pos = (pos + 1) % static_cast<int>(loop.size());
      events.emplace(voy.arrival, v, kArrive);
    } else {
      Voyage& voy = plan.voyages.back();
      occupancy[static_cast<std::size_t>(voy.to)].change(t, +1);
      const double c = latent(voy.to, t);
      const double wait = 1.5 * kHour + 3.0 * kHour * (1.0 + c) + 2.0 * kHour * r.uniform();
      const double dwell = 12.0 * kHour + 12.0 * kHour * (1.0 + c) + 6.0 * kHour * r.uniform();
      voy.berth = static_cast<int>(r.below(kBerthsPerPort));
      voy.berth_in = t + ticks_ceil(wait, tick);
      voy.berth_out = voy.berth_in + ticks_ceil(dwell, tick);
      leave[static_cast<std::size_t>(v)] = voy.berth_out;
      events.emplace(voy.berth_out + kHour, v, kDepart);
    }
  }
  return w;
}

namespace {

struct Waypoint {
  long long t;
  Point p;
};

std::vector<Waypoint> vessel_path(const World& w, int vessel) {
  const VesselPlan& plan = w.plans[static_cast<std::size_t>(vessel)];
  const double lane = top_lane(w.ports);
  std::vector<Waypoint> path;
  int berth = plan.start_berth;
  int port = plan.start_port;
  path.push_back({0, berth_centre(w.ports[static_cast<std::size_t>(port)], berth)});
  for (const Voyage& v : plan.voyages) {
    const Port& from = w.ports[static_cast<std::size_t>(v.from)];
    const Port& to = w.ports[static_cast<std::size_t>(v.to)];
    path.push_back({v.leave_berth, berth_centre(from, berth)});
    const auto route = sea_route(from, to, lane);
    double total = 0.0;
    std::vector<double> cum = {0.0};
    for (std::size_t i = 1; i < route.size(); ++i) {
      total += std::hypot(route[i].lon - route[i - 1].lon, route[i].lat - route[i - 1].lat);
      cum.push_back(total);
    }
    const auto span = static_cast<double>(v.arrival - v.departure);
    path.push_back({v.departure, route.front()});
    for (std::size_t i = 1; i + 1 < route.size(); ++i) {
      const long long t = v.departure + static_cast<long long>(std::floor(span * cum[i] / total));
      path.push_back({std::clamp(t, v.departure + 1, v.arrival - 1), route[i]});
    }
    path.push_back({v.arrival, route.back()});
    path.push_back({v.arrival + kHour / 2, anchor_centre(to)});
    path.push_back({v.berth_in - kHour, anchor_centre(to)});
    path.push_back({v.berth_in - kHour / 2, pilot_entry(to)});
    path.push_back({v.berth_in, berth_centre(to, v.berth)});
    berth = v.berth;
    port = v.to;
  }
  return path;
}

}  // namespace

std::vector<ingest::AisPoint> emit_vessel_ais(const World& w, int vessel, Seconds interval) {
  if (interval.count() < 1) throw ValidationError("AIS interval must be positive");
  const auto path = vessel_path(w, vessel);
  const ingest::VesselStatic& s = w.statics[static_cast<std::size_t>(vessel)];
  const long long horizon = w.horizon_seconds();
  const long long step = interval.count();
  std::vector<ingest::AisPoint> out;
  out.reserve(static_cast<std::size_t>(horizon / step) + 1);
  std::size_t seg = 0;
  Point prev = path.front().p;
  double head = 0.0;
  for (long long t = 0; t < horizon; t += step) {
    while (seg + 1 < path.size() && path[seg + 1].t <= t) ++seg;
    Point p = path[seg].p;
    if (seg + 1 < path.size() && path[seg + 1].t > path[seg].t) {
      const double f = static_cast<double>(t - path[seg].t) /
                       static_cast<double>(path[seg + 1].t - path[seg].t);
      if (f > 0.0) {
        p = {p.lon + (path[seg + 1].p.lon - p.lon) * f, p.lat + (path[seg + 1].p.lat - p.lat) * f};
      }
    }
    const double dlon = p.lon - prev.lon, dlat = p.lat - prev.lat;
    const double dist = std::hypot(dlon, dlat);
    if (dist > 0.0) {
      head = std::fmod(std::atan2(dlon, dlat) * 180.0 / std::numbers::pi + 360.0, 360.0);
    }
    ingest::AisPoint a;
    a.create_time = w.spec.start + Seconds(t);
    a.imo = s.imo;
    a.mmsi = s.mmsi;
    a.lat = p.lat;
    a.lon = p.lon;
    a.speed = t == 0 ? 0.0 : std::round(dist * 60.0 / (static_cast<double>(step) / 3600.0) * 10.0) / 10.0;
    a.head = std::round(head * 10.0) / 10.0;
    if (a.head >= 360.0) a.head = 0.0;
    a.draught = std::round(8.0 + s.teu / 3000.0);
    out.push_back(std::move(a));
    prev = p;
  }
  return out;
}

std::vector<ingest::AisPoint> emit_ais(const World& w, Seconds interval) {
  std::vector<ingest::AisPoint> all;
  for (int v = 0; v < static_cast<int>(w.statics.size()); ++v) {
    auto pts = emit_vessel_ais(w, v, interval);
    all.insert(all.end(), std::make_move_iterator(pts.begin()), std::make_move_iterator(pts.end()));
  }
  return all;
}

std::vector<ingest::VoyageRecord> ground_truth_records(const World& w, const TimelineConfig& cfg) {
  std::vector<ingest::VoyageRecord> out;
  for (const Voyage& v : w.schedule()) {
    const ingest::VesselStatic& s = w.statics[static_cast<std::size_t>(v.vessel)];
    const ingest::PortGeofence& dest = w.fences[static_cast<std::size_t>(v.to)];
    ingest::VoyageRecord r;
    r.window = window_of(w.spec.start + Seconds(v.departure), cfg);
    r.imo = s.imo;
    r.width = s.width;
    r.length = s.length;
    r.teu = s.teu;
    r.carrier = s.carrier;
    r.start_port = w.ports[static_cast<std::size_t>(v.from)].port_id;
    r.end_port = dest.port_id;
    r.terminal = dest.berths[static_cast<std::size_t>(v.berth)].terminal;
    r.ata = w.spec.start + Seconds(v.arrival);
    r.duration = v.duration_hours();
    out.push_back(std::move(r));
  }
  return out;
}

void write_ground_truth(std::ostream& out, const World& w) {
  for (const Voyage& v : w.schedule()) {
    nlohmann::ordered_json j;
    j["imo"] = w.statics[static_cast<std::size_t>(v.vessel)].imo;
    j["start_port"] = w.ports[static_cast<std::size_t>(v.from)].port_id;
    j["end_port"] = w.ports[static_cast<std::size_t>(v.to)].port_id;
    j["terminal"] = w.fences[static_cast<std::size_t>(v.to)].berths[static_cast<std::size_t>(v.berth)].terminal;
    j["departure"] = format_timestamp(w.spec.start + Seconds(v.departure));
    j["arrival"] = format_timestamp(w.spec.start + Seconds(v.arrival));
    j["duration_h"] = v.duration_hours();
    j["base_h"] = v.base_hours;
    j["occupancy"] = v.occupancy;
    out << j.dump() << '\n';
  }
}

void write_world(const std::string& dir, const World& w) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  ingest::write_geofences((fs::path(dir) / "geofences.geojson").string(), w.fences);
  ingest::write_statics((fs::path(dir) / "statics.csv").string(), w.statics);
  const auto ais_path = fs::path(dir) / "ais.csv";
  std::ofstream ais(ais_path);
  if (!ais) throw IoError("cannot open '" + ais_path.string() + "' for writing");
  for (int v = 0; v < static_cast<int>(w.statics.size()); ++v)
    ingest::write_ais_csv(ais, emit_vessel_ais(w, v, w.spec.sample_interval), v == 0);
  if (!ais) throw IoError("failed writing '" + ais_path.string() + "'");
  const auto gt_path = fs::path(dir) / "ground_truth.jsonl";
  std::ofstream gt(gt_path);
  if (!gt) throw IoError("cannot open '" + gt_path.string() + "' for writing");
  write_ground_truth(gt, w);
}

}  // namespace voyagecast::synth
