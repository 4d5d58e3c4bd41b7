#include "voyagecast/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "voyagecast/csv.hpp"
#include "voyagecast/error.hpp"

namespace voyagecast::ingest {

using nlohmann::json;

BoundingBox PortGeofence::extent() const {
  BoundingBox box = anchorage.bounds();
  auto grow = [&box](const BoundingBox& b) {
    box.min_lon = std::min(box.min_lon, b.min_lon);
    box.min_lat = std::min(box.min_lat, b.min_lat);
    box.max_lon = std::max(box.max_lon, b.max_lon);
    box.max_lat = std::max(box.max_lat, b.max_lat);
  };
  grow(pilotage.bounds());
  for (const auto& b : berths) grow(b.area.bounds());
  return box;
}

Timestamp VoyageRecord::departure() const {
  return ata - Seconds(std::llround(duration * 3600.0));
}

SegmentationDiagnostics& SegmentationDiagnostics::operator+=(const SegmentationDiagnostics& o) {
  points += o.points;
  berthing_events += o.berthing_events;
  voyages += o.voyages;
  skipped_same_port += o.skipped_same_port;
  skipped_missing_anchorage_entry += o.skipped_missing_anchorage_entry;
  skipped_missing_pilotage_exit += o.skipped_missing_pilotage_exit;
  skipped_before_epoch += o.skipped_before_epoch;
  skipped_unknown_vessel += o.skipped_unknown_vessel;
  dropped_duplicate_points += o.dropped_duplicate_points;
  return *this;
}

std::size_t SegmentationDiagnostics::skipped() const {
  return skipped_same_port + skipped_missing_anchorage_entry + skipped_missing_pilotage_exit +
         skipped_before_epoch;
}

namespace {

struct BerthHit {
  int port = -1;
  int berth = -1;
};

struct BerthingEvent {
  int port;
  int berth;
  std::size_t first;
  std::size_t last;
};

BerthHit locate_berth(const AisPoint& p, const std::vector<PortGeofence>& fences,
                      const std::vector<BoundingBox>& extents) {
  for (std::size_t i = 0; i < fences.size(); ++i) {
    if (!extents[i].contains(p.lat, p.lon)) continue;
    const auto& berths = fences[i].berths;
    for (std::size_t b = 0; b < berths.size(); ++b) {
      if (point_in_region(p.lat, p.lon, berths[b].area)) {
        return {static_cast<int>(i), static_cast<int>(b)};
      }
    }
  }
  return {};
}

}  // namespace

std::vector<VoyageRecord> segment_voyages(const std::vector<AisPoint>& points,
                                          const std::vector<PortGeofence>& fences,
                                          const VesselStatic& vessel, const TimelineConfig& cfg,
                                          SegmentationDiagnostics& diag,
                                          const SegmentationOptions& opts) {
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i - 1].create_time < points[i].create_time)) {
      throw ValidationError("AIS points for IMO " + vessel.imo +
                            " are not strictly sorted by createTime at " +
                            format_timestamp(points[i].create_time));
    }
  }
  diag.points += points.size();

  std::vector<BoundingBox> extents;
  extents.reserve(fences.size());
  for (const auto& f : fences) extents.push_back(f.extent());

  // Maximal runs of consecutive points inside berths of one port.
  std::vector<BerthingEvent> events;
  std::optional<BerthingEvent> open;
  auto close_run = [&] {
    if (!open) return;
    const auto dwell = points[open->last].create_time - points[open->first].create_time;
    if (dwell >= opts.min_dwell) events.push_back(*open);
    open.reset();
  };
  for (std::size_t i = 0; i < points.size(); ++i) {
    const BerthHit hit = locate_berth(points[i], fences, extents);
    if (hit.port < 0) {
      close_run();
      continue;
    }
    if (open && open->port == hit.port) {
      open->last = i;
    } else {
      close_run();
      open = BerthingEvent{hit.port, hit.berth, i, i};
    }
  }
  close_run();
  diag.berthing_events += events.size();

  std::vector<VoyageRecord> records;
  for (std::size_t e = 1; e < events.size(); ++e) {
    const BerthingEvent& from = events[e - 1];
    const BerthingEvent& to = events[e];
    if (from.port == to.port) {
      ++diag.skipped_same_port;
      continue;
    }
    const PortGeofence& origin = fences[static_cast<std::size_t>(from.port)];
    const PortGeofence& dest = fences[static_cast<std::size_t>(to.port)];

    std::optional<std::size_t> arrival;
    for (std::size_t i = from.last + 1; i < to.first; ++i) {
      if (point_in_region(points[i].lat, points[i].lon, dest.anchorage)) {
        arrival = i;
        break;
      }
    }
    if (!arrival) {
      ++diag.skipped_missing_anchorage_entry;
      continue;
    }
    std::optional<std::size_t> departure;
    for (std::size_t i = *arrival; i-- > from.last;) {
      if (point_in_region(points[i].lat, points[i].lon, origin.pilotage)) {
        departure = i;
        break;
      }
    }
    if (!departure) {
      ++diag.skipped_missing_pilotage_exit;
      continue;
    }
    const Timestamp dep_time = points[*departure].create_time;
    const Timestamp arr_time = points[*arrival].create_time;
    if (dep_time < cfg.epoch) {
      ++diag.skipped_before_epoch;
      continue;
    }

    VoyageRecord r;
    r.window = window_of(dep_time, cfg);
    r.imo = vessel.imo;
    r.width = vessel.width;
    r.length = vessel.length;
    r.teu = vessel.teu;
    r.carrier = vessel.carrier;
    r.start_port = origin.port_id;
    r.end_port = dest.port_id;
    r.terminal = dest.berths[static_cast<std::size_t>(to.berth)].terminal;
    r.ata = arr_time;
    r.duration = static_cast<double>((arr_time - dep_time).count()) / 3600.0;
    records.push_back(std::move(r));
  }
  diag.voyages += records.size();
  return records;
}

std::vector<VoyageRecord> segment_all(std::vector<AisPoint> points,
                                      const std::vector<PortGeofence>& fences,
                                      const std::vector<VesselStatic>& statics,
                                      const TimelineConfig& cfg, SegmentationDiagnostics& diag,
                                      const SegmentationOptions& opts) {
  std::unordered_map<std::string, const VesselStatic*> by_imo;
  for (const auto& s : statics) {
    if (!by_imo.emplace(s.imo, &s).second) {
      throw ValidationError("vessel statics: duplicate IMO " + s.imo);
    }
  }

  std::stable_sort(points.begin(), points.end(), [](const AisPoint& a, const AisPoint& b) {
    if (a.imo != b.imo) return a.imo < b.imo;
    return a.create_time < b.create_time;
  });

  std::vector<VoyageRecord> all;
  std::size_t begin = 0;
  while (begin < points.size()) {
    std::size_t end = begin;
    while (end < points.size() && points[end].imo == points[begin].imo) ++end;

    auto it = by_imo.find(points[begin].imo);
    if (it == by_imo.end()) {
      ++diag.skipped_unknown_vessel;
    } else {
      std::vector<AisPoint> trace;
      trace.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        if (!trace.empty() && trace.back().create_time == points[i].create_time) {
          ++diag.dropped_duplicate_points;
          continue;
        }
        trace.push_back(points[i]);
      }
      auto recs = segment_voyages(trace, fences, *it->second, cfg, diag, opts);
      all.insert(all.end(), std::make_move_iterator(recs.begin()),
                 std::make_move_iterator(recs.end()));
    }
    begin = end;
  }
  std::stable_sort(all.begin(), all.end(), [](const VoyageRecord& a, const VoyageRecord& b) {
    if (a.imo != b.imo) return a.imo < b.imo;
    return a.departure() < b.departure();
  });
  return all;
}

std::map<std::string, PortCountSeries> port_vessel_counts(
    const std::vector<VoyageRecord>& records, const TimelineConfig& cfg, WindowIndex n_windows,
    const std::vector<std::string>& ports) {
  const auto n = static_cast<std::size_t>(std::max<WindowIndex>(n_windows, 0));
  std::map<std::string, std::vector<long long>> delta;
  auto series_for = [&](const std::string& port) -> std::vector<long long>& {
    auto [it, inserted] = delta.try_emplace(port);
    if (inserted) it->second.assign(n, 0);
    return it->second;
  };
  for (const auto& p : ports) series_for(p);

  for (const auto& r : records) {
    auto& dep = series_for(r.start_port);
    auto& arr = series_for(r.end_port);
    if (r.window >= 1 && r.window <= n_windows) --dep[static_cast<std::size_t>(r.window - 1)];
    const WindowIndex arrival_window = window_of(r.ata, cfg);
    if (arrival_window <= n_windows) ++arr[static_cast<std::size_t>(arrival_window - 1)];
  }

  std::map<std::string, PortCountSeries> out;
  for (auto& [port, d] : delta) {
    PortCountSeries s;
    s.port_id = port;
    s.counts.resize(n);
    long long running = 0;
    for (std::size_t t = 0; t < n; ++t) {
      running += d[t];
      s.counts[t] = running;
    }
    out.emplace(port, std::move(s));
  }
  return out;
}

SegmentFilter filter_segments(const std::vector<VoyageRecord>& records, std::size_t min_count) {
  std::map<Segment, std::size_t> counts;
  std::set<std::string> port_set;
  for (const auto& r : records) {
    ++counts[{r.start_port, r.end_port}];
    port_set.insert(r.start_port);
    port_set.insert(r.end_port);
  }

  SegmentFilter out;
  std::set<Segment> kept;
  for (const auto& [seg, c] : counts) {
    if (c > min_count) {
      out.segments.push_back(seg);
      kept.insert(seg);
    }
  }
  for (const auto& r : records) {
    if (kept.count({r.start_port, r.end_port})) out.records.push_back(r);
  }

  out.adjacency.ports.assign(port_set.begin(), port_set.end());
  const std::size_t np = out.adjacency.ports.size();
  out.adjacency.cells.assign(np * np, 0);
  auto index_of = [&](const std::string& p) {
    return static_cast<std::size_t>(
        std::lower_bound(out.adjacency.ports.begin(), out.adjacency.ports.end(), p) -
        out.adjacency.ports.begin());
  };
  for (const auto& seg : out.segments) {
    out.adjacency.cells[index_of(seg.first) * np + index_of(seg.second)] = 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// File formats

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

double json_number(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(where + ": missing field '" + key + "'");
  if (it->is_number()) return it->get<double>();
  if (it->is_string()) return csv::to_double(it->get<std::string>(), key);
  throw ValidationError(where + ": field '" + std::string(key) + "' is not numeric");
}

std::string json_string(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(where + ": missing field '" + key + "'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  if (it->is_number()) return csv::format_double(it->get<double>());
  throw ValidationError(where + ": field '" + std::string(key) + "' is not a string");
}

AisPoint validated(AisPoint p, const std::string& where) {
  if (!(p.lat >= -90.0 && p.lat <= 90.0)) throw ValidationError(where + ": latitude out of range");
  if (!(p.lon >= -180.0 && p.lon <= 180.0))
    throw ValidationError(where + ": longitude out of range");
  return p;
}

}  // namespace

std::vector<AisPoint> read_ais(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  const int first = in.peek();
  std::vector<AisPoint> out;
  if (first == '{') {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const std::string where = path + ":" + std::to_string(lineno);
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw ValidationError(where + ": " + e.what());
      }
      AisPoint p;
      p.create_time = parse_timestamp(json_string(j, "createTime", where));
      p.imo = json_string(j, "IMO", where);
      p.mmsi = json_string(j, "MMSI", where);
      p.speed = json_number(j, "speed", where);
      p.lat = json_number(j, "latitude", where);
      p.lon = json_number(j, "longitude", where);
      p.head = json_number(j, "head", where);
      p.draught = json_number(j, "draught", where);
      out.push_back(validated(std::move(p), where));
    }
    return out;
  }

  csv::Table t = csv::Table::read(in);
  t.source = path;
  const std::size_t c_time = t.column("createTime"), c_imo = t.column("IMO"),
                    c_mmsi = t.column("MMSI"), c_speed = t.column("speed"),
                    c_lat = t.column("latitude"), c_lon = t.column("longitude"),
                    c_head = t.column("head"), c_draught = t.column("draught");
  out.reserve(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const auto& row = t.row(i);
    const std::string where = path + ":" + std::to_string(i + 2);
    AisPoint p;
    p.create_time = parse_timestamp(row[c_time]);
    p.imo = row[c_imo];
    p.mmsi = row[c_mmsi];
    p.speed = csv::to_double(row[c_speed], "speed");
    p.lat = csv::to_double(row[c_lat], "latitude");
    p.lon = csv::to_double(row[c_lon], "longitude");
    p.head = csv::to_double(row[c_head], "head");
    p.draught = csv::to_double(row[c_draught], "draught");
    out.push_back(validated(std::move(p), where));
  }
  return out;
}

void write_ais_csv(const std::string& path, const std::vector<AisPoint>& points) {
  auto out = open_out(path);
  write_ais_csv(out, points, true);
  if (!out) throw IoError("write failed: " + path);
}

void write_ais_csv(std::ostream& out, const std::vector<AisPoint>& points, bool header) {
  if (header) out << "createTime,IMO,MMSI,speed,latitude,longitude,head,draught\n";
  for (const auto& p : points) {
    out << format_timestamp(p.create_time) << ',' << p.imo << ',' << p.mmsi << ','
        << csv::format_double(p.speed) << ',' << csv::format_double(p.lat) << ','
        << csv::format_double(p.lon) << ',' << csv::format_double(p.head) << ','
        << csv::format_double(p.draught) << '\n';
  }
}

namespace {

Polygon polygon_from_geojson(const json& geometry, const std::string& where) {
  if (!geometry.is_object() || geometry.value("type", "") != "Polygon") {
    throw ValidationError(where + ": geometry must be a GeoJSON Polygon");
  }
  const json& rings = geometry.at("coordinates");
  if (!rings.is_array() || rings.empty()) throw ValidationError(where + ": empty polygon");
  std::vector<GeoPoint> ring;
  for (const auto& c : rings[0]) ring.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
  try {
    return Polygon(std::move(ring));
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

json polygon_to_geojson(const Polygon& poly) {
  json ring = json::array();
  for (const auto& p : poly.ring()) ring.push_back({p.lon, p.lat});
  ring.push_back({poly.ring().front().lon, poly.ring().front().lat});
  return {{"type", "Polygon"}, {"coordinates", json::array({ring})}};
}

}  // namespace

std::vector<PortGeofence> read_geofences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection") {
    throw ValidationError(path + ": expected a GeoJSON FeatureCollection");
  }

  struct Partial {
    PortGeofence fence;
    bool has_anchorage = false;
    bool has_pilotage = false;
  };
  std::map<std::string, Partial> ports;
  std::vector<std::string> order;

  std::size_t idx = 0;
  for (const auto& feature : doc.at("features")) {
    const std::string where = path + ": feature " + std::to_string(idx++);
    const json& props = feature.at("properties");
    const std::string port_id = json_string(props, "portId", where);
    const std::string zone = json_string(props, "zone", where);
    auto [it, inserted] = ports.try_emplace(port_id);
    if (inserted) order.push_back(port_id);
    Partial& part = it->second;
    part.fence.port_id = port_id;
    if (props.contains("portName")) part.fence.port_name = json_string(props, "portName", where);

    Polygon poly = polygon_from_geojson(feature.at("geometry"), where);
    if (zone == "anchorage") {
      part.fence.anchorage = std::move(poly);
      part.has_anchorage = true;
    } else if (zone == "pilotage") {
      part.fence.pilotage = std::move(poly);
      part.has_pilotage = true;
    } else if (zone == "berth") {
      Berth b;
      b.terminal = json_string(props, "terminal", where);
      b.berth_id = props.contains("berthId") ? json_string(props, "berthId", where)
                                             : port_id + "-B" + std::to_string(part.fence.berths.size());
      b.area = std::move(poly);
      if (std::find(part.fence.terminals.begin(), part.fence.terminals.end(), b.terminal) ==
          part.fence.terminals.end()) {
        part.fence.terminals.push_back(b.terminal);
      }
      part.fence.berths.push_back(std::move(b));
    } else {
      throw ValidationError(where + ": unknown zone '" + zone + "'");
    }
  }

  std::vector<PortGeofence> out;
  for (const auto& id : order) {
    Partial& part = ports.at(id);
    if (!part.has_anchorage || !part.has_pilotage || part.fence.berths.empty()) {
      throw ValidationError(path + ": port '" + id +
                            "' needs anchorage, pilotage and at least one berth");
    }
    out.push_back(std::move(part.fence));
  }
  return out;
}

void write_geofences(const std::string& path, const std::vector<PortGeofence>& fences) {
  json features = json::array();
  for (const auto& f : fences) {
    auto base = [&](const char* zone) {
      return json{{"portId", f.port_id}, {"portName", f.port_name}, {"zone", zone}};
    };
    features.push_back({{"type", "Feature"},
                        {"properties", base("anchorage")},
                        {"geometry", polygon_to_geojson(f.anchorage)}});
    features.push_back({{"type", "Feature"},
                        {"properties", base("pilotage")},
                        {"geometry", polygon_to_geojson(f.pilotage)}});
    for (const auto& b : f.berths) {
      json props = base("berth");
      props["terminal"] = b.terminal;
      props["berthId"] = b.berth_id;
      features.push_back(
          {{"type", "Feature"}, {"properties", props}, {"geometry", polygon_to_geojson(b.area)}});
    }
  }
  auto out = open_out(path);
  out << json{{"type", "FeatureCollection"}, {"features", features}}.dump(1) << '\n';
}

std::vector<VesselStatic> read_statics(const std::string& path) {
  const csv::Table t = csv::Table::read_file(path);
  std::vector<VesselStatic> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    VesselStatic s;
    s.imo = t.at(i, "IMO");
    s.mmsi = t.at(i, "MMSI");
    s.carrier = t.at(i, "crrName");
    s.teu = csv::to_double(t.at(i, "TEU"), "TEU");
    s.width = csv::to_double(t.at(i, "width"), "width");
    s.length = csv::to_double(t.at(i, "length"), "length");
    const std::string where = path + ":" + std::to_string(i + 2);
    if (!(s.teu > 0) || !(s.width > 0) || !(s.length > 0)) {
      throw ValidationError(where + ": TEU, width and length must be positive");
    }
    if (!seen.insert(s.imo).second) throw ValidationError(where + ": duplicate IMO " + s.imo);
    out.push_back(std::move(s));
  }
  return out;
}

void write_statics(const std::string& path, const std::vector<VesselStatic>& statics) {
  auto out = open_out(path);
  out << "IMO,MMSI,crrName,TEU,width,length\n";
  for (const auto& s : statics) {
    csv::write_row(out, {s.imo, s.mmsi, s.carrier, csv::format_double(s.teu),
                         csv::format_double(s.width), csv::format_double(s.length)});
  }
}

namespace {
const std::vector<std::string> kVoyageColumns = {
    "timeWindow", "IMO",           "width",   "length", "TEU",     "crrName",
    "startPortName", "endPortName", "tmnName", "ATA",    "duration"};
}

std::vector<VoyageRecord> read_voyages(const std::string& path) {
  const csv::Table t = csv::Table::read_file(path);
  std::vector<std::size_t> col;
  for (const auto& name : kVoyageColumns) col.push_back(t.column(name));
  std::vector<VoyageRecord> out;
  out.reserve(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const auto& row = t.row(i);
    VoyageRecord r;
    r.window = csv::to_int(row[col[0]], "timeWindow");
    r.imo = row[col[1]];
    r.width = csv::to_double(row[col[2]], "width");
    r.length = csv::to_double(row[col[3]], "length");
    r.teu = csv::to_double(row[col[4]], "TEU");
    r.carrier = row[col[5]];
    r.start_port = row[col[6]];
    r.end_port = row[col[7]];
    r.terminal = row[col[8]];
    r.ata = parse_timestamp(row[col[9]]);
    r.duration = csv::to_double(row[col[10]], "duration");
    const std::string where = path + ":" + std::to_string(i + 2);
    if (!(r.duration > 0)) throw ValidationError(where + ": duration must be positive");
    if (r.start_port == r.end_port)
      throw ValidationError(where + ": start and end port are identical");
    out.push_back(std::move(r));
  }
  return out;
}

void write_voyages(const std::string& path, const std::vector<VoyageRecord>& records) {
  auto out = open_out(path);
  csv::write_row(out, kVoyageColumns);
  for (const auto& r : records) {
    csv::write_row(out, {std::to_string(r.window), r.imo, csv::format_double(r.width),
                         csv::format_double(r.length), csv::format_double(r.teu), r.carrier,
                         r.start_port, r.end_port, r.terminal, format_timestamp(r.ata),
                         csv::format_double(r.duration)});
  }
  if (!out) throw IoError("write failed: " + path);
}

std::map<std::string, PortCountSeries> read_port_counts(const std::string& path) {
  const csv::Table t = csv::Table::read_file(path);
  const std::size_t c_port = t.column("port_id"), c_window = t.column("window"),
                    c_count = t.column("count");
  std::map<std::string, PortCountSeries> out;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const auto& row = t.row(i);
    auto& s = out[row[c_port]];
    s.port_id = row[c_port];
    const auto w = csv::to_int(row[c_window], "window");
    if (w != static_cast<long long>(s.counts.size()) + 1) {
      throw ValidationError(path + ":" + std::to_string(i + 2) +
                            ": windows must be contiguous from 1 for each port");
    }
    s.counts.push_back(csv::to_int(row[c_count], "count"));
  }
  return out;
}

void write_port_counts(const std::string& path,
                       const std::map<std::string, PortCountSeries>& counts) {
  auto out = open_out(path);
  out << "port_id,window,count\n";
  for (const auto& [port, s] : counts) {
    for (std::size_t t = 0; t < s.counts.size(); ++t) {
      out << csv::escape(port) << ',' << (t + 1) << ',' << s.counts[t] << '\n';
    }
  }
}

void write_diagnostics(const std::string& path, const SegmentationDiagnostics& d) {
  json j = {{"points", d.points},
            {"berthing_events", d.berthing_events},
            {"voyages", d.voyages},
            {"skipped_same_port", d.skipped_same_port},
            {"skipped_missing_anchorage_entry", d.skipped_missing_anchorage_entry},
            {"skipped_missing_pilotage_exit", d.skipped_missing_pilotage_exit},
            {"skipped_before_epoch", d.skipped_before_epoch},
            {"skipped_unknown_vessel", d.skipped_unknown_vessel},
            {"dropped_duplicate_points", d.dropped_duplicate_points}};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

}  // namespace voyagecast::ingest
