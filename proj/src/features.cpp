#include "voyagecast/features.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "voyagecast/csv.hpp"
#include "voyagecast/error.hpp"
#include "voyagecast/rng.hpp"

namespace voyagecast::features {

namespace {

int lookup_sorted(const std::vector<std::string>& values, const std::string& v) {
  if (v.empty()) return 0;
  auto it = std::lower_bound(values.begin(), values.end(), v);
  if (it == values.end() || *it != v) return 0;
  return static_cast<int>(it - values.begin()) + 1;
}

std::vector<std::string> sorted_unique(std::set<std::string> s) {
  s.erase(std::string());
  return {s.begin(), s.end()};
}

}  // namespace

Catalog Catalog::from_records(const std::vector<ingest::VoyageRecord>& records) {
  std::set<std::string> ports, terminals, carriers;
  for (const auto& r : records) {
    ports.insert(r.start_port);
    ports.insert(r.end_port);
    terminals.insert(r.terminal);
    carriers.insert(r.carrier);
  }
  return {sorted_unique(std::move(ports)), sorted_unique(std::move(terminals)),
          sorted_unique(std::move(carriers))};
}

int Catalog::port_id(const std::string& v) const { return lookup_sorted(ports, v); }
int Catalog::terminal_id(const std::string& v) const { return lookup_sorted(terminals, v); }
int Catalog::carrier_id(const std::string& v) const { return lookup_sorted(carriers, v); }

std::vector<SegmentSeries> build_segment_series(
    const std::vector<ingest::VoyageRecord>& records,
    const std::map<std::string, ingest::PortCountSeries>& port_counts, const Catalog& catalog,
    WindowIndex first_window, WindowIndex last_window, std::uint64_t seed) {
  if (last_window < first_window) throw ValidationError("empty window range for series");

  std::map<Segment, std::vector<const ingest::VoyageRecord*>> by_segment;
  for (const auto& r : records) by_segment[{r.start_port, r.end_port}].push_back(&r);

  const Rng root = Rng(seed).derive("collision");
  const auto n = static_cast<std::size_t>(last_window - first_window + 1);

  std::vector<SegmentSeries> out;
  for (const auto& [segment, recs] : by_segment) {
    auto counts_it = port_counts.find(segment.second);
    if (counts_it == port_counts.end()) {
      throw ValidationError("no vessel-count series for destination port '" + segment.second +
                            "'");
    }
    const auto& counts = counts_it->second.counts;
    if (static_cast<WindowIndex>(counts.size()) < last_window) {
      throw ValidationError("vessel-count series for port '" + segment.second +
                            "' ends before window " + std::to_string(last_window));
    }

    SegmentSeries s;
    s.segment = segment;
    s.start_port = catalog.port_id(segment.first);
    s.end_port = catalog.port_id(segment.second);
    s.first_window = first_window;
    s.last_window = last_window;
    s.record_count = recs.size();
    s.y.assign(n, 0.0);
    s.x.assign(n, 0.0);
    s.length.assign(n, 0.0);
    s.width.assign(n, 0.0);
    s.teu.assign(n, 0.0);
    s.carrier.assign(n, 0);
    s.terminal.assign(n, 0);
    s.observed.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      s.x[i] = static_cast<double>(counts[static_cast<std::size_t>(first_window - 1) + i]);
    }

    std::map<WindowIndex, std::vector<const ingest::VoyageRecord*>> by_window;
    for (const auto* r : recs) {
      if (r->window >= first_window && r->window <= last_window) by_window[r->window].push_back(r);
    }

    Rng rng = root.derive(segment.first + "\x1f" + segment.second);
    for (const auto& [w, candidates] : by_window) {
      const auto* pick = candidates.size() == 1 ? candidates.front()
                                                : candidates[rng.below(candidates.size())];
      const std::size_t i = s.offset(w);
      s.y[i] = pick->duration;
      s.length[i] = pick->length;
      s.width[i] = pick->width;
      s.teu[i] = pick->teu;
      s.carrier[i] = catalog.carrier_id(pick->carrier);
      s.terminal[i] = catalog.terminal_id(pick->terminal);
      s.observed[i] = 1;
    }
    out.push_back(std::move(s));
  }
  return out;
}

bool Sample::has_target() const {
  return std::any_of(mask.begin(), mask.end(), [](double m) { return m != 0.0; });
}

std::vector<Sample> sliding_samples(const SegmentSeries& series, std::size_t series_index, int L,
                                    int H, WindowIndex first, WindowIndex last,
                                    const TimelineConfig& cfg) {
  if (L < 1 || H < 1) throw ValidationError("lookback and horizon must be at least 1");
  first = std::max(first, series.first_window);
  last = std::min(last, series.last_window);
  std::vector<Sample> out;
  const WindowIndex steps = L + H;
  if (last - first + 1 < steps) return out;

  for (WindowIndex T = first + L; T + H - 1 <= last; ++T) {
    Sample s;
    s.segment = series_index;
    s.anchor = T;
    s.lookback = L;
    s.horizon = H;
    s.categorical.assign(static_cast<std::size_t>(steps) * kNumCategorical, 0);
    s.continuous.assign(static_cast<std::size_t>(steps) * kNumContinuous, 0.0);
    s.observed.assign(static_cast<std::size_t>(steps), 0);
    s.y_target.assign(static_cast<std::size_t>(H), 0.0);
    s.x_target.assign(static_cast<std::size_t>(H), 0.0);
    s.mask.assign(static_cast<std::size_t>(H), 0.0);

    for (WindowIndex k = 0; k < steps; ++k) {
      const WindowIndex w = T - L + k;
      const std::size_t i = series.offset(w);
      const auto step = static_cast<std::size_t>(k);
      const WindowIdentifier id = window_identifier(w, cfg);
      s.cat(step, kWeekday) = id.weekday;
      s.cat(step, kSlot) = id.slot;
      s.cat(step, kStartPort) = series.start_port;
      s.cat(step, kEndPort) = series.end_port;
      s.cat(step, kTerminal) = series.terminal[i];
      s.cat(step, kCarrier) = series.carrier[i];
      s.observed[step] = series.observed[i];
      s.cont(step, kLength) = series.length[i];
      s.cont(step, kWidth) = series.width[i];
      s.cont(step, kTeu) = series.teu[i];
      if (k < L) {
        s.cont(step, kYIn) = series.y[i];
        s.cont(step, kXIn) = series.x[i];
      } else {
        const auto h = static_cast<std::size_t>(k - L);
        s.y_target[h] = series.y[i];
        s.x_target[h] = series.x[i];
        s.mask[h] = series.observed[i] ? 1.0 : 0.0;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> sliding_samples(const SegmentSeries& series, std::size_t series_index, int L,
                                    int H, const TimelineConfig& cfg) {
  return sliding_samples(series, series_index, L, H, series.first_window, series.last_window, cfg);
}

Split chronological_split(std::vector<Sample> samples, Timestamp train_end, Timestamp val_end,
                          const TimelineConfig& cfg) {
  if (!(train_end < val_end)) throw ValidationError("train_end must precede val_end");
  Split out;
  for (auto& s : samples) {
    const Timestamp start = window_bounds(s.anchor, cfg).start;
    if (start < train_end) {
      out.train.push_back(std::move(s));
    } else if (start < val_end) {
      out.val.push_back(std::move(s));
    } else {
      out.test.push_back(std::move(s));
    }
  }
  return out;
}

void Vocabulary::add(const std::string& v) {
  if (v.empty() || index.count(v)) return;
  values.push_back(v);
  index.emplace(v, static_cast<int>(values.size()));
}

int Vocabulary::lookup(const std::string& v) const {
  auto it = index.find(v);
  return it == index.end() ? 0 : it->second;
}

FeatureStats fit_stats(const std::vector<Sample>& train, const Catalog& catalog) {
  if (train.empty()) throw ValidationError("cannot fit feature statistics on an empty train split");

  // Welford accumulation per channel.
  std::array<double, kNumContinuous> mean{}, m2{};
  std::array<std::size_t, kNumContinuous> count{};
  auto push = [&](std::size_t c, double v) {
    ++count[c];
    const double d = v - mean[c];
    mean[c] += d / static_cast<double>(count[c]);
    m2[c] += d * (v - mean[c]);
  };

  std::set<int> ports, terminals, carriers;
  for (const auto& s : train) {
    if (s.standardized) throw ValidationError("fit_stats expects raw samples");
    for (int k = 0; k < s.steps(); ++k) {
      const auto step = static_cast<std::size_t>(k);
      const bool obs = s.observed[step] != 0;
      if (k < s.lookback) {
        if (obs) push(kYIn, s.cont(step, kYIn));
        push(kXIn, s.cont(step, kXIn));
      }
      if (obs) {
        push(kLength, s.cont(step, kLength));
        push(kWidth, s.cont(step, kWidth));
        push(kTeu, s.cont(step, kTeu));
      }
      ports.insert(s.cat(step, kStartPort));
      ports.insert(s.cat(step, kEndPort));
      terminals.insert(s.cat(step, kTerminal));
      carriers.insert(s.cat(step, kCarrier));
    }
  }

  FeatureStats stats;
  for (std::size_t c = 0; c < kNumContinuous; ++c) {
    ChannelStats& ch = stats.channels[c];
    if (count[c] == 0) continue;
    ch.mean = mean[c];
    ch.std = std::sqrt(m2[c] / static_cast<double>(count[c]));
    ch.scaled = ch.std > 0.0;
    if (!ch.scaled) {
      ch.mean = 0.0;
      ch.std = 1.0;
    }
  }
  auto fill = [](Vocabulary& vocab, const std::set<int>& ids, const std::vector<std::string>& names) {
    for (int id : ids) {
      if (id > 0 && id <= static_cast<int>(names.size())) vocab.add(names[static_cast<std::size_t>(id - 1)]);
    }
  };
  fill(stats.ports, ports, catalog.ports);
  fill(stats.terminals, terminals, catalog.terminals);
  fill(stats.carriers, carriers, catalog.carriers);
  return stats;
}

CategoryMap category_map(const FeatureStats& stats, const Catalog& catalog) {
  auto build = [](const Vocabulary& vocab, const std::vector<std::string>& names) {
    std::vector<int> m(names.size() + 1, 0);
    for (std::size_t i = 0; i < names.size(); ++i) m[i + 1] = vocab.lookup(names[i]);
    return m;
  };
  return {build(stats.ports, catalog.ports), build(stats.terminals, catalog.terminals),
          build(stats.carriers, catalog.carriers)};
}

void apply_stats(Sample& s, const FeatureStats& stats, const CategoryMap& map) {
  if (s.standardized) return;
  auto scale = [&](std::size_t step, Continuous c) {
    const ChannelStats& ch = stats.channels[c];
    if (ch.scaled) s.cont(step, c) = (s.cont(step, c) - ch.mean) / ch.std;
  };
  auto remap = [](const std::vector<int>& table, int id) {
    return id >= 0 && id < static_cast<int>(table.size()) ? table[static_cast<std::size_t>(id)] : 0;
  };
  for (int k = 0; k < s.steps(); ++k) {
    const auto step = static_cast<std::size_t>(k);
    const bool obs = s.observed[step] != 0;
    if (k < s.lookback) {
      if (obs) scale(step, kYIn);
      scale(step, kXIn);
    } else {
      s.cont(step, kYIn) = 0.0;
      s.cont(step, kXIn) = 0.0;
    }
    if (obs) {
      scale(step, kLength);
      scale(step, kWidth);
      scale(step, kTeu);
    } else {
      s.cont(step, kYIn) = 0.0;
      s.cont(step, kLength) = 0.0;
      s.cont(step, kWidth) = 0.0;
      s.cont(step, kTeu) = 0.0;
    }
    s.cat(step, kStartPort) = remap(map.ports, s.cat(step, kStartPort));
    s.cat(step, kEndPort) = remap(map.ports, s.cat(step, kEndPort));
    s.cat(step, kTerminal) = remap(map.terminals, s.cat(step, kTerminal));
    s.cat(step, kCarrier) = remap(map.carriers, s.cat(step, kCarrier));
  }
  s.standardized = true;
}

void drop_feature_group(Sample& s, FeatureGroup group) {
  for (int k = 0; k < s.steps(); ++k) {
    const auto step = static_cast<std::size_t>(k);
    switch (group) {
      case FeatureGroup::kTimeSeries:
        s.cont(step, kYIn) = 0.0;
        s.cont(step, kXIn) = 0.0;
        break;
      case FeatureGroup::kVessel:
        s.cont(step, kLength) = 0.0;
        s.cont(step, kWidth) = 0.0;
        s.cont(step, kTeu) = 0.0;
        s.cat(step, kCarrier) = 0;
        break;
      case FeatureGroup::kSegment:
        s.cat(step, kStartPort) = 0;
        s.cat(step, kEndPort) = 0;
        s.cat(step, kTerminal) = 0;
        break;
    }
  }
}

// ---------------------------------------------------------------------------
// Series cache bundle:
//   manifest.csv    one row per segment
//   categories.csv  kind,id,value for ports/terminals/carriers
//   segment_NNN.csv window,y,x,length,width,teu,carrier,terminal,observed

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
  return out;
}

std::string segment_file(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "segment_%03zu.csv", i);
  return buf;
}

const std::string& name_of(const std::vector<std::string>& names, int id) {
  static const std::string empty;
  return id > 0 && id <= static_cast<int>(names.size()) ? names[static_cast<std::size_t>(id - 1)]
                                                        : empty;
}

}  // namespace

void write_series_bundle(const std::string& dir, const std::vector<SegmentSeries>& series,
                         const Catalog& catalog) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    auto out = open_out(fs::path(dir) / "categories.csv");
    out << "kind,id,value\n";
    auto dump = [&](const char* kind, const std::vector<std::string>& values) {
      for (std::size_t i = 0; i < values.size(); ++i)
        csv::write_row(out, {kind, std::to_string(i + 1), values[i]});
    };
    dump("port", catalog.ports);
    dump("terminal", catalog.terminals);
    dump("carrier", catalog.carriers);
  }
  auto manifest = open_out(fs::path(dir) / "manifest.csv");
  manifest << "segment,start_port,end_port,first_window,last_window,records,file\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const SegmentSeries& s = series[i];
    const std::string file = segment_file(i);
    csv::write_row(manifest, {std::to_string(i), s.segment.first, s.segment.second,
                              std::to_string(s.first_window), std::to_string(s.last_window),
                              std::to_string(s.record_count), file});
    auto out = open_out(fs::path(dir) / file);
    out << "window,y,x,length,width,teu,carrier,terminal,observed\n";
    for (std::size_t k = 0; k < s.size(); ++k) {
      csv::write_row(out, {std::to_string(s.first_window + static_cast<WindowIndex>(k)),
                           csv::format_double(s.y[k]), csv::format_double(s.x[k]),
                           csv::format_double(s.length[k]), csv::format_double(s.width[k]),
                           csv::format_double(s.teu[k]), name_of(catalog.carriers, s.carrier[k]),
                           name_of(catalog.terminals, s.terminal[k]),
                           std::to_string(int(s.observed[k]))});
    }
  }
}

SeriesBundle read_series_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  SeriesBundle b;
  const csv::Table cats = csv::Table::read_file((fs::path(dir) / "categories.csv").string());
  for (std::size_t i = 0; i < cats.rows(); ++i) {
    const std::string& kind = cats.at(i, "kind");
    const std::string& value = cats.at(i, "value");
    if (kind == "port") b.catalog.ports.push_back(value);
    else if (kind == "terminal") b.catalog.terminals.push_back(value);
    else if (kind == "carrier") b.catalog.carriers.push_back(value);
    else throw ValidationError("categories.csv: unknown kind '" + kind + "'");
  }
  for (auto* v : {&b.catalog.ports, &b.catalog.terminals, &b.catalog.carriers}) {
    if (!std::is_sorted(v->begin(), v->end()))
      throw ValidationError("categories.csv: values must be sorted within each kind");
  }

  const csv::Table manifest = csv::Table::read_file((fs::path(dir) / "manifest.csv").string());
  for (std::size_t i = 0; i < manifest.rows(); ++i) {
    SegmentSeries s;
    s.segment = {manifest.at(i, "start_port"), manifest.at(i, "end_port")};
    s.start_port = b.catalog.port_id(s.segment.first);
    s.end_port = b.catalog.port_id(s.segment.second);
    s.first_window = csv::to_int(manifest.at(i, "first_window"), "first_window");
    s.last_window = csv::to_int(manifest.at(i, "last_window"), "last_window");
    s.record_count =
        static_cast<std::size_t>(csv::to_int(manifest.at(i, "records"), "records"));
    const csv::Table t =
        csv::Table::read_file((fs::path(dir) / manifest.at(i, "file")).string());
    if (static_cast<WindowIndex>(t.rows()) != s.last_window - s.first_window + 1) {
      throw ValidationError(t.source + ": row count does not match manifest window range");
    }
    for (std::size_t k = 0; k < t.rows(); ++k) {
      s.y.push_back(csv::to_double(t.at(k, "y"), "y"));
      s.x.push_back(csv::to_double(t.at(k, "x"), "x"));
      s.length.push_back(csv::to_double(t.at(k, "length"), "length"));
      s.width.push_back(csv::to_double(t.at(k, "width"), "width"));
      s.teu.push_back(csv::to_double(t.at(k, "teu"), "teu"));
      s.carrier.push_back(b.catalog.carrier_id(t.at(k, "carrier")));
      s.terminal.push_back(b.catalog.terminal_id(t.at(k, "terminal")));
      s.observed.push_back(static_cast<unsigned char>(csv::to_int(t.at(k, "observed"), "observed")));
    }
    b.series.push_back(std::move(s));
  }
  return b;
}

}  // namespace voyagecast::features
