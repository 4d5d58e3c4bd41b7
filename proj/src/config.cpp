#include "voyagecast/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "voyagecast/error.hpp"

namespace voyagecast {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected true or false, got '" +
                    std::string(text) + "'");
}

Timestamp parse_time(std::string_view key, std::string_view text) {
  try {
    return parse_timestamp(text);
  } catch (const ValidationError& e) {
    throw ConfigError("config key '" + std::string(key) + "': " + e.what());
  }
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
std::string fmt(long long v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define VC_INT(KEY, EXPR)                                                                     \
  Field {                                                                                     \
    KEY, [](RunConfig& c, std::string_view v) { c.EXPR = parse_number<decltype(c.EXPR)>(KEY, v); }, \
        [](const RunConfig& c) { return fmt(static_cast<long long>(c.EXPR)); }                \
  }
#define VC_REAL(KEY, EXPR)                                                                   \
  Field {                                                                                    \
    KEY, [](RunConfig& c, std::string_view v) { c.EXPR = parse_number<double>(KEY, v); },    \
        [](const RunConfig& c) { return fmt(c.EXPR); }                                       \
  }
#define VC_TEXT(KEY, EXPR)                                                        \
  Field {                                                                         \
    KEY, [](RunConfig& c, std::string_view v) { c.EXPR = std::string(v); },       \
        [](const RunConfig& c) { return c.EXPR; }                                 \
  }
#define VC_TIME(KEY, EXPR)                                                                \
  Field {                                                                                 \
    KEY, [](RunConfig& c, std::string_view v) { c.EXPR = parse_time(KEY, v); },          \
        [](const RunConfig& c) { return format_timestamp(c.EXPR); }                       \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      VC_INT("seed", seed),
      VC_TIME("timeline.epoch", timeline.epoch),
      Field{"timeline.delta_hours",
            [](RunConfig& c, std::string_view v) {
              const double h = parse_number<double>("timeline.delta_hours", v);
              const double s = h * 3600.0;
              if (!(s >= 1.0) || s != std::floor(s))
                throw ConfigError("config key 'timeline.delta_hours': must be a positive whole number of seconds");
              c.timeline.delta = Seconds(static_cast<long long>(s));
            },
            [](const RunConfig& c) { return fmt(c.timeline.delta_hours()); }},
      VC_TEXT("data.raw_dir", data.raw_dir),
      VC_TEXT("data.processed_dir", data.processed_dir),
      VC_TIME("data.end", data.end),
      VC_TIME("data.train_end", data.train_end),
      VC_TIME("data.val_end", data.val_end),
      VC_INT("data.min_segment_records", data.min_segment_records),
      Field{"data.min_dwell_minutes",
            [](RunConfig& c, std::string_view v) {
              c.data.min_dwell = Seconds(60 * parse_number<long long>("data.min_dwell_minutes", v));
            },
            [](const RunConfig& c) { return fmt(static_cast<long long>(c.data.min_dwell.count() / 60)); }},
      VC_TEXT("run.dir", run_dir),
      VC_INT("model.d_emb", model.d_emb),
      VC_INT("model.d_model", model.d_model),
      VC_INT("model.n_head", model.n_head),
      VC_INT("model.n_block", model.n_block),
      VC_INT("model.d_temp", model.d_temp),
      VC_REAL("model.p_att", model.p_att),
      VC_REAL("model.p_ffn", model.p_ffn),
      VC_INT("model.L", model.L),
      VC_INT("model.H", model.H),
      VC_REAL("model.beta", model.beta),
      VC_REAL("model.eta", model.eta),
      VC_REAL("model.pe_base", model.pe_base),
      Field{"model.head_dim_scaling",
            [](RunConfig& c, std::string_view v) {
              c.model.head_dim_scaling = parse_bool("model.head_dim_scaling", v);
            },
            [](const RunConfig& c) { return fmt(c.model.head_dim_scaling); }},
      VC_REAL("train.lr0", train.lr0),
      VC_REAL("train.decay", train.decay),
      VC_INT("train.decay_every", train.decay_every),
      VC_INT("train.batch_size", train.batch_size),
      VC_INT("train.max_epochs", train.max_epochs),
      VC_REAL("train.clip_norm", train.clip_norm),
      VC_INT("exec.threads", exec.threads),
      VC_INT("exec.chunk_size", exec.chunk_size),
      VC_INT("synth.n_ports", world.n_ports),
      VC_INT("synth.n_vessels", world.n_vessels),
      VC_INT("synth.n_segments", world.n_segments),
      VC_INT("synth.horizon_days", world.horizon_days),
      Field{"synth.ais_interval_seconds",
            [](RunConfig& c, std::string_view v) {
              c.world.sample_interval = Seconds(parse_number<long long>("synth.ais_interval_seconds", v));
            },
            [](const RunConfig& c) { return fmt(static_cast<long long>(c.world.sample_interval.count())); }},
      VC_REAL("synth.base_min_hours", world.base_min_hours),
      VC_REAL("synth.base_max_hours", world.base_max_hours),
      VC_REAL("synth.kappa", world.kappa),
      VC_REAL("synth.noise_std_hours", world.noise_std_hours),
      VC_REAL("synth.congestion_window_days", world.congestion_window_days),
      VC_REAL("synth.grid_spacing", world.grid_spacing),
  };
  return table;
}

#undef VC_INT
#undef VC_REAL
#undef VC_TEXT
#undef VC_TIME

}  // namespace

void RunConfig::sync() {
  train.seed = seed;
  world.seed = seed;
  world.start = timeline.epoch;
}

void RunConfig::validate() const {
  timeline.validate();
  model.validate();
  train.validate();
  world.validate();
  if (exec.threads < 1) throw ConfigError("exec.threads must be at least 1");
  if (exec.chunk_size < 1) throw ConfigError("exec.chunk_size must be at least 1");
  if (!(data.train_end <= data.val_end)) throw ConfigError("data.train_end must not follow data.val_end");
  if (!(data.end > timeline.epoch)) throw ConfigError("data.end must follow timeline.epoch");
  if (data.min_dwell.count() < 0) throw ConfigError("data.min_dwell_minutes must not be negative");
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(number) + ": expected key=value");
    try {
      apply_setting(cfg, trim(std::string_view(body).substr(0, eq)),
                    trim(std::string_view(body).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    apply_config_text(cfg, text.str(), path);
  }
  for (const std::string& o : overrides) apply_config_text(cfg, o, "--set");
  cfg.sync();
  cfg.validate();
  return cfg;
}

std::string render_config(const RunConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) out += f.key + "=" + f.get(cfg) + "\n";
  return out;
}

void write_config(const std::string& path, const RunConfig& cfg) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << render_config(cfg);
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace voyagecast
