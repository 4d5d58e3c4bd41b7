#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "voyagecast/model.hpp"
#include "voyagecast/synth.hpp"
#include "voyagecast/timeline.hpp"
#include "voyagecast/train.hpp"

namespace voyagecast {

struct DataConfig {
  std::string raw_dir = "data/raw";
  std::string processed_dir = "data/processed";
  /// Series cover windows from the epoch up to this instant (exclusive).
  Timestamp end = make_timestamp(2022, 1, 1);
  Timestamp train_end = make_timestamp(2021, 9, 1);
  Timestamp val_end = make_timestamp(2021, 11, 1);
  /// Segments need strictly more records than this to be modelled.
  std::size_t min_segment_records = 0;
  Seconds min_dwell{0};
};

/// Everything a command needs. One root seed feeds every random stream.
struct RunConfig {
  std::uint64_t seed = 7;
  TimelineConfig timeline;
  DataConfig data;
  std::string run_dir = "runs/default";
  model::ModelConfig model;
  train::TrainConfig train;
  train::ExecConfig exec;
  synth::WorldSpec world;

  /// Copies the root seed and epoch into the sub-configs that carry their own.
  void sync();
  void validate() const;
};

/// Sets one dotted key. Throws ConfigError for unknown keys or bad values.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Parses key=value lines; '#' starts a comment, blank lines are ignored.
void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& origin);

/// Defaults, then the optional file, then "key=value" overrides in order.
RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides);

/// Every key in a fixed order, one key=value per line.
std::string render_config(const RunConfig& cfg);
void write_config(const std::string& path, const RunConfig& cfg);

std::vector<std::string> config_keys();

}  // namespace voyagecast
