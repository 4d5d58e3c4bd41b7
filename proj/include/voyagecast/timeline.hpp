#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

namespace voyagecast {

using Timestamp = std::chrono::sys_seconds;
using Seconds = std::chrono::seconds;

/// 1-based index of a fixed-width half-open time window.
using WindowIndex = std::int64_t;

/// Parses "YYYY-MM-DD", "YYYY-MM-DDTHH:MM[:SS][Z]" or the same with a space
/// separator. Always UTC.
Timestamp parse_timestamp(std::string_view text);

/// ISO-8601 UTC rendering, "YYYY-MM-DDTHH:MM:SSZ".
std::string format_timestamp(Timestamp ts);

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0, int minute = 0,
                         int second = 0);

struct TimelineConfig {
  Timestamp epoch = make_timestamp(2021, 1, 1);
  Seconds delta = std::chrono::hours(6);

  double delta_hours() const { return static_cast<double>(delta.count()) / 3600.0; }

  /// Number of windows in one calendar day (24h / delta).
  int windows_per_day() const { return static_cast<int>(86400 / delta.count()); }

  /// Throws ValidationError unless delta > 0 and divides a day evenly.
  void validate() const;
};

struct WindowIdentifier {
  int weekday = 0;  ///< Monday = 0 ... Sunday = 6
  int slot = 0;     ///< 0-based position of the window within its day

  bool operator==(const WindowIdentifier&) const = default;
};

struct WindowBounds {
  Timestamp start;
  Timestamp end;  ///< exclusive
};

WindowIndex window_of(Timestamp ts, const TimelineConfig& cfg);
WindowIdentifier window_identifier(WindowIndex t, const TimelineConfig& cfg);
WindowBounds window_bounds(WindowIndex t, const TimelineConfig& cfg);

/// Number of whole windows between the epoch and `end` (exclusive).
WindowIndex windows_until(Timestamp end, const TimelineConfig& cfg);

}  // namespace voyagecast
