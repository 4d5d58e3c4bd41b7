#include "voyagecast/timeline.hpp"

#include <charconv>
#include <cstdio>

#include "voyagecast/error.hpp"

namespace voyagecast {

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > text.size()) return false;
  auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
  return ec == std::errc() && ptr == text.data() + pos + len;
}

}  // namespace

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour, int minute, int second) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) throw ValidationError("invalid calendar date");
  return sys_days{ymd} + hours{hour} + minutes{minute} + seconds{second};
}

Timestamp parse_timestamp(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '"')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '"' || text.back() == '\r'))
    text.remove_suffix(1);
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);

  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  bool ok = read_int(text, 0, 4, y) && text.size() >= 10 && text[4] == '-' &&
            read_int(text, 5, 2, mo) && text[7] == '-' && read_int(text, 8, 2, d);
  if (ok && text.size() > 10) {
    ok = (text[10] == 'T' || text[10] == ' ') && read_int(text, 11, 2, h) && text.size() >= 16 &&
         text[13] == ':' && read_int(text, 14, 2, mi);
    if (ok && text.size() > 16) {
      ok = text[16] == ':' && read_int(text, 17, 2, s);
      // Fractional seconds are truncated.
      if (ok && text.size() > 19) ok = text[19] == '.';
    }
  }
  if (!ok || mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 60) {
    throw ValidationError("unparseable timestamp '" + std::string(text) + "'");
  }
  return make_timestamp(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi, s);
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const auto day = floor<days>(ts);
  const year_month_day ymd{day};
  const hh_mm_ss tod{ts - day};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02u:%02u:%02uZ", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), unsigned(tod.hours().count() % 24),
                unsigned(tod.minutes().count()), unsigned(tod.seconds().count()));
  return buf;
}

void TimelineConfig::validate() const {
  if (delta.count() <= 0) throw ValidationError("timeline delta must be positive");
  if (86400 % delta.count() != 0)
    throw ValidationError("timeline delta must divide 24 hours evenly");
}

WindowIndex window_of(Timestamp ts, const TimelineConfig& cfg) {
  if (ts < cfg.epoch) {
    throw ValidationError("timestamp " + format_timestamp(ts) + " precedes timeline epoch " +
                          format_timestamp(cfg.epoch));
  }
  return (ts - cfg.epoch).count() / cfg.delta.count() + 1;
}

WindowBounds window_bounds(WindowIndex t, const TimelineConfig& cfg) {
  const Timestamp start = cfg.epoch + cfg.delta * (t - 1);
  return {start, start + cfg.delta};
}

WindowIdentifier window_identifier(WindowIndex t, const TimelineConfig& cfg) {
  using namespace std::chrono;
  const Timestamp start = window_bounds(t, cfg).start;
  const auto day = floor<days>(start);
  const weekday wd{day};
  WindowIdentifier id;
  id.weekday = static_cast<int>(wd.iso_encoding()) - 1;
  id.slot = static_cast<int>((start - day).count() / cfg.delta.count());
  return id;
}

WindowIndex windows_until(Timestamp end, const TimelineConfig& cfg) {
  if (end <= cfg.epoch) return 0;
  const auto span = (end - cfg.epoch).count();
  return (span + cfg.delta.count() - 1) / cfg.delta.count();
}

}  // namespace voyagecast
