#include "doctest.h"

#include "voyagecast/error.hpp"
#include "voyagecast/rng.hpp"
#include "voyagecast/timeline.hpp"

using namespace voyagecast;
using std::chrono::hours;

TEST_CASE("window_of uses half-open windows from the epoch") {
  const TimelineConfig cfg;
  CHECK(window_of(make_timestamp(2021, 1, 1), cfg) == 1);
  CHECK(window_of(make_timestamp(2021, 1, 1, 5, 59, 59), cfg) == 1);
  CHECK(window_of(make_timestamp(2021, 1, 1, 6), cfg) == 2);
  CHECK(window_of(make_timestamp(2021, 1, 2, 13, 30), cfg) == 7);
}

TEST_CASE("window_of agrees with a scan over consecutive bounds") {
  const TimelineConfig cfg;
  const Timestamp ts = make_timestamp(2021, 3, 17, 21, 14, 3);
  WindowIndex t = 1;
  while (!(window_bounds(t, cfg).start <= ts && ts < window_bounds(t, cfg).end)) ++t;
  CHECK(window_of(ts, cfg) == t);
}

TEST_CASE("timestamps before the epoch are rejected with the timestamp named") {
  const TimelineConfig cfg;
  try {
    window_of(make_timestamp(2020, 12, 31, 23), cfg);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("2020-12-31T23:00:00Z") != std::string::npos);
  }
}

TEST_CASE("window identifiers follow the calendar with Monday = 0") {
  const TimelineConfig cfg;  // 2021-01-01 is a Friday
  CHECK(window_identifier(1, cfg) == WindowIdentifier{4, 0});
  CHECK(window_identifier(4, cfg) == WindowIdentifier{4, 3});
  CHECK(window_identifier(5, cfg) == WindowIdentifier{5, 0});
  CHECK(window_identifier(13, cfg) == WindowIdentifier{0, 0});
}

TEST_CASE("identifiers are periodic in weeks and days") {
  const TimelineConfig cfg;
  const int per_day = cfg.windows_per_day();
  for (WindowIndex t = 1; t < 200; ++t) {
    CHECK(window_identifier(t + 7 * per_day, cfg) == window_identifier(t, cfg));
    CHECK(window_identifier(t + per_day, cfg).slot == window_identifier(t, cfg).slot);
  }
}

TEST_CASE("window bounds tile time") {
  const TimelineConfig cfg;
  CHECK(window_bounds(1, cfg).start == make_timestamp(2021, 1, 1));
  CHECK(window_bounds(1, cfg).end == make_timestamp(2021, 1, 1, 6));
  CHECK(window_bounds(2, cfg).start == make_timestamp(2021, 1, 1, 6));
  CHECK(window_bounds(2, cfg).end == make_timestamp(2021, 1, 1, 12));
  for (WindowIndex t = 1; t < 500; ++t) {
    CHECK(window_bounds(t, cfg).end == window_bounds(t + 1, cfg).start);
    CHECK(window_bounds(t, cfg).end - window_bounds(t, cfg).start == cfg.delta);
  }
}

TEST_CASE("random instants inside a window map back to it") {
  const TimelineConfig cfg;
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto t = static_cast<WindowIndex>(1 + rng.below(5000));
    const auto b = window_bounds(t, cfg);
    const auto offset = static_cast<long long>(rng.below(static_cast<std::uint64_t>(cfg.delta.count())));
    CHECK(window_of(b.start + Seconds(offset), cfg) == t);
  }
}

TEST_CASE("other window widths") {
  TimelineConfig cfg;
  cfg.delta = hours(3);
  CHECK(cfg.windows_per_day() == 8);
  CHECK(window_identifier(8, cfg) == WindowIdentifier{4, 7});
  cfg.delta = hours(5);
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.delta = Seconds(0);
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("timestamps parse and format in UTC") {
  CHECK(parse_timestamp("2021-05-03T07:08:09Z") == make_timestamp(2021, 5, 3, 7, 8, 9));
  CHECK(parse_timestamp("2021-05-03 07:08") == make_timestamp(2021, 5, 3, 7, 8));
  CHECK(parse_timestamp("2021-05-03") == make_timestamp(2021, 5, 3));
  CHECK(format_timestamp(make_timestamp(2021, 12, 31, 23, 59, 1)) == "2021-12-31T23:59:01Z");
  CHECK_THROWS_AS(parse_timestamp("May 3"), ValidationError);
}
