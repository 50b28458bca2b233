#include "doctest.h"

#include <cmath>
#include <set>

#include "hbci/rng.hpp"
#include "hbci/stimulus.hpp"

using namespace hbci;

TEST_CASE("mt19937_64 stream matches the standard's reference value") {
  // The standard pins the 10000th output of a default-seeded engine.
  Rng r(5489u);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = r.next();
  CHECK(v == 9981545732273789042ull);
}

TEST_CASE("uniform stays in [0, 1) and below() is in range") {
  Rng r(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(r.below(7) < 7u);
  }
}

TEST_CASE("normal draws have unit variance") {
  Rng r(11);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(s2 / n - mean * mean - 1.0) < 0.02);
}

TEST_CASE("derive_seed separates streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4; ++s)
    for (std::uint64_t k = 0; k < 200; ++k) seen.insert(derive_seed(s, k));
  CHECK(seen.size() == 800);
  CHECK(derive_seed(42, 1) == derive_seed(42, 1));
}

TEST_CASE("flicker state at the edges of a 7 Hz cycle") {
  CHECK(flicker_on(7, 0.85, 0.0));
  CHECK(flicker_on(7, 0.85, 0.120));
  CHECK_FALSE(flicker_on(7, 0.85, 0.130));
  CHECK(flicker_on(7, 0.85, 1.0 / 7.0));
  // ON window ends at 0.85/7 s.
  CHECK(flicker_on(7, 0.85, 0.85 / 7 - 1e-6));
  CHECK_FALSE(flicker_on(7, 0.85, 0.85 / 7 + 1e-6));
}

TEST_CASE("flicker is periodic with period 1/f") {
  Rng r(9);
  for (double f : {7.0, 8.0, 9.0, 10.0, 13.7}) {
    for (int i = 0; i < 2000; ++i) {
      const double t = r.uniform(0.0, 10.0);
      // Probe away from edges so rounding in t + 1/f cannot move across one.
      const double phase = t * f - std::floor(t * f);
      if (std::abs(phase - 0.85) < 1e-9 || phase < 1e-9 || phase > 1 - 1e-9) continue;
      REQUIRE(flicker_on(f, 0.85, t) == flicker_on(f, 0.85, t + 1.0 / f));
    }
  }
}

TEST_CASE("timeline tick count and ON fraction") {
  const auto cfg = StimulusConfig::defaults();
  const auto tl = build_flicker_timeline(cfg.by_id(0), 3.0, 1e-3);
  CHECK(tl.states.size() == 3000);
  CHECK(std::abs(tl.on_fraction() - 0.85) <= 0.85 / (3000 * 0.85) + 1e-12);
  CHECK(tl.states[0]);
}

TEST_CASE("10 Hz over 1 s has exactly 10 falling edges") {
  const auto tl = build_flicker_timeline(StimulusConfig::defaults().by_id(3), 1.0, 1e-3);
  CHECK(tl.falling_edges() == 10);
}

TEST_CASE("one period gives the duty cycle within one tick") {
  for (const auto& s : StimulusConfig::defaults().stimuli) {
    const double period = 1.0 / s.frequency;
    const double res = 1e-4;
    const auto tl = build_flicker_timeline(s, period, res);
    const double tick = 1.0 / static_cast<double>(tl.states.size());
    CHECK(std::abs(tl.on_fraction() - s.duty_cycle) <= tick + 1e-12);
  }
}

TEST_CASE("coarse resolution and empty duration are rejected") {
  const auto& s = StimulusConfig::defaults().by_id(3);  // 10 Hz
  CHECK_THROWS_AS(build_flicker_timeline(s, 1.0, 0.011), Error);
  CHECK_NOTHROW(build_flicker_timeline(s, 1.0, 0.01));
  CHECK_THROWS_AS(build_flicker_timeline(s, 0.0, 1e-3), Error);
}

TEST_CASE("empty duration gives an empty schedule") {
  const auto sch = schedule_flashes(StimulusConfig::defaults(), 0.0, 0.1, 42);
  CHECK(sch.flashes.empty());
  CHECK(emit_marker_events(sch, StimulusConfig::defaults()).empty());
}

TEST_CASE("10 s schedule: gaps in range, no repeats, reproducible") {
  const auto cfg = StimulusConfig::defaults();
  const auto a = schedule_flashes(cfg, 10.0, 0.1, 42);
  const auto b = schedule_flashes(cfg, 10.0, 0.1, 42);
  CHECK(a == b);
  REQUIRE(a.flashes.size() > 5);
  CHECK(a.flashes.front().onset >= kMinFlashGap);
  CHECK(a.flashes.front().onset <= kMaxFlashGap);
  for (std::size_t i = 1; i < a.flashes.size(); ++i) {
    const double gap = a.flashes[i].onset - a.flashes[i - 1].onset;
    CHECK(gap >= kMinFlashGap);
    CHECK(gap <= kMaxFlashGap);
    CHECK(a.flashes[i].stimulus_id != a.flashes[i - 1].stimulus_id);
    // One flash at a time.
    CHECK(a.flashes[i - 1].onset + a.flashes[i - 1].duration <= a.flashes[i].onset);
  }
  for (const auto& f : a.flashes) CHECK(f.onset < 10.0);
  CHECK(schedule_flashes(cfg, 10.0, 0.1, 43) != a);
}

TEST_CASE("600 s schedule has a mean gap near 0.5 s") {
  const auto s = schedule_flashes(StimulusConfig::defaults(), 600.0, 0.1, 5);
  REQUIRE(s.flashes.size() >= 901);
  const double mean =
      (s.flashes.back().onset - s.flashes.front().onset) / (s.flashes.size() - 1);
  CHECK(mean >= 0.48);
  CHECK(mean <= 0.52);
}

TEST_CASE("targets are roughly uniform") {
  const auto s = schedule_flashes(StimulusConfig::defaults(), 2000.0, 0.1, 8);
  std::map<int, int> counts;
  for (const auto& f : s.flashes) counts[f.stimulus_id]++;
  CHECK(counts.size() == 4);
  for (const auto& [id, c] : counts) {
    CHECK(std::abs(c / static_cast<double>(s.flashes.size()) - 0.25) < 0.02);
  }
}

TEST_CASE("schedule is a prefix of the incremental scheduler") {
  const auto cfg = StimulusConfig::defaults();
  const auto s = schedule_flashes(cfg, 30.0, 0.1, 77);
  FlashScheduler inc(cfg, 0.1, 77);
  for (const auto& f : s.flashes) CHECK(inc.next() == f);
  CHECK(inc.next().onset >= 30.0);
}

TEST_CASE("marker events follow flashes") {
  const auto cfg = StimulusConfig::defaults();
  FlashSchedule s;
  s.duration = 3;
  s.flashes = {{1, 1.5, 0.1}};
  const auto ev = emit_marker_events(s, cfg);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0] == MarkerEvent{222, 1.5});

  s.flashes = {{0, 0.3, 0.1}, {2, 0.9, 0.1}, {3, 1.4, 0.1}};
  const auto three = emit_marker_events(s, cfg);
  REQUIRE(three.size() == 3);
  CHECK(three[0] == MarkerEvent{111, 0.3});
  CHECK(three[1] == MarkerEvent{333, 0.9});
  CHECK(three[2] == MarkerEvent{444, 1.4});
}
