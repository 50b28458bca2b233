#include "doctest.h"

#include <cmath>
#include <numbers>

#include "hbci/decoder.hpp"
#include "hbci/rng.hpp"
#include "hbci/synth.hpp"

using namespace hbci;

namespace {

const StimulusConfig kCfg = StimulusConfig::defaults();

EegRecord record_from(std::vector<double> o2, std::vector<double> f4 = {}) {
  EegRecord r;
  r.sample_rate = 128;
  if (f4.empty()) f4.assign(o2.size(), 0.0);
  r.channels = {{"O2", "uV", std::move(o2)}, {"F4", "uV", std::move(f4)}};
  return r;
}

SynthParams quiet() {
  SynthParams p;
  p.noise_white_sigma = 0;
  p.noise_pink_sigma = 0;
  return p;
}

// Decision with only the fields fuse() reads.
Decision decision(StimulusId id, double margin, DecisionSource src) {
  Decision d;
  d.class_id = id;
  d.margin = margin;
  d.source = src;
  return d;
}

}  // namespace

TEST_CASE("SSVEP scores match scipy on a fixed signal") {
  std::vector<double> x(384);
  for (std::size_t i = 0; i < 384; ++i) {
    const double t = i / 128.0;
    x[i] = 3 * std::sin(2 * std::numbers::pi * 8 * t) +
           1.5 * std::sin(2 * std::numbers::pi * 16 * t + 0.3) +
           0.7 * std::sin(2 * std::numbers::pi * 24 * t + 1.0) +
           0.4 * std::sin(2 * std::numbers::pi * 13 * t) + std::fmod(0.05 * i, 7.0);
  }
  const auto s = ssvep_scores(record_from(x), {}, kCfg, {});
  // tools/filter_oracle.py
  CHECK(s.at(0) == doctest::Approx(1.4241183012249965).epsilon(1e-9));
  CHECK(s.at(1) == doctest::Approx(6.636644355102921).epsilon(1e-9));
  CHECK(s.at(2) == doctest::Approx(1.3514459248472073).epsilon(1e-9));
  CHECK(s.at(3) == doctest::Approx(0.06585882836643515).epsilon(1e-9));
}

TEST_CASE("noise-free synthetic windows classify to the attended stimulus") {
  for (StimulusId id = 0; id < 4; ++id) {
    FlashSchedule fl;
    fl.duration = 3;
    const auto rec = synthesize({{{0, 3, id}}}, fl, quiet(), kCfg);
    const auto d = classify_ssvep(ssvep_scores(rec, {}, kCfg, {}), kCfg);
    CHECK(d.class_id == id);
    CHECK(d.source == DecisionSource::Ssvep);
    CHECK_FALSE(d.low_confidence);
  }
}

TEST_CASE("scores scale with the square of the signal; zero signal scores zero") {
  Rng r(4);
  std::vector<double> x(384), cx(384);
  for (std::size_t i = 0; i < 384; ++i) {
    x[i] = r.normal();
    cx[i] = 3.0 * x[i];
  }
  const auto a = ssvep_scores(record_from(x), {}, kCfg, {});
  const auto b = ssvep_scores(record_from(cx), {}, kCfg, {});
  for (const auto& [id, v] : a) CHECK(b.at(id) == doctest::Approx(9.0 * v).epsilon(1e-12));
  for (const auto& [id, v] : ssvep_scores(record_from(std::vector<double>(384, 0.0)), {}, kCfg, {}))
    CHECK(v == 0.0);
}

TEST_CASE("window and channel errors") {
  const auto rec = record_from(std::vector<double>(384, 0.0));
  AnalysisWindow w;
  w.start = 1.0;
  w.end = 1.0;
  CHECK_THROWS_AS(ssvep_scores(rec, w, kCfg, {}), Error);
  w.end = 1.5;  // shorter than twice the edge trim
  try {
    ssvep_scores(rec, w, kCfg, {});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyWindow);
  }
  w = {};
  w.channel_ssvep = "Oz";
  try {
    ssvep_scores(rec, w, kCfg, {});
    FAIL("expected MissingChannel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingChannel);
    CHECK(std::string(e.what()).find("Oz") != std::string::npos);
  }
  w = {};
  w.end = 4.0;
  CHECK_THROWS_AS(ssvep_scores(rec, w, kCfg, {}), Error);
}

TEST_CASE("classify_ssvep arithmetic and tie rule") {
  const auto d = classify_ssvep({{0, 1.0}, {1, 0.2}, {2, 0.1}, {3, 0.1}}, kCfg);
  CHECK(d.class_id == 0);
  CHECK(d.margin == doctest::Approx(4.0));
  CHECK_FALSE(d.low_confidence);

  const auto tie = classify_ssvep({{0, 2.0}, {1, 2.0}, {2, 2.0}, {3, 2.0}}, kCfg);
  CHECK(tie.class_id == 0);
  CHECK(tie.low_confidence);
  CHECK(tie.margin == 0.0);

  // The tie goes to the lowest frequency even if it is not the lowest id.
  StimulusConfig swapped = kCfg;
  swapped.stimuli[0].frequency = 12;
  CHECK(classify_ssvep({{0, 1.0}, {1, 1.0}, {2, 0.5}, {3, 0.5}}, swapped).class_id == 1);

  CHECK(classify_ssvep({{0, 1.0}, {1, 0.0}, {2, 0.0}, {3, 0.0}}, kCfg).margin ==
        kUnboundedMargin);
  CHECK_THROWS_AS(classify_ssvep({{0, 1.0}}, kCfg), Error);
}

TEST_CASE("classification is invariant under positive scaling and monotone maps") {
  Rng r(6);
  for (int trial = 0; trial < 200; ++trial) {
    ScoreMap s;
    for (int id = 0; id < 4; ++id) s[id] = 0.01 + r.uniform() * 10;
    const double c = 0.001 + r.uniform() * 1000;
    ScoreMap scaled, mapped;
    for (const auto& [id, v] : s) {
      scaled[id] = c * v;
      mapped[id] = std::log(v) * 3 + 7;
    }
    const auto a = classify_ssvep(s, kCfg);
    const auto b = classify_ssvep(scaled, kCfg);
    CHECK(a.class_id == b.class_id);
    CHECK(a.margin == doctest::Approx(b.margin).epsilon(1e-12));
    CHECK(classify_p300(mapped, kCfg).class_id == a.class_id);
  }
}

TEST_CASE("single noise-free target flash: amplitude and latency") {
  FlashSchedule fl;
  fl.duration = 3;
  fl.flashes = {{1, 1.0, 0.1}};
  const auto rec = synthesize({{{0, 3, 1}}}, fl, quiet(), kCfg);
  const auto r = p300_scores(rec, {}, kCfg, {});
  REQUIRE(r.scores.size() == 1);
  CHECK(r.scores.at(1) >= 4.9);
  CHECK(r.scores.at(1) <= 5.1);
  REQUIRE(r.flashes.size() == 1);
  CHECK(std::abs(r.flashes[0].latency - 0.3) <= 2.0 / 128);
}

TEST_CASE("window with no markers raises NoMarkers") {
  const auto rec = record_from(std::vector<double>(384, 0.0));
  try {
    p300_scores(rec, {}, kCfg, {});
    FAIL("expected NoMarkers");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoMarkers);
    CHECK(std::string(e.what()).find("[0, 3)") != std::string::npos);
  }
}

TEST_CASE("two identical flashes score like one") {
  std::vector<double> f4(640, 0.0);
  auto bump = [&](std::size_t onset) {
    for (std::size_t i = 0; i < 77; ++i) {
      const double z = (i / 128.0 - 0.3) / 0.06;
      f4[onset + i] += 5 * std::exp(-0.5 * z * z);
    }
  };
  bump(64);
  bump(320);
  auto rec = record_from(std::vector<double>(640, 0.0), f4);
  rec.markers = {{222, 0.5}};
  AnalysisWindow w;
  w.end = 4.0;
  const double one = p300_scores(rec, w, kCfg, {}).scores.at(1);
  rec.markers = {{222, 0.5}, {222, 2.5}};
  CHECK(p300_scores(rec, w, kCfg, {}).scores.at(1) == doctest::Approx(one).epsilon(1e-12));
}

TEST_CASE("incomplete and unknown flashes are counted, not scored") {
  auto rec = record_from(std::vector<double>(384, 0.0));
  rec.markers = {{111, 0.05}, {999, 1.0}, {222, 2.9}, {333, 1.5}};
  const auto r = p300_scores(rec, {}, kCfg, {});
  CHECK(r.skipped_incomplete == 2);
  CHECK(r.skipped_unknown == 1);
  CHECK(r.scores.size() == 1);
  CHECK(r.scores.count(2) == 1);
}

TEST_CASE("P300 reads only its baseline and post-windows") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> f4(1280);
    for (auto& v : f4) v = rng.normal() * 4;
    auto rec = record_from(std::vector<double>(1280, 0.0), f4);
    const auto fl = schedule_flashes(kCfg, 9.0, 0.1, trial);
    rec.markers = emit_marker_events(fl, kCfg);
    AnalysisWindow w;
    w.start = 1.0;
    w.end = 8.0;
    const auto before = p300_scores(rec, w, kCfg, {});

    std::vector<bool> used(1280, false);
    for (const auto& m : rec.markers) {
      if (m.timestamp < w.start || m.timestamp >= w.end) continue;
      const long onset = std::lround(m.timestamp * 128);
      for (long i = onset - std::lround(0.1 * 128); i <= onset + std::lround(0.6 * 128); ++i)
        if (i >= 0 && i < 1280) used[i] = true;
    }
    auto& samples = rec.channels[1].samples;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (!used[i]) samples[i] = 1e6 * (rng.uniform() - 0.5);
    const auto after = p300_scores(rec, w, kCfg, {});
    CHECK(after.scores == before.scores);
  }
}

TEST_CASE("classify_p300 handles negative and zero seconds") {
  const auto d = classify_p300({{0, 0.4}, {1, 4.8}, {2, 0.5}, {3, 0.3}}, kCfg);
  CHECK(d.class_id == 1);
  CHECK(d.source == DecisionSource::P300);
  const auto neg = classify_p300({{0, -1.0}, {1, 2.0}, {2, -0.5}, {3, 0.0}}, kCfg);
  CHECK(neg.class_id == 1);
  CHECK(neg.margin == doctest::Approx(2.0 / 1e-12));
  const auto tie = classify_p300({{0, 1.0}, {1, 1.0}, {2, 1.0}, {3, 1.0}}, kCfg);
  CHECK(tie.class_id == 0);
  CHECK(tie.low_confidence);
}

TEST_CASE("noise-free P300 attending 8 Hz has margin near 9") {
  FlashSchedule fl;
  fl.duration = 3;
  // One flash per stimulus, spaced beyond the bump support.
  fl.flashes = {{0, 0.2, 0.1}, {1, 0.9, 0.1}, {2, 1.6, 0.1}, {3, 2.3, 0.1}};
  auto rec = synthesize({{{0, 3, 1}}}, fl, quiet(), kCfg);
  // Extend the record so the last post-window fits.
  for (auto& c : rec.channels) c.samples.resize(3 * 128 + 128, 0.0);
  const auto d = classify_p300(p300_scores(rec, {}, kCfg, {}).scores, kCfg);
  CHECK(d.class_id == 1);
  CHECK(d.margin == doctest::Approx(9.0).epsilon(0.05));
}

TEST_CASE("fusion gate") {
  const DecoderParams p;
  auto s = decision(0, 0.5, DecisionSource::Ssvep);
  auto q = decision(2, 0.4, DecisionSource::P300);
  auto f = fuse(s, q, p);
  CHECK(f.class_id == 0);
  CHECK(f.source == DecisionSource::Fused);
  CHECK_FALSE(f.low_confidence);

  s.margin = 0.05;
  f = fuse(s, q, p);
  CHECK(f.class_id == 2);
  CHECK_FALSE(f.low_confidence);

  f = fuse(s, std::nullopt, p);
  CHECK(f.class_id == 0);
  CHECK(f.low_confidence);

  q.margin = 0.1;
  f = fuse(s, q, p);
  CHECK(f.class_id == 0);
  CHECK(f.low_confidence);
}

TEST_CASE("fusion never invents a class") {
  Rng r(21);
  const DecoderParams p;
  for (int i = 0; i < 1000; ++i) {
    const auto s = decision(static_cast<int>(r.below(4)), r.uniform(0, 0.4), DecisionSource::Ssvep);
    const auto q = decision(static_cast<int>(r.below(4)), r.uniform(0, 0.4), DecisionSource::P300);
    const auto f = fuse(s, r.below(2) ? std::optional<Decision>(q) : std::nullopt, p);
    CHECK((f.class_id == s.class_id || f.class_id == q.class_id));
  }
}

TEST_CASE("decode_window degrades when P300 is unavailable") {
  FlashSchedule fl;
  fl.duration = 3;
  const auto rec = synthesize({{{0, 3, 2}}}, fl, quiet(), kCfg);
  const auto d = decode_window(rec, {}, kCfg, {});
  CHECK_FALSE(d.p300.has_value());
  CHECK(d.p300_status.find("unavailable") == 0);
  CHECK(d.fused.class_id == 2);

  const auto no_markers = decode_window(rec, {}, kCfg, {}, false);
  CHECK(no_markers.p300_status == "unavailable: no marker channel");
  CHECK(no_markers.fused.source == DecisionSource::Ssvep);
  CHECK(no_markers.fused.class_id == 2);

  AnalysisWindow w;
  w.channel_p300 = "Fz";
  auto with_marker = rec;
  with_marker.markers = {{111, 1.0}};
  CHECK_THROWS_AS(decode_window(with_marker, w, kCfg, {}), Error);
}
