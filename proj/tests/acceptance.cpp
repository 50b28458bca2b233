// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "hbci/config.hpp"
#include "hbci/decoder.hpp"
#include "hbci/edf.hpp"
#include "hbci/filter.hpp"
#include "hbci/hbci.h"
#include "hbci/marker_link.hpp"
#include "hbci/rng.hpp"
#include "hbci/robot.hpp"
#include "hbci/runner.hpp"
#include "hbci/stimulus.hpp"
#include "hbci/synth.hpp"

using namespace hbci;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

char buf[512];

template <typename... A>
std::string fmt(const char* f, A... a) {
  std::snprintf(buf, sizeof(buf), f, a...);
  return buf;
}

AppConfig quiet() {
  AppConfig c;
  c.synth.noise_white_sigma = 0;
  c.synth.noise_pink_sigma = 0;
  return c;
}

Outcome flicker() {
  Outcome o;
  double worst_period = 0, worst_fraction = 0;
  for (const auto& s : StimulusConfig::defaults().stimuli) {
    const auto tl = build_flicker_timeline(s, 3.0, 1e-3);
    std::vector<std::size_t> rising;
    for (std::size_t i = 1; i < tl.states.size(); ++i)
      if (tl.states[i] && !tl.states[i - 1]) rising.push_back(i);
    o.require(rising.size() >= 2, "too few periods");
    const double ticks = 1000.0 / s.frequency;
    for (std::size_t k = 1; k < rising.size(); ++k) {
      const double err = std::abs(static_cast<double>(rising[k] - rising[k - 1]) - ticks);
      worst_period = std::max(worst_period, err);
    }
    worst_fraction = std::max(worst_fraction, std::abs(tl.on_fraction() - 0.85));
  }
  o.require(worst_period <= 1.0, fmt("period off by %.2f ticks", worst_period));
  o.require(worst_fraction <= 0.004, fmt("ON fraction off by %.4f", worst_fraction));
  if (o.pass)
    o.detail = fmt("max period error %.2f ticks, max ON-fraction error %.4f", worst_period,
                   worst_fraction);
  return o;
}

std::vector<double> gaps(std::uint64_t seed, int count) {
  FlashScheduler s(StimulusConfig::defaults(), kDefaultFlashDuration, seed);
  std::vector<double> onsets;
  for (int i = 0; i <= count; ++i) onsets.push_back(s.next().onset);
  std::vector<double> g;
  for (int i = 1; i <= count; ++i) g.push_back(onsets[i] - onsets[i - 1]);
  return g;
}

Outcome flash_scheduler() {
  Outcome o;
  const auto a = gaps(20240, 10000);
  const auto b = gaps(20240, 10000);
  const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
  double mean = 0;
  for (double g : a) mean += g;
  mean /= a.size();
  o.require(*lo >= 0.200 - 1e-9 && *hi <= 0.800 + 1e-9,
            fmt("gap range [%.4f, %.4f] s", *lo, *hi));
  o.require(mean >= 0.480 && mean <= 0.520, fmt("mean gap %.4f s", mean));
  o.require(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0,
            "regeneration differs");
  const auto sched = schedule_flashes(StimulusConfig::defaults(), 60.0, kDefaultFlashDuration, 20240);
  o.require(sched == schedule_flashes(StimulusConfig::defaults(), 60.0, kDefaultFlashDuration, 20240),
            "schedule regeneration differs");
  if (o.pass)
    o.detail = fmt("10000 gaps in [%.4f, %.4f] s, mean %.4f s, identical on regeneration", *lo,
                   *hi, mean);
  return o;
}

Outcome marker_link() {
  Outcome o;
  Rng rng(777);
  std::size_t total_events = 0, total_garbage = 0;
  for (int trial = 0; trial < 1000 && o.pass; ++trial) {
    std::vector<MarkerEvent> events;
    std::string wire;
    std::size_t garbage = 0;
    std::uint64_t us = 0;
    const std::size_t n = rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.below(5) == 0) {
        // Letters only, so it can never parse as a frame; some are overlong.
        std::string g(1 + rng.below(rng.below(4) == 0 ? 150 : 20), 'x');
        for (auto& c : g) c = static_cast<char>('a' + rng.below(26));
        wire += g + "\n";
        ++garbage;
      }
      us += rng.below(3'000'000);
      const MarkerEvent e{static_cast<int>(1 + rng.below(9999)), static_cast<double>(us) / 1e6};
      events.push_back(e);
      wire += encode_marker(e);
    }
    ParserState st;
    std::vector<MarkerEvent> got;
    std::size_t diags = 0;
    for (std::size_t pos = 0; pos < wire.size();) {
      const std::size_t len = std::min<std::size_t>(wire.size() - pos, 1 + rng.below(24));
      auto r = feed_bytes(std::move(st), std::string_view(wire).substr(pos, len));
      st = std::move(r.state);
      got.insert(got.end(), r.events.begin(), r.events.end());
      diags += r.diagnostics.size();
      pos += len;
    }
    o.require(got == events, fmt("trial %d: events differ", trial));
    o.require(diags == garbage, fmt("trial %d: %zu diagnostics for %zu garbage lines", trial,
                                    diags, garbage));
    o.require(st.pending.empty(), fmt("trial %d: parser left bytes pending", trial));
    total_events += events.size();
    total_garbage += garbage;
  }
  if (o.pass)
    o.detail = fmt("1000 sequences, %zu events, %zu garbage lines resynced", total_events,
                   total_garbage);
  return o;
}

Outcome edf_round_trip() {
  Outcome o;
  Rng rng(4242);
  double worst = 0;
  std::size_t markers = 0;
  const double q = 400.0 / 65535;
  for (int trial = 0; trial < 100 && o.pass; ++trial) {
    EegRecord r;
    r.sample_rate = static_cast<double>(64u << rng.below(3));
    const std::size_t n = 8 * (1 + rng.below(500));
    const int channels = 1 + static_cast<int>(rng.below(14));
    for (int c = 0; c < channels; ++c) {
      Channel ch{"C" + std::to_string(c), "uV", {}};
      for (std::size_t i = 0; i < n; ++i) ch.samples.push_back(rng.uniform(-200, 200));
      r.channels.push_back(std::move(ch));
    }
    for (std::size_t i = rng.below(30); i < n; i += 1 + rng.below(100))
      r.markers.push_back({static_cast<int>(1 + rng.below(500)), i / r.sample_rate});
    const auto bytes = serialize_edf(r);
    o.require(bytes == serialize_edf(r), fmt("trial %d: bytes differ across runs", trial));
    const auto back = parse_edf(bytes).record;
    o.require(back.markers == r.markers, fmt("trial %d: markers differ", trial));
    o.require(back.sample_rate == r.sample_rate, fmt("trial %d: sample rate differs", trial));
    for (int c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < n; ++i)
        worst = std::max(worst, std::abs(back.channels[c].samples[i] - r.channels[c].samples[i]));
    markers += r.markers.size();
  }
  o.require(worst <= q, fmt("sample error %.3g exceeds quantum %.3g", worst, q));
  if (o.pass)
    o.detail = fmt("100 records, %zu markers exact, max sample error %.3g (quantum %.3g)",
                   markers, worst, q);
  return o;
}

double probe_gain_db(double probe, double centre) {
  const double fs = 128;
  const std::size_t n = 20 * 128, trim = 4 * 128;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * std::numbers::pi * probe * i / fs);
  const auto y = bandpass(x, fs, centre, 1.0, 4);
  double ex = 0, ey = 0;
  for (std::size_t i = trim; i < n - trim; ++i) {
    ex += x[i] * x[i];
    ey += y[i] * y[i];
  }
  return 10 * std::log10(ey / ex);
}

Outcome filter_spec() {
  Outcome o;
  double worst_centre = 0, worst_side = 1e9;
  for (double f : {7.0, 8.0, 9.0, 10.0}) {
    const auto sos = design_butterworth_bandpass(128, f - 1, f + 1, 4);
    // Forward-backward application squares the single-pass magnitude.
    auto zero_phase_db = [&](double p) { return 40 * std::log10(magnitude_response(sos, p, 128)); };
    const double centre = std::min(zero_phase_db(f), probe_gain_db(f, f));
    worst_centre = std::min(worst_centre, centre);
    for (double off : {-3.0, 3.0}) {
      const double side = std::max(zero_phase_db(f + off), probe_gain_db(f + off, f));
      worst_side = std::min(worst_side, -side);
    }
  }
  o.require(worst_centre >= -3.0, fmt("centre attenuation %.2f dB", -worst_centre));
  o.require(worst_side >= 30.0, fmt("attenuation at +-3 Hz only %.2f dB", worst_side));
  if (o.pass)
    o.detail = fmt("centre loss <= %.3f dB, +-3 Hz rejection >= %.2f dB (zero-phase)",
                   -worst_centre, worst_side);
  return o;
}

Outcome ssvep_oracle() {
  Outcome o;
  const auto clean = run_offline(quiet(), 1);
  int correct = 0;
  for (const auto& w : clean.report.windows) correct += w.decode.ssvep.class_id == *w.window.truth;
  o.require(clean.report.windows.size() == 20 && correct == 20,
            fmt("noise-free %d/%zu", correct, clean.report.windows.size()));
  OfflineOptions opts;
  opts.sessions = 50;
  const auto noisy = run_offline(AppConfig{}, 2, opts);
  const double acc = noisy.report.accuracy_fused.value_or(0);
  o.require(noisy.report.windows.size() == 200, "expected 200 windows");
  o.require(acc >= 0.95, fmt("fused accuracy %.3f at noise 4/4 uV", acc));
  if (o.pass)
    o.detail = fmt("noise-free 20/20; fused %.3f (ssvep %.3f) over 200 noisy windows", acc,
                   noisy.report.accuracy_ssvep.value_or(0));
  return o;
}

Outcome p300_oracle() {
  Outcome o;
  const auto cfg = StimulusConfig::defaults();
  SynthParams p = quiet().synth;
  FlashSchedule fl;
  fl.duration = 3;
  fl.flashes = {{2, 1.0, 0.1}};
  const auto rec = synthesize({{{0, 3, 2}}}, fl, p, cfg);
  const auto r = p300_scores(rec, {}, cfg, {});
  const double amp = r.scores.count(2) ? r.scores.at(2) : 0;
  const double lat = r.flashes.empty() ? -1 : r.flashes[0].latency;
  o.require(std::abs(amp - 5.0) <= 0.02 * 5.0, fmt("amplitude %.4f uV", amp));
  o.require(std::abs(lat - 0.300) <= 2.0 / 128 + 1e-12, fmt("latency %.4f s", lat));

  Rng rng(99);
  int confined = 0;
  for (int trial = 0; trial < 50; ++trial) {
    EegRecord e;
    e.sample_rate = 128;
    std::vector<double> f4(1280);
    for (auto& v : f4) v = rng.normal() * 4;
    e.channels = {{"O2", "uV", std::vector<double>(1280, 0.0)}, {"F4", "uV", f4}};
    e.markers = emit_marker_events(schedule_flashes(cfg, 9.0, 0.1, 1000 + trial), cfg);
    AnalysisWindow w;
    w.start = 1.0;
    w.end = 8.0;
    const auto before = p300_scores(e, w, cfg, {});
    std::vector<bool> used(1280, false);
    for (const auto& m : e.markers) {
      if (m.timestamp < w.start || m.timestamp >= w.end) continue;
      const long onset = std::lround(m.timestamp * 128);
      for (long i = onset - 13; i <= onset + 77; ++i)
        if (i >= 0 && i < 1280) used[i] = true;
    }
    for (std::size_t i = 0; i < 1280; ++i)
      if (!used[i]) e.channels[1].samples[i] = 1e6 * (rng.uniform() - 0.5);
    const auto after = p300_scores(e, w, cfg, {});
    confined += after.scores == before.scores;
  }
  o.require(confined == 50, fmt("confinement held in %d/50 trials", confined));
  if (o.pass)
    o.detail = fmt("amplitude %.4f uV, latency %.1f ms, confinement exact in 50/50", amp,
                   lat * 1e3);
  return o;
}

// Gate oracle written from the rule, independent of the decoder.
struct Gate {
  StimulusId cls;
  bool low;
};

Gate expected_gate(StimulusId s_cls, double s_margin, bool has_p, StimulusId p_cls,
                   double p_margin) {
  if (s_margin >= 0.15) return {s_cls, false};
  if (has_p && p_margin >= 0.15) return {p_cls, false};
  return {s_cls, true};
}

// argmax with ties to the lowest id (default ids ascend with frequency).
std::pair<StimulusId, double> oracle_margin(const std::vector<double>& s, bool p300) {
  std::size_t top = 0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i] > s[top]) top = i;
  double second = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != top) second = std::max(second, s[i]);
  if (s[top] == second) return {static_cast<StimulusId>(top), 0.0};
  if (second > (p300 ? 1e-12 : 0.0)) return {static_cast<StimulusId>(top), (s[top] - second) / second};
  if (p300) return {static_cast<StimulusId>(top), (s[top] - second) / 1e-12};
  return {static_cast<StimulusId>(top), std::numeric_limits<double>::infinity()};
}

Outcome fusion_grid() {
  Outcome o;
  const auto cfg = StimulusConfig::defaults();
  const DecoderParams params;
  // Levels chosen so margins land below, on and above 0.15, with zero,
  // negative and positive P300 scores.
  const double s_levels[] = {0.0, 1.0, 1.1, 1.15, 1.2, 3.0};
  const double p_levels[] = {-1.0, -0.1, 0.0, 1.0, 1.15, 2.0};
  auto maps = [](const double* levels, std::size_t k) {
    std::vector<std::vector<double>> out;
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b)
        for (std::size_t c = 0; c < k; ++c)
          for (std::size_t d = 0; d < k; ++d) out.push_back({levels[a], levels[b], levels[c], levels[d]});
    return out;
  };
  const auto smaps = maps(s_levels, 6);
  const auto pmaps = maps(p_levels, 6);
  auto to_scores = [](const std::vector<double>& v) {
    ScoreMap m;
    for (std::size_t i = 0; i < v.size(); ++i) m[static_cast<int>(i)] = v[i];
    return m;
  };
  std::vector<Decision> pdec;
  std::vector<std::pair<StimulusId, double>> pexp;
  for (const auto& v : pmaps) {
    pdec.push_back(classify_p300(to_scores(v), cfg));
    pexp.push_back(oracle_margin(v, true));
  }
  long cases = 0, mismatches = 0;
  int seen[3] = {0, 0, 0};  // ssvep gate, p300 gate, fallback
  for (const auto& sv : smaps) {
    const auto sd = classify_ssvep(to_scores(sv), cfg);
    const auto [s_cls, s_margin] = oracle_margin(sv, false);
    if (sd.class_id != s_cls || !(sd.margin == s_margin)) ++mismatches;
    for (std::size_t j = 0; j <= pmaps.size(); ++j) {
      const bool has_p = j < pmaps.size();
      const auto f = fuse(sd, has_p ? std::optional<Decision>(pdec[j]) : std::nullopt, params);
      const auto e = has_p ? expected_gate(s_cls, s_margin, true, pexp[j].first, pexp[j].second)
                           : expected_gate(s_cls, s_margin, false, 0, 0);
      ++cases;
      if (f.class_id != e.cls || f.low_confidence != e.low || f.source != DecisionSource::Fused)
        ++mismatches;
      if (has_p && (pdec[j].class_id != pexp[j].first || !(pdec[j].margin == pexp[j].second)))
        ++mismatches;
      seen[s_margin >= 0.15 ? 0 : (has_p && pexp[j].second >= 0.15 ? 1 : 2)]++;
    }
  }
  o.require(mismatches == 0, fmt("%ld mismatches in %ld cases", mismatches, cases));
  o.require(seen[0] && seen[1] && seen[2], "grid misses a gate branch");
  if (o.pass)
    o.detail = fmt("%ld cases exact (ssvep gate %d, p300 gate %d, fallback %d)", cases, seen[0],
                   seen[1], seen[2]);
  return o;
}

Outcome closed_loop() {
  Outcome o;
  const auto c = quiet();
  const std::vector<StimulusId> script = {0, 0, 3, 0, 0, 1, 0, 2, 2, 3,
                                          0, 1, 0, 0, 3, 0, 1, 2, 0, 0};
  ScriptedGaze gaze(script, c.protocol);
  const auto live = run_live(c, 31, gaze);
  int right = 0;
  double worst_latency = 0;
  RobotState oracle;
  for (std::size_t i = 0; i < live.windows.size() && i < script.size(); ++i) {
    const auto want = c.robot.command_map.commands.at(script[i]);
    right += live.windows[i].command == want;
    worst_latency = std::max(worst_latency, live.windows[i].latency.value_or(1e9));
  }
  for (std::size_t i = 0; i < script.size(); ++i)
    oracle = apply_command(oracle, c.robot.command_map.commands.at(script[i]));
  o.require(live.windows.size() == 20 && right == 20, fmt("%d/20 commands", right));
  o.require(live.robot.x == oracle.x && live.robot.y == oracle.y &&
                live.robot.heading == oracle.heading,
            fmt("pose (%d, %d, %s) vs replay (%d, %d, %s)", live.robot.x, live.robot.y,
                to_string(live.robot.heading), oracle.x, oracle.y, to_string(oracle.heading)));
  o.require(replay(live.robot.log) == live.robot, "logged replay differs");
  o.require(worst_latency < 0.100, fmt("decode latency %.1f ms", worst_latency * 1e3));
  if (o.pass)
    o.detail = fmt("20/20 commands, pose (%d, %d, %s) matches replay, max decode %.2f ms",
                   live.robot.x, live.robot.y, to_string(live.robot.heading),
                   worst_latency * 1e3);
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Outcome determinism() {
  Outcome o;
  const auto dir = std::filesystem::temp_directory_path() / "hbci_acceptance";
  std::filesystem::create_directories(dir);
  hbci_config* cfg = nullptr;
  char* r1 = nullptr;
  char* r2 = nullptr;
  o.require(hbci_config_default(&cfg) == HBCI_OK, hbci_last_error());
  const auto a = (dir / "a.edf").string(), b = (dir / "b.edf").string();
  o.require(hbci_simulate(cfg, 2024, 0, a.c_str(), 0, &r1) == HBCI_OK, hbci_last_error());
  o.require(hbci_simulate(cfg, 2024, 0, b.c_str(), 0, &r2) == HBCI_OK, hbci_last_error());
  if (o.pass) {
    const auto ea = slurp(a), eb = slurp(b);
    o.require(!ea.empty() && ea == eb, "EDF files differ");
    o.require(std::strcmp(r1, r2) == 0, "reports differ");
    o.detail = fmt("EDF %zu bytes and report %zu bytes identical", ea.size(), std::strlen(r1));
  }
  hbci_string_free(r1);
  hbci_string_free(r2);
  hbci_config_free(cfg);
  std::filesystem::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"flicker fidelity", 1, flicker},
      {"flash scheduler", 1, flash_scheduler},
      {"marker link", 5, marker_link},
      {"EDF round-trip", 10, edf_round_trip},
      {"filter spec", 5, filter_spec},
      {"SSVEP oracle", 60, ssvep_oracle},
      {"P300 oracle", 0, p300_oracle},
      {"fusion properties", 0, fusion_grid},
      {"closed loop", 0, closed_loop},
      {"determinism", 0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && s >= c.budget_s && o.pass) {
      o.pass = false;
      o.detail = fmt("took %.2f s, budget %.0f s", s, c.budget_s);
    }
    failed += !o.pass;
    std::printf("%s  %-18s %s (%.3f s)\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), s);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed,
              std::size(criteria));
  return failed ? 1 : 0;
}
