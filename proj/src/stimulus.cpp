#include "hbci/stimulus.hpp"

#include <algorithm>
#include <cmath>

namespace hbci {

namespace {
// Phases within this distance of an integer count as the period boundary, so
// t = k/f lands exactly on the ON edge despite rounding in t*f.
constexpr double kPhaseSnap = 1e-9;
}  // namespace

bool flicker_on(double frequency, double duty_cycle, double t) {
  const double cycles = t * frequency;
  const double whole = std::round(cycles);
  double phase;
  if (std::abs(cycles - whole) < kPhaseSnap) {
    phase = 0.0;
  } else {
    phase = cycles - std::floor(cycles);
  }
  return phase < duty_cycle;
}

double FlickerTimeline::on_fraction() const {
  if (states.empty()) return 0.0;
  const auto on = std::count(states.begin(), states.end(), true);
  return static_cast<double>(on) / static_cast<double>(states.size());
}

std::size_t FlickerTimeline::falling_edges() const {
  std::size_t edges = 0;
  for (std::size_t i = 1; i < states.size(); ++i) {
    if (states[i - 1] && !states[i]) ++edges;
  }
  return edges;
}

FlickerTimeline build_flicker_timeline(const Stimulus& stimulus,
                                       double duration, double resolution) {
  if (!(duration > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "timeline duration must be > 0");
  }
  if (!(resolution > 0.0) ||
      resolution > 1.0 / (10.0 * stimulus.frequency) + 1e-15) {
    throw Error(ErrorCode::InvalidArgument,
                "timeline resolution too coarse for " +
                    std::to_string(stimulus.frequency) + " Hz");
  }
  FlickerTimeline tl;
  tl.stimulus_id = stimulus.id;
  tl.frequency = stimulus.frequency;
  tl.duty_cycle = stimulus.duty_cycle;
  tl.resolution = resolution;
  const auto ticks = static_cast<std::size_t>(std::llround(duration / resolution));
  tl.states.resize(ticks);
  for (std::size_t i = 0; i < ticks; ++i) {
    // Each tick shows the state at its centre.
    tl.states[i] = flicker_on(stimulus.frequency, stimulus.duty_cycle,
                              (static_cast<double>(i) + 0.5) * resolution);
  }
  return tl;
}

FlashScheduler::FlashScheduler(const StimulusConfig& config,
                               double flash_duration, std::uint64_t seed)
    : flash_duration_(flash_duration), rng_(seed) {
  if (!(flash_duration > 0.0 && flash_duration < kMinFlashGap)) {
    throw Error(ErrorCode::InvalidArgument,
                "flash duration must lie in (0, 0.200) s");
  }
  if (config.stimuli.size() < 2) {
    throw Error(ErrorCode::InvalidArgument,
                "flash scheduler needs at least two stimuli");
  }
  for (const auto& s : config.stimuli) ids_.push_back(s.id);
}

Flash FlashScheduler::next() {
  clock_ += rng_.uniform(kMinFlashGap, kMaxFlashGap);
  std::size_t index;
  if (!last_index_) {
    index = rng_.below(ids_.size());
  } else {
    // Uniform over the other stimuli: skip past the previous target.
    index = rng_.below(ids_.size() - 1);
    if (index >= *last_index_) ++index;
  }
  last_index_ = index;
  return Flash{ids_[index], clock_, flash_duration_};
}

FlashSchedule schedule_flashes(const StimulusConfig& config, double duration,
                               double flash_duration, std::uint64_t seed) {
  if (duration < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "negative schedule duration");
  }
  FlashSchedule schedule;
  schedule.duration = duration;
  schedule.seed = seed;
  FlashScheduler scheduler(config, flash_duration, seed);
  for (;;) {
    Flash f = scheduler.next();
    if (f.onset >= duration) break;
    schedule.flashes.push_back(f);
  }
  return schedule;
}

std::vector<MarkerEvent> emit_marker_events(const FlashSchedule& schedule,
                                            const StimulusConfig& config) {
  std::vector<MarkerEvent> events;
  events.reserve(schedule.flashes.size());
  for (const auto& f : schedule.flashes) {
    events.push_back({config.by_id(f.stimulus_id).marker_code, f.onset});
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const MarkerEvent& a, const MarkerEvent& b) {
                     return a.timestamp < b.timestamp;
                   });
  return events;
}

}  // namespace hbci
