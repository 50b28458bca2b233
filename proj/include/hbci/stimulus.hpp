#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hbci/rng.hpp"
#include "hbci/types.hpp"

namespace hbci {

// ON iff the fractional flicker phase t*f (mod 1) is below the duty cycle.
// Phase origin at t = 0 is ON.
bool flicker_on(double frequency, double duty_cycle, double t);

struct FlickerTimeline {
  StimulusId stimulus_id = 0;
  double frequency = 0.0;
  double duty_cycle = 0.0;
  double resolution = 1e-3;
  std::vector<bool> states;  // state at the centre of each tick

  double on_fraction() const;
  // Number of ON->OFF edges.
  std::size_t falling_edges() const;
};

// Throws InvalidArgument when resolution > 1/(10 f) or duration <= 0.
FlickerTimeline build_flicker_timeline(const Stimulus& stimulus,
                                       double duration,
                                       double resolution = 1e-3);

inline constexpr double kMinFlashGap = 0.200;
inline constexpr double kMaxFlashGap = 0.800;
inline constexpr double kDefaultFlashDuration = 0.100;

struct Flash {
  StimulusId stimulus_id = 0;
  double onset = 0.0;
  double duration = kDefaultFlashDuration;

  friend bool operator==(const Flash&, const Flash&) = default;
};

struct FlashSchedule {
  std::vector<Flash> flashes;
  double duration = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const FlashSchedule&, const FlashSchedule&) = default;
};

// Incremental form of the red-LED scheduler: gaps are Uniform(0.2, 0.8) s,
// starting from t = 0, and the target is uniform over the stimuli with no
// immediate repeat. schedule_flashes() is a prefix of this sequence, which is
// what lets the live loop and the offline runner agree flash for flash.
class FlashScheduler {
 public:
  FlashScheduler(const StimulusConfig& config, double flash_duration,
                 std::uint64_t seed);

  Flash next();

 private:
  std::vector<StimulusId> ids_;
  double flash_duration_;
  Rng rng_;
  double clock_ = 0.0;
  std::optional<std::size_t> last_index_;
};

FlashSchedule schedule_flashes(const StimulusConfig& config, double duration,
                               double flash_duration, std::uint64_t seed);

// One event per flash: code of the flashed stimulus at the flash onset.
std::vector<MarkerEvent> emit_marker_events(const FlashSchedule& schedule,
                                            const StimulusConfig& config);

}  // namespace hbci
