#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hbci/rng.hpp"
#include "hbci/stimulus.hpp"
#include "hbci/types.hpp"

namespace hbci {

struct SynthParams {
  double sample_rate = 128.0;
  std::array<double, 3> ssvep_amplitudes{4.0, 2.0, 1.0};  // uV at f, 2f, 3f
  double p300_amplitude = 5.0;
  double p300_latency = 0.300;
  double p300_width_sigma = 0.060;
  double nontarget_p300_fraction = 0.1;
  double noise_white_sigma = 4.0;
  double noise_pink_sigma = 4.0;
  double flash_duration = kDefaultFlashDuration;
  std::uint64_t seed = 1;
  // Render the 14-channel EPOC layout (extra channels carry noise only).
  bool full_montage = false;
};

struct AttentionSegment {
  double start = 0.0;
  double end = 0.0;
  std::optional<StimulusId> attended;  // nullopt = Rest

  friend bool operator==(const AttentionSegment&,
                         const AttentionSegment&) = default;
};

struct AttentionSchedule {
  std::vector<AttentionSegment> segments;

  double duration() const {
    return segments.empty() ? 0.0 : segments.back().end;
  }
  // Attended stimulus at t (Rest outside all segments).
  std::optional<StimulusId> attended_at(double t) const;
};

// Per session, each stimulus of frequency_order gets a focus segment then a
// rest segment (a zero rest duration adds no segment).
AttentionSchedule protocol_to_schedule(const SessionProtocol& protocol,
                                       const StimulusConfig& config);

// White Gaussian (sigma_w) plus Voss-McCartney 1/f noise (sigma_p).
class NoiseGenerator {
 public:
  NoiseGenerator(double white_sigma, double pink_sigma, std::uint64_t seed);
  double next();

 private:
  static constexpr int kPinkRows = 16;
  double white_sigma_;
  double pink_sigma_;
  Rng white_rng_;
  Rng pink_rng_;
  std::array<double, kPinkRows> rows_{};
  double row_sum_ = 0.0;
  std::uint64_t counter_ = 0;
};

std::vector<double> noise(std::size_t length, const SynthParams& params,
                          std::uint64_t seed);

// Labels of the 14-channel EPOC+ montage, in headset order.
const std::vector<std::string>& epoc_montage();

// Block renderer shared by the offline synthesizer and the live loop. Each
// render() call covers the next n samples under one attention state; flashes
// must be handed in with the block that contains their onset.
class SynthStream {
 public:
  SynthStream(const SynthParams& params, const StimulusConfig& config);

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t cursor() const { return cursor_; }

  // Appends n samples per channel to out (one vector per label).
  void render(std::size_t n, std::optional<StimulusId> attended,
              std::span<const Flash> flashes,
              std::vector<std::vector<double>>& out);

 private:
  struct ActiveBump {
    double onset;
    double amplitude;
  };

  SynthParams params_;
  StimulusConfig config_;
  std::vector<std::string> labels_;
  std::size_t o2_index_ = 0;
  std::size_t f4_index_ = 0;
  std::vector<NoiseGenerator> noise_;
  Rng phase_rng_;
  std::size_t cursor_ = 0;
  std::optional<StimulusId> current_;
  bool segment_open_ = false;
  std::size_t segment_start_ = 0;
  std::array<double, 3> phases_{};
  std::vector<ActiveBump> bumps_;
};

// Throws InvalidArgument when the schedule and flash durations differ.
EegRecord synthesize(const AttentionSchedule& schedule,
                     const FlashSchedule& flashes, const SynthParams& params,
                     const StimulusConfig& config);

}  // namespace hbci
