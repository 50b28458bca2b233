#include "hbci/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

namespace hbci {

namespace {
// Template support beyond the latency, in widths.
constexpr double kBumpSupportSigmas = 8.0;

// Sub-seed streams.
constexpr std::uint64_t kPhaseStream = 11;
constexpr std::uint64_t kNoiseStreamBase = 100;
}  // namespace

std::optional<StimulusId> AttentionSchedule::attended_at(double t) const {
  for (const auto& s : segments) {
    if (t >= s.start && t < s.end) return s.attended;
  }
  return std::nullopt;
}

AttentionSchedule protocol_to_schedule(const SessionProtocol& protocol,
                                       const StimulusConfig& config) {
  AttentionSchedule schedule;
  double t = 0.0;
  for (int session = 0; session < protocol.sessions; ++session) {
    for (StimulusId id : protocol.frequency_order) {
      config.by_id(id);  // throws on unknown ids
      schedule.segments.push_back({t, t + protocol.focus_duration, id});
      t += protocol.focus_duration;
      if (protocol.rest_duration > 0.0) {
        schedule.segments.push_back(
            {t, t + protocol.rest_duration, std::nullopt});
        t += protocol.rest_duration;
      }
    }
  }
  return schedule;
}

NoiseGenerator::NoiseGenerator(double white_sigma, double pink_sigma,
                               std::uint64_t seed)
    : white_sigma_(white_sigma),
      pink_sigma_(pink_sigma),
      white_rng_(derive_seed(seed, 1)),
      pink_rng_(derive_seed(seed, 2)) {}

double NoiseGenerator::next() {
  double value = 0.0;
  if (white_sigma_ > 0.0) value += white_sigma_ * white_rng_.normal();
  if (pink_sigma_ > 0.0) {
    // Voss-McCartney: row k is redrawn every 2^k samples, so the sum of
    // kPinkRows unit-variance rows has variance kPinkRows at every sample.
    if (counter_ == 0) {
      for (auto& r : rows_) {
        r = pink_rng_.normal();
        row_sum_ += r;
      }
    } else {
      const int k = std::min(std::countr_zero(counter_), kPinkRows - 1);
      row_sum_ -= rows_[k];
      rows_[k] = pink_rng_.normal();
      row_sum_ += rows_[k];
    }
    value += pink_sigma_ * row_sum_ / std::sqrt(static_cast<double>(kPinkRows));
  }
  ++counter_;
  return value;
}

std::vector<double> noise(std::size_t length, const SynthParams& params,
                          std::uint64_t seed) {
  NoiseGenerator gen(params.noise_white_sigma, params.noise_pink_sigma, seed);
  std::vector<double> out(length);
  for (auto& v : out) v = gen.next();
  return out;
}

const std::vector<std::string>& epoc_montage() {
  static const std::vector<std::string> labels{
      "AF3", "F7", "F3", "FC5", "T7", "P7", "O1",
      "O2",  "P8", "T8", "FC6", "F4", "F8", "AF4"};
  return labels;
}

SynthStream::SynthStream(const SynthParams& params,
                         const StimulusConfig& config)
    : params_(params),
      config_(config),
      phase_rng_(derive_seed(params.seed, kPhaseStream)) {
  if (params.full_montage) {
    labels_ = epoc_montage();
  } else {
    labels_ = {"O2", "F4"};
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == "O2") o2_index_ = i;
    if (labels_[i] == "F4") f4_index_ = i;
    noise_.emplace_back(params.noise_white_sigma, params.noise_pink_sigma,
                        derive_seed(params.seed, kNoiseStreamBase + i));
  }
}

void SynthStream::render(std::size_t n, std::optional<StimulusId> attended,
                         std::span<const Flash> flashes,
                         std::vector<std::vector<double>>& out) {
  out.resize(labels_.size());
  const double fs = params_.sample_rate;

  if (!segment_open_ || attended != current_) {
    current_ = attended;
    segment_open_ = true;
    segment_start_ = cursor_;
    if (attended) {
      for (auto& p : phases_) p = 2.0 * std::numbers::pi * phase_rng_.uniform();
    }
  }

  for (const auto& f : flashes) {
    const double amp =
        (attended && *attended == f.stimulus_id)
            ? params_.p300_amplitude
            : params_.nontarget_p300_fraction * params_.p300_amplitude;
    bumps_.push_back({f.onset, amp});
  }

  const double freq = attended ? config_.by_id(*attended).frequency : 0.0;
  const double sigma = params_.p300_width_sigma;
  const double support = params_.p300_latency + kBumpSupportSigmas * sigma;

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t index = cursor_ + i;
    const double t = static_cast<double>(index) / fs;
    for (std::size_t c = 0; c < labels_.size(); ++c) {
      double v = noise_[c].next();
      if (c == o2_index_ && attended) {
        const double ts = static_cast<double>(index - segment_start_) / fs;
        for (int k = 0; k < 3; ++k) {
          v += params_.ssvep_amplitudes[k] *
               std::sin(2.0 * std::numbers::pi * (k + 1) * freq * ts +
                        phases_[k]);
        }
      }
      if (c == f4_index_) {
        // Causal template: zero before the flash onset.
        for (const auto& b : bumps_) {
          const double dt = t - b.onset;
          if (dt < 0.0 || dt > support) continue;
          const double z = (dt - params_.p300_latency) / sigma;
          v += b.amplitude * std::exp(-0.5 * z * z);
        }
      }
      out[c].push_back(v);
    }
  }
  cursor_ += n;

  const double now = static_cast<double>(cursor_) / fs;
  std::erase_if(bumps_, [&](const ActiveBump& b) {
    return now - b.onset > support + 1.0 / fs;
  });
}

EegRecord synthesize(const AttentionSchedule& schedule,
                     const FlashSchedule& flashes, const SynthParams& params,
                     const StimulusConfig& config) {
  if (std::abs(schedule.duration() - flashes.duration) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument,
                "attention schedule and flash schedule durations differ");
  }
  const double fs = params.sample_rate;
  SynthStream stream(params, config);
  std::vector<std::vector<double>> data;
  std::size_t next_flash = 0;

  for (const auto& seg : schedule.segments) {
    const auto end = static_cast<std::size_t>(std::llround(seg.end * fs));
    if (end <= stream.cursor()) continue;
    const std::size_t begin_flash = next_flash;
    while (next_flash < flashes.flashes.size() &&
           flashes.flashes[next_flash].onset * fs < static_cast<double>(end)) {
      ++next_flash;
    }
    std::span<const Flash> block(flashes.flashes.data() + begin_flash,
                                 next_flash - begin_flash);
    stream.render(end - stream.cursor(), seg.attended, block, data);
  }

  EegRecord record;
  record.sample_rate = fs;
  for (std::size_t c = 0; c < stream.labels().size(); ++c) {
    record.channels.push_back(
        Channel{stream.labels()[c], "uV",
                c < data.size() ? std::move(data[c]) : std::vector<double>{}});
  }
  record.markers = emit_marker_events(flashes, config);
  return record;
}

}  // namespace hbci
