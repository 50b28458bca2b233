#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hbci/types.hpp"

namespace hbci {

struct DecoderParams {
  double band_halfwidth = 1.0;  // 2 Hz band
  std::vector<int> harmonics{1, 2, 3};
  int filter_order = 4;
  double edge_trim = 0.5;  // seconds dropped from each end before variance
  double p300_window = 0.600;
  double p300_baseline = 0.100;
  double p300_min_latency = 0.0;
  double fusion_margin_ssvep = 0.15;
  double fusion_margin_p300 = 0.15;
};

struct AnalysisWindow {
  double start = 0.0;
  double end = 3.0;
  std::string channel_ssvep = "O2";
  std::string channel_p300 = "F4";
};

using ScoreMap = std::map<StimulusId, double>;

// Sum over harmonics k of the population variance of the zero-phase
// band-passed window around k*f, after trimming edge_trim from each end.
ScoreMap ssvep_scores(const EegRecord& record, const AnalysisWindow& window,
                      const StimulusConfig& config,
                      const DecoderParams& params);

// argmax, ties to the lowest frequency; margin = (top - second) / second.
Decision classify_ssvep(const ScoreMap& scores, const StimulusConfig& config);

struct FlashScore {
  StimulusId stimulus_id = 0;
  double onset = 0.0;
  double latency = 0.0;    // seconds from onset to the peak sample
  double amplitude = 0.0;  // baseline-corrected peak
};

struct P300Result {
  ScoreMap scores;  // mean flash amplitude per stimulus with usable flashes
  std::vector<FlashScore> flashes;
  int skipped_incomplete = 0;  // post-window or baseline outside the record
  int skipped_unknown = 0;     // marker code matches no stimulus
};

// Per marker in [start, end): baseline = mean over [onset - baseline, onset),
// peak = max over (onset + min_latency, onset + window] of the corrected
// signal. Onsets are taken at sample index round(onset * fs). Throws
// NoMarkers when no stimulus has a usable flash in the window.
P300Result p300_scores(const EegRecord& record, const AnalysisWindow& window,
                       const StimulusConfig& config,
                       const DecoderParams& params);

// As classify_ssvep; negative scores allowed, margin denominator floored at
// 1e-12.
Decision classify_p300(const ScoreMap& scores, const StimulusConfig& config);

// SSVEP primary, P300 corrective.
Decision fuse(const Decision& ssvep, const std::optional<Decision>& p300,
              const DecoderParams& params);

struct WindowDecode {
  ScoreMap ssvep_scores;
  Decision ssvep;
  std::optional<P300Result> p300_detail;
  std::optional<Decision> p300;
  std::string p300_status = "ok";  // reason when p300 is absent
  Decision fused;
};

// Full per-window pipeline. use_p300 = false skips P300 entirely
// (records without a marker channel) and the fused decision is the SSVEP one.
WindowDecode decode_window(const EegRecord& record,
                           const AnalysisWindow& window,
                           const StimulusConfig& config,
                           const DecoderParams& params, bool use_p300 = true);

}  // namespace hbci
