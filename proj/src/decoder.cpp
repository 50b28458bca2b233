#include "hbci/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hbci/filter.hpp"

namespace hbci {

namespace {

constexpr double kP300MarginFloor = 1e-12;

struct SampleRange {
  std::size_t begin;
  std::size_t end;
};

std::string describe(const AnalysisWindow& w) {
  std::ostringstream os;
  os << "[" << w.start << ", " << w.end << ") s";
  return os.str();
}

SampleRange window_samples(const EegRecord& record, const AnalysisWindow& w) {
  const double fs = record.sample_rate;
  const long long b = std::llround(w.start * fs);
  const long long e = std::llround(w.end * fs);
  if (e <= b) {
    throw Error(ErrorCode::EmptyWindow, "empty analysis window " + describe(w));
  }
  if (b < 0 || e > static_cast<long long>(record.sample_count())) {
    throw Error(ErrorCode::InvalidArgument,
                "analysis window " + describe(w) + " outside the record");
  }
  return {static_cast<std::size_t>(b), static_cast<std::size_t>(e)};
}

const Channel& require_channel(const EegRecord& record, const std::string& label) {
  const Channel* c = record.find(label);
  if (!c) throw Error(ErrorCode::MissingChannel, "channel " + label + " not in record");
  return *c;
}

double population_variance(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double acc = 0.0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(x.size());
}

// Stimuli sorted by frequency so that the first maximum wins ties.
std::vector<const Stimulus*> by_frequency(const StimulusConfig& config) {
  std::vector<const Stimulus*> order;
  for (const auto& s : config.stimuli) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(),
                   [](const Stimulus* a, const Stimulus* b) {
                     return a->frequency < b->frequency;
                   });
  return order;
}

Decision classify(const ScoreMap& scores, const StimulusConfig& config,
                  DecisionSource source, double floor) {
  if (scores.size() < 2) {
    throw Error(ErrorCode::InvalidArgument,
                "classification needs at least two candidate scores");
  }
  const Stimulus* top = nullptr;
  double top_score = 0.0;
  for (const Stimulus* s : by_frequency(config)) {
    auto it = scores.find(s->id);
    if (it == scores.end()) continue;
    if (!top || it->second > top_score) {
      top = s;
      top_score = it->second;
    }
  }
  if (!top) throw Error(ErrorCode::InvalidArgument, "scores name no known stimulus");
  double second = -std::numeric_limits<double>::infinity();
  for (const auto& [id, score] : scores) {
    if (id != top->id) second = std::max(second, score);
  }

  Decision d;
  d.class_id = top->id;
  d.scores = scores;
  d.source = source;
  if (top_score == second) {
    d.margin = 0.0;
    d.low_confidence = true;
  } else if (second > floor) {
    d.margin = (top_score - second) / second;
  } else if (source == DecisionSource::P300) {
    d.margin = (top_score - second) / floor;
  } else {
    d.margin = kUnboundedMargin;
  }
  return d;
}

}  // namespace

ScoreMap ssvep_scores(const EegRecord& record, const AnalysisWindow& window,
                      const StimulusConfig& config,
                      const DecoderParams& params) {
  const Channel& ch = require_channel(record, window.channel_ssvep);
  const SampleRange r = window_samples(record, window);
  const double fs = record.sample_rate;
  const auto trim = static_cast<std::size_t>(std::llround(params.edge_trim * fs));
  const std::size_t n = r.end - r.begin;
  if (n <= 2 * trim) {
    throw Error(ErrorCode::EmptyWindow,
                "window " + describe(window) + " shorter than the edge trim");
  }
  std::span<const double> x(ch.samples.data() + r.begin, n);

  ScoreMap scores;
  for (const auto& s : config.stimuli) {
    double energy = 0.0;
    for (int k : params.harmonics) {
      const auto y = bandpass(x, fs, k * s.frequency, params.band_halfwidth,
                              params.filter_order);
      energy += population_variance(
          std::span<const double>(y.data() + trim, n - 2 * trim));
    }
    scores[s.id] = energy;
  }
  return scores;
}

Decision classify_ssvep(const ScoreMap& scores, const StimulusConfig& config) {
  return classify(scores, config, DecisionSource::Ssvep, 0.0);
}

P300Result p300_scores(const EegRecord& record, const AnalysisWindow& window,
                       const StimulusConfig& config,
                       const DecoderParams& params) {
  const Channel& ch = require_channel(record, window.channel_p300);
  window_samples(record, window);
  const double fs = record.sample_rate;
  const long long n = static_cast<long long>(ch.samples.size());
  const long long baseline = std::llround(params.p300_baseline * fs);
  const long long first = std::llround(params.p300_min_latency * fs) + 1;
  const long long last = std::llround(params.p300_window * fs);

  P300Result result;
  std::map<StimulusId, std::pair<double, int>> sums;
  for (const auto& m : record.markers) {
    if (m.timestamp < window.start || m.timestamp >= window.end) continue;
    const Stimulus* s = config.by_marker(m.code);
    if (!s) {
      ++result.skipped_unknown;
      continue;
    }
    const long long onset = std::llround(m.timestamp * fs);
    if (onset - baseline < 0 || onset + last >= n) {
      ++result.skipped_incomplete;
      continue;
    }
    double base = 0.0;
    if (baseline > 0) {
      for (long long i = onset - baseline; i < onset; ++i) base += ch.samples[i];
      base /= static_cast<double>(baseline);
    }
    long long peak_index = onset + first;
    double peak = ch.samples[peak_index];
    for (long long i = onset + first + 1; i <= onset + last; ++i) {
      if (ch.samples[i] > peak) {
        peak = ch.samples[i];
        peak_index = i;
      }
    }
    const double amplitude = peak - base;
    result.flashes.push_back(
        {s->id, m.timestamp, static_cast<double>(peak_index - onset) / fs, amplitude});
    auto& acc = sums[s->id];
    acc.first += amplitude;
    acc.second += 1;
  }
  for (const auto& [id, acc] : sums) result.scores[id] = acc.first / acc.second;
  if (result.scores.empty()) {
    throw Error(ErrorCode::NoMarkers,
                "no usable markers in window " + describe(window));
  }
  return result;
}

Decision classify_p300(const ScoreMap& scores, const StimulusConfig& config) {
  return classify(scores, config, DecisionSource::P300, kP300MarginFloor);
}

Decision fuse(const Decision& ssvep, const std::optional<Decision>& p300,
              const DecoderParams& params) {
  Decision out;
  out.scores = ssvep.scores;
  if (p300) out.p300_scores = p300->scores;
  out.source = DecisionSource::Fused;
  if (ssvep.margin >= params.fusion_margin_ssvep) {
    out.class_id = ssvep.class_id;
    out.margin = ssvep.margin;
    out.low_confidence = false;
  } else if (p300 && p300->margin >= params.fusion_margin_p300) {
    out.class_id = p300->class_id;
    out.margin = p300->margin;
    out.low_confidence = false;
  } else {
    out.class_id = ssvep.class_id;
    out.margin = ssvep.margin;
    out.low_confidence = true;
  }
  return out;
}

WindowDecode decode_window(const EegRecord& record,
                           const AnalysisWindow& window,
                           const StimulusConfig& config,
                           const DecoderParams& params, bool use_p300) {
  WindowDecode out;
  out.ssvep_scores = ssvep_scores(record, window, config, params);
  out.ssvep = classify_ssvep(out.ssvep_scores, config);
  if (!use_p300) {
    // No marker channel at all: the SSVEP decision stands on its own.
    out.p300_status = "unavailable: no marker channel";
    out.fused = out.ssvep;
    return out;
  }
  {
    try {
      P300Result detail = p300_scores(record, window, config, params);
      if (detail.scores.size() >= 2) {
        out.p300 = classify_p300(detail.scores, config);
      } else {
        out.p300_status = "unavailable: fewer than two stimuli flashed in window";
      }
      out.p300_detail = std::move(detail);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoMarkers) throw;
      out.p300_status = std::string("unavailable: ") + e.what();
    }
  }
  out.fused = fuse(out.ssvep, out.p300, params);
  return out;
}

}  // namespace hbci
