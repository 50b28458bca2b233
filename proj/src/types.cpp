#include "hbci/types.hpp"

#include <algorithm>
#include <sstream>

namespace hbci {

const char* to_string(Position p) {
  switch (p) {
    case Position::Top: return "Top";
    case Position::Left: return "Left";
    case Position::Bottom: return "Bottom";
    case Position::Right: return "Right";
  }
  return "?";
}

Position position_from_string(const std::string& s) {
  if (s == "Top") return Position::Top;
  if (s == "Left") return Position::Left;
  if (s == "Bottom") return Position::Bottom;
  if (s == "Right") return Position::Right;
  throw Error(ErrorCode::Config, "unknown position '" + s + "'");
}

const char* to_string(DecisionSource s) {
  switch (s) {
    case DecisionSource::Ssvep: return "ssvep";
    case DecisionSource::P300: return "p300";
    case DecisionSource::Fused: return "fused";
  }
  return "?";
}

StimulusConfig StimulusConfig::defaults() {
  return StimulusConfig{{
      {0, 7.0, 0.85, Position::Top, 111},
      {1, 8.0, 0.85, Position::Left, 222},
      {2, 9.0, 0.85, Position::Bottom, 333},
      {3, 10.0, 0.85, Position::Right, 444},
  }};
}

const Stimulus& StimulusConfig::by_id(StimulusId id) const {
  for (const auto& s : stimuli) {
    if (s.id == id) return s;
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown stimulus id " + std::to_string(id));
}

const Stimulus* StimulusConfig::by_marker(int code) const {
  for (const auto& s : stimuli) {
    if (s.marker_code == code) return &s;
  }
  return nullptr;
}

double StimulusConfig::max_frequency() const {
  double f = 0.0;
  for (const auto& s : stimuli) f = std::max(f, s.frequency);
  return f;
}

const Channel* EegRecord::find(const std::string& label) const {
  for (const auto& c : channels) {
    if (c.label == label) return &c;
  }
  return nullptr;
}

std::string EegRecord::check() const {
  if (!(sample_rate > 0.0)) return "sample_rate must be positive";
  const std::size_t n = sample_count();
  for (const auto& c : channels) {
    if (c.samples.size() != n) {
      std::ostringstream os;
      os << "channel " << c.label << " has " << c.samples.size()
         << " samples, expected " << n;
      return os.str();
    }
  }
  const double d = duration();
  for (std::size_t i = 0; i < markers.size(); ++i) {
    const auto& m = markers[i];
    if (m.timestamp < 0.0 || m.timestamp > d) {
      return "marker " + std::to_string(i) + " outside [0, duration]";
    }
    if (i > 0 && m.timestamp < markers[i - 1].timestamp) {
      return "markers not sorted at index " + std::to_string(i);
    }
  }
  return {};
}

}  // namespace hbci
