#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbci {

// Error categories surfaced through the C API as status codes.
enum class ErrorCode {
  InvalidArgument = 1,
  Config,
  Io,
  EdfTruncated,
  EdfMalformedHeader,
  EdfInconsistentRecords,
  EdfDegenerateScaling,
  Unrepresentable,
  MissingChannel,
  NoMarkers,
  EmptyWindow,
  Gateway,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

using StimulusId = int;

enum class Position { Top, Left, Bottom, Right };

const char* to_string(Position p);
Position position_from_string(const std::string& s);

struct Stimulus {
  StimulusId id = 0;
  double frequency = 0.0;  // Hz
  double duty_cycle = 0.85;
  Position position = Position::Top;
  int marker_code = 0;
};

struct StimulusConfig {
  std::vector<Stimulus> stimuli;

  // 7/8/9/10 Hz at 85% duty, Top/Left/Bottom/Right, codes 111..444.
  static StimulusConfig defaults();

  const Stimulus& by_id(StimulusId id) const;
  const Stimulus* by_marker(int code) const;
  double max_frequency() const;
};

struct SessionProtocol {
  double focus_duration = 3.0;
  double rest_duration = 5.0;
  std::vector<StimulusId> frequency_order{0, 1, 2, 3};
  int sessions = 5;

  double session_duration() const {
    return static_cast<double>(frequency_order.size()) *
           (focus_duration + rest_duration);
  }
};

struct MarkerEvent {
  int code = 0;
  double timestamp = 0.0;  // seconds from record start

  friend bool operator==(const MarkerEvent&, const MarkerEvent&) = default;
};

struct Channel {
  std::string label;
  std::string physical_unit = "uV";
  std::vector<double> samples;
};

struct EegRecord {
  double sample_rate = 128.0;
  std::vector<Channel> channels;
  std::vector<MarkerEvent> markers;
  // Recording start stamped into EDF headers; never taken from the wall clock.
  std::string start_date = "01.01.26";
  std::string start_time = "00.00.00";

  std::size_t sample_count() const {
    return channels.empty() ? 0 : channels.front().samples.size();
  }
  double duration() const {
    return static_cast<double>(sample_count()) / sample_rate;
  }
  const Channel* find(const std::string& label) const;

  // Empty string when the record is consistent, else the first violation.
  std::string check() const;
};

enum class DecisionSource { Ssvep, P300, Fused };

const char* to_string(DecisionSource s);

inline constexpr double kUnboundedMargin =
    std::numeric_limits<double>::infinity();

struct Decision {
  StimulusId class_id = 0;
  std::map<StimulusId, double> scores;
  // Fused decisions keep the P300 score map alongside the SSVEP one.
  std::map<StimulusId, double> p300_scores;
  double margin = 0.0;
  DecisionSource source = DecisionSource::Ssvep;
  bool low_confidence = false;
};

}  // namespace hbci
