#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hbci/types.hpp"

namespace hbci {

inline constexpr int kMaxWireCode = 9999;
inline constexpr std::size_t kMaxLineLength = 64;
inline constexpr double kDefaultBaud = 115200.0;

// One marker on the wire: ASCII line "M,<code>,<timestamp_us>\n".
struct WireFrame {
  int code = 0;
  std::uint64_t timestamp_us = 0;

  friend bool operator==(const WireFrame&, const WireFrame&) = default;
};

WireFrame to_wire(const MarkerEvent& event);
MarkerEvent from_wire(const WireFrame& frame);

std::string encode_frame(const WireFrame& frame);
// Throws InvalidArgument for codes outside 1..9999 or negative timestamps.
std::string encode_marker(const MarkerEvent& event);

struct ParseDiagnostic {
  std::uint64_t offset = 0;  // stream offset of the offending line
  std::string reason;
};

// Incremental line parser state. Holds at most one partial line
// (<= kMaxLineLength bytes); an overlong line is dropped up to its newline.
struct ParserState {
  std::string pending;
  std::uint64_t offset = 0;       // bytes consumed so far
  std::uint64_t line_start = 0;   // offset of pending[0]
  bool discarding = false;
  std::uint64_t last_timestamp_us = 0;

  friend bool operator==(const ParserState&, const ParserState&) = default;
};

struct FeedResult {
  ParserState state;
  std::vector<MarkerEvent> events;
  std::vector<ParseDiagnostic> diagnostics;
};

// Frames accepted: "M,<code>,<timestamp_us>" and, for compatibility with
// firmware that only writes the code, a bare "<code>" line, which is stamped
// with the most recent framed timestamp. A trailing '\r' is ignored and
// blank lines are skipped silently.
FeedResult feed_bytes(ParserState state, std::string_view chunk);

// 8N1 framing: ten line bits per byte.
double link_budget(std::size_t byte_count, double baud);
double link_budget(const WireFrame& frame, double baud);

}  // namespace hbci
