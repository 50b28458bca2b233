#include "hbci/marker_link.hpp"

#include <charconv>
#include <cmath>
#include <optional>

namespace hbci {

WireFrame to_wire(const MarkerEvent& event) {
  if (event.code < 1 || event.code > kMaxWireCode) {
    throw Error(ErrorCode::InvalidArgument,
                "marker code " + std::to_string(event.code) +
                    " outside 1..9999");
  }
  if (!(event.timestamp >= 0.0) || event.timestamp > 1.8e13) {
    throw Error(ErrorCode::InvalidArgument,
                "marker timestamp not representable in microseconds");
  }
  return WireFrame{event.code,
                   static_cast<std::uint64_t>(std::llround(event.timestamp * 1e6))};
}

MarkerEvent from_wire(const WireFrame& frame) {
  return MarkerEvent{frame.code, static_cast<double>(frame.timestamp_us) / 1e6};
}

std::string encode_frame(const WireFrame& frame) {
  return "M," + std::to_string(frame.code) + "," +
         std::to_string(frame.timestamp_us) + "\n";
}

std::string encode_marker(const MarkerEvent& event) {
  return encode_frame(to_wire(event));
}

namespace {

template <typename T>
std::optional<T> parse_digits(std::string_view s) {
  if (s.empty()) return std::nullopt;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::optional<int> parse_code(std::string_view s) {
  auto v = parse_digits<int>(s);
  if (!v || *v < 1 || *v > kMaxWireCode) return std::nullopt;
  return v;
}

// Returns an error reason, or empty on success.
std::string parse_line(std::string_view line, ParserState& state,
                       std::vector<MarkerEvent>& events) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.empty()) return {};
  if (line.size() >= 2 && line[0] == 'M' && line[1] == ',') {
    std::string_view rest = line.substr(2);
    const auto comma = rest.find(',');
    if (comma == std::string_view::npos) return "missing timestamp field";
    auto code = parse_code(rest.substr(0, comma));
    if (!code) return "invalid marker code";
    auto ts = parse_digits<std::uint64_t>(rest.substr(comma + 1));
    if (!ts) return "invalid timestamp";
    state.last_timestamp_us = *ts;
    events.push_back(from_wire(WireFrame{*code, *ts}));
    return {};
  }
  if (auto code = parse_code(line)) {
    events.push_back(from_wire(WireFrame{*code, state.last_timestamp_us}));
    return {};
  }
  return "unrecognised frame";
}

}  // namespace

FeedResult feed_bytes(ParserState state, std::string_view chunk) {
  FeedResult out;
  for (char c : chunk) {
    const std::uint64_t pos = state.offset++;
    if (c == '\n') {
      if (state.discarding) {
        state.discarding = false;
      } else {
        std::string reason = parse_line(state.pending, state, out.events);
        if (!reason.empty()) {
          out.diagnostics.push_back({state.line_start, std::move(reason)});
        }
      }
      state.pending.clear();
      state.line_start = pos + 1;
      continue;
    }
    if (state.discarding) continue;
    if (state.pending.size() >= kMaxLineLength) {
      out.diagnostics.push_back({state.line_start, "line exceeds 64 bytes"});
      state.pending.clear();
      state.discarding = true;
      continue;
    }
    state.pending.push_back(c);
  }
  out.state = std::move(state);
  return out;
}

double link_budget(std::size_t byte_count, double baud) {
  if (!(baud > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "baud must be positive");
  }
  return 10.0 * static_cast<double>(byte_count) / baud;
}

double link_budget(const WireFrame& frame, double baud) {
  return link_budget(encode_frame(frame).size(), baud);
}

}  // namespace hbci
