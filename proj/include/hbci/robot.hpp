#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hbci/types.hpp"

namespace hbci {

enum class Command { Forward, TurnLeft, Backward, TurnRight };
enum class Heading { N, E, S, W };
enum class LowConfidencePolicy { Suppress, Execute };

const char* to_string(Command c);
const char* to_string(Heading h);
const char* to_string(LowConfidencePolicy p);
Command command_from_string(const std::string& s);
Heading heading_from_string(const std::string& s);
LowConfidencePolicy policy_from_string(const std::string& s);

struct LogEntry {
  double t = 0.0;
  Command command = Command::Forward;

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

struct RobotState {
  int x = 0;
  int y = 0;
  Heading heading = Heading::N;
  std::vector<LogEntry> log;

  friend bool operator==(const RobotState&, const RobotState&) = default;
};

struct CommandMap {
  std::map<StimulusId, Command> commands;

  // Top(7 Hz) forward, Left(8 Hz) turn left, Bottom(9 Hz) backward,
  // Right(10 Hz) turn right: the spatial layout of the board.
  static CommandMap defaults(const StimulusConfig& config);
  // Empty when the map is a bijection over the config's stimuli.
  std::string check(const StimulusConfig& config) const;
};

// N is +y, E is +x. Turns rotate in place.
RobotState apply_command(RobotState state, Command command, double t = 0.0);

// nullopt = NoOp (robot holds).
std::optional<Command> decision_to_command(const Decision& decision,
                                           const CommandMap& map,
                                           LowConfidencePolicy policy);

RobotState replay(const std::vector<LogEntry>& log,
                  RobotState initial = RobotState{});

// One JSON object per line: {"t":..., "command":"Forward"}.
std::string command_log_to_jsonl(const std::vector<LogEntry>& log);
std::vector<LogEntry> command_log_from_jsonl(const std::string& text);

}  // namespace hbci
