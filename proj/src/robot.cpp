#include "hbci/robot.hpp"

#include <set>
#include <sstream>

#include "json.hpp"

namespace hbci {

const char* to_string(Command c) {
  switch (c) {
    case Command::Forward: return "Forward";
    case Command::TurnLeft: return "TurnLeft";
    case Command::Backward: return "Backward";
    case Command::TurnRight: return "TurnRight";
  }
  return "?";
}

const char* to_string(Heading h) {
  switch (h) {
    case Heading::N: return "N";
    case Heading::E: return "E";
    case Heading::S: return "S";
    case Heading::W: return "W";
  }
  return "?";
}

const char* to_string(LowConfidencePolicy p) {
  return p == LowConfidencePolicy::Suppress ? "Suppress" : "Execute";
}

Command command_from_string(const std::string& s) {
  for (Command c : {Command::Forward, Command::TurnLeft, Command::Backward,
                    Command::TurnRight}) {
    if (s == to_string(c)) return c;
  }
  throw Error(ErrorCode::Config, "unknown command '" + s + "'");
}

Heading heading_from_string(const std::string& s) {
  for (Heading h : {Heading::N, Heading::E, Heading::S, Heading::W}) {
    if (s == to_string(h)) return h;
  }
  throw Error(ErrorCode::Config, "unknown heading '" + s + "'");
}

LowConfidencePolicy policy_from_string(const std::string& s) {
  if (s == "Suppress") return LowConfidencePolicy::Suppress;
  if (s == "Execute") return LowConfidencePolicy::Execute;
  throw Error(ErrorCode::Config, "unknown low-confidence policy '" + s + "'");
}

CommandMap CommandMap::defaults(const StimulusConfig& config) {
  CommandMap map;
  for (const auto& s : config.stimuli) {
    switch (s.position) {
      case Position::Top: map.commands[s.id] = Command::Forward; break;
      case Position::Left: map.commands[s.id] = Command::TurnLeft; break;
      case Position::Bottom: map.commands[s.id] = Command::Backward; break;
      case Position::Right: map.commands[s.id] = Command::TurnRight; break;
    }
  }
  return map;
}

std::string CommandMap::check(const StimulusConfig& config) const {
  if (commands.size() != config.stimuli.size()) {
    return "command map must cover every stimulus exactly once";
  }
  std::set<Command> used;
  for (const auto& s : config.stimuli) {
    auto it = commands.find(s.id);
    if (it == commands.end()) {
      return "command map lacks stimulus " + std::to_string(s.id);
    }
    if (!used.insert(it->second).second) {
      return std::string("command ") + to_string(it->second) + " mapped twice";
    }
  }
  return {};
}

RobotState apply_command(RobotState state, Command command, double t) {
  static constexpr int dx[] = {0, 1, 0, -1};  // N E S W
  static constexpr int dy[] = {1, 0, -1, 0};
  const int h = static_cast<int>(state.heading);
  switch (command) {
    case Command::Forward:
      state.x += dx[h];
      state.y += dy[h];
      break;
    case Command::Backward:
      state.x -= dx[h];
      state.y -= dy[h];
      break;
    case Command::TurnLeft:
      state.heading = static_cast<Heading>((h + 3) % 4);
      break;
    case Command::TurnRight:
      state.heading = static_cast<Heading>((h + 1) % 4);
      break;
  }
  state.log.push_back({t, command});
  return state;
}

std::optional<Command> decision_to_command(const Decision& decision,
                                           const CommandMap& map,
                                           LowConfidencePolicy policy) {
  if (decision.low_confidence && policy == LowConfidencePolicy::Suppress) {
    return std::nullopt;
  }
  auto it = map.commands.find(decision.class_id);
  if (it == map.commands.end()) return std::nullopt;
  return it->second;
}

RobotState replay(const std::vector<LogEntry>& log, RobotState initial) {
  RobotState s = std::move(initial);
  for (const auto& e : log) s = apply_command(std::move(s), e.command, e.t);
  return s;
}

std::string command_log_to_jsonl(const std::vector<LogEntry>& log) {
  std::string out;
  for (const auto& e : log) {
    nlohmann::ordered_json j;
    j["t"] = e.t;
    j["command"] = to_string(e.command);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<LogEntry> command_log_from_jsonl(const std::string& text) {
  std::vector<LogEntry> log;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      log.push_back({j.at("t").get<double>(),
                     command_from_string(j.at("command").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument,
                  "command log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

}  // namespace hbci
