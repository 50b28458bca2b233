#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "hbci/decoder.hpp"
#include "hbci/edf.hpp"
#include "hbci/robot.hpp"
#include "hbci/synth.hpp"
#include "hbci/types.hpp"

namespace hbci {

struct RobotConfig {
  CommandMap command_map;
  LowConfidencePolicy low_confidence_policy = LowConfidencePolicy::Suppress;
};

struct GatewayConfig {
  int port = 8350;
  std::size_t subscriber_buffer = 1024;  // frames queued before disconnect
  std::size_t max_frame_bytes = 64 * 1024;
  std::size_t block_samples = 8;        // synthesis block in live mode
  std::size_t eeg_frame_samples = 32;   // decimated samples per EegBlock
};

// Everything the JSON configuration file carries.
struct AppConfig {
  StimulusConfig stimuli = StimulusConfig::defaults();
  SessionProtocol protocol;
  SynthParams synth;
  EdfWriteOptions edf;  // stored under "synth" in JSON
  DecoderParams decoder;
  RobotConfig robot{CommandMap::defaults(StimulusConfig::defaults())};
  GatewayConfig gateway;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Invariants of the stimulus set and protocol, plus the third-harmonic
// Nyquist check 3 * f_max < fs / 2.
ValidationReport validate_config(const StimulusConfig& config,
                                 const SessionProtocol& protocol,
                                 double sample_rate);

// validate_config plus synth/decoder/robot/gateway parameter checks.
ValidationReport validate_app_config(const AppConfig& config);

// Missing keys keep their defaults; unknown keys at any level throw Config.
AppConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const AppConfig& config);
AppConfig load_config(const std::filesystem::path& path);

}  // namespace hbci
