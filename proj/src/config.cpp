#include "hbci/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

namespace hbci {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

ValidationReport validate_config(const StimulusConfig& config,
                                 const SessionProtocol& protocol,
                                 double sample_rate) {
  ValidationReport r;
  auto& v = r.violations;
  if (config.stimuli.size() != 4) {
    v.push_back("expected exactly 4 stimuli, got " +
                std::to_string(config.stimuli.size()));
  }
  std::set<int> ids, codes;
  std::set<double> freqs;
  std::set<Position> positions;
  for (const auto& s : config.stimuli) {
    if (s.id < 0 || s.id > 3) {
      v.push_back("stimulus id " + std::to_string(s.id) + " outside 0..3");
    }
    if (!ids.insert(s.id).second) v.push_back("duplicate stimulus id " + std::to_string(s.id));
    if (!(s.frequency > 0.0)) {
      v.push_back("stimulus " + std::to_string(s.id) + " frequency must be positive");
    } else if (!freqs.insert(s.frequency).second) {
      v.push_back("duplicate frequency " + num(s.frequency) + " Hz");
    }
    if (!(s.duty_cycle > 0.0 && s.duty_cycle < 1.0)) {
      v.push_back("stimulus " + std::to_string(s.id) + " duty cycle outside (0, 1)");
    }
    if (s.marker_code < 1) {
      v.push_back("stimulus " + std::to_string(s.id) + " marker code must be positive");
    } else if (!codes.insert(s.marker_code).second) {
      v.push_back("duplicate marker code " + std::to_string(s.marker_code));
    }
    if (!positions.insert(s.position).second) {
      v.push_back(std::string("duplicate position ") + to_string(s.position));
    }
  }
  if (!(sample_rate > 0.0)) {
    v.push_back("sample rate must be positive");
  } else if (!config.stimuli.empty()) {
    const double fmax = config.max_frequency();
    const double nyquist = sample_rate / 2.0;
    if (!(3.0 * fmax < nyquist)) {
      v.push_back("3×" + num(fmax) + " Hz = " + num(3.0 * fmax) + " Hz ≥ " +
                  num(nyquist) + " Hz Nyquist");
    }
  }

  if (!(protocol.focus_duration > 0.0)) v.push_back("focus_duration must be > 0");
  if (!(protocol.rest_duration >= 0.0)) v.push_back("rest_duration must be >= 0");
  if (protocol.sessions < 1) v.push_back("sessions must be a positive integer");
  {
    std::vector<int> order = protocol.frequency_order;
    std::vector<int> all(ids.begin(), ids.end());
    std::sort(order.begin(), order.end());
    if (order != all || order.size() != config.stimuli.size()) {
      v.push_back("frequency_order is not a permutation of the stimulus ids");
    }
  }
  return r;
}

ValidationReport validate_app_config(const AppConfig& c) {
  ValidationReport r = validate_config(c.stimuli, c.protocol, c.synth.sample_rate);
  auto& v = r.violations;
  const auto& s = c.synth;
  const auto& d = c.decoder;
  const double fmax = c.stimuli.max_frequency();

  for (double a : s.ssvep_amplitudes) {
    if (!(a >= 0.0)) v.push_back("ssvep_amplitudes must be >= 0");
  }
  if (!(s.p300_amplitude >= 0.0)) v.push_back("p300_amplitude must be >= 0");
  if (!(s.sample_rate > 6.0 * fmax)) v.push_back("synth sample_rate must exceed 6 x max frequency");
  if (!(s.p300_width_sigma > 0.0)) v.push_back("p300_width_sigma must be > 0");
  if (!(s.p300_latency >= 0.0) ||
      !(s.p300_latency + 3.0 * s.p300_width_sigma < 0.600)) {
    v.push_back("p300_latency + 3 sigma must lie below 0.600 s");
  }
  if (!(s.nontarget_p300_fraction >= 0.0 && s.nontarget_p300_fraction <= 1.0)) {
    v.push_back("nontarget_p300_fraction outside [0, 1]");
  }
  if (!(s.noise_white_sigma >= 0.0) || !(s.noise_pink_sigma >= 0.0)) {
    v.push_back("noise sigmas must be >= 0");
  }
  if (!(s.flash_duration > 0.0 && s.flash_duration < kMinFlashGap)) {
    v.push_back("flash_duration must lie in (0, 0.200) s");
  }
  if (!(c.edf.physical_min < c.edf.physical_max)) v.push_back("EDF physical range is empty");
  if (!(c.edf.marker_physical_max >= 1.0 && c.edf.marker_physical_max <= 32767.0)) {
    v.push_back("marker_physical_max must lie in [1, 32767]");
  } else {
    for (const auto& st : c.stimuli.stimuli) {
      if (st.marker_code > c.edf.marker_physical_max) {
        v.push_back("marker code " + std::to_string(st.marker_code) +
                    " exceeds marker_physical_max");
      }
    }
  }

  if (!(d.band_halfwidth > 0.0)) v.push_back("band_halfwidth must be > 0");
  if (d.filter_order < 2 || d.filter_order % 2 != 0) v.push_back("filter_order must be a positive even integer");
  if (d.harmonics.empty()) v.push_back("harmonics must not be empty");
  for (int h : d.harmonics) {
    if (h < 1) v.push_back("harmonic multipliers must be >= 1");
  }
  if (!d.harmonics.empty() && d.band_halfwidth > 0.0 && !c.stimuli.stimuli.empty()) {
    const int hmax = *std::max_element(d.harmonics.begin(), d.harmonics.end());
    const int hmin = *std::min_element(d.harmonics.begin(), d.harmonics.end());
    double fmin = fmax;
    for (const auto& st : c.stimuli.stimuli) fmin = std::min(fmin, st.frequency);
    if (!(hmax * fmax + d.band_halfwidth < s.sample_rate / 2.0)) {
      v.push_back("highest harmonic band exceeds Nyquist");
    }
    if (!(hmin * fmin - d.band_halfwidth > 0.0)) {
      v.push_back("lowest harmonic band reaches 0 Hz");
    }
  }
  if (!(d.edge_trim >= 0.0)) v.push_back("edge_trim must be >= 0");
  if (!(2.0 * d.edge_trim < c.protocol.focus_duration)) {
    v.push_back("edge_trim leaves no samples in a focus window");
  }
  if (!(d.p300_min_latency >= 0.0 && d.p300_window > d.p300_min_latency)) {
    v.push_back("need p300_window > p300_min_latency >= 0");
  }
  if (!(d.p300_baseline >= 0.0)) v.push_back("p300_baseline must be >= 0");
  if (!(d.fusion_margin_ssvep >= 0.0) || !(d.fusion_margin_p300 >= 0.0)) {
    v.push_back("fusion margins must be >= 0");
  }

  if (auto m = c.robot.command_map.check(c.stimuli); !m.empty()) v.push_back(m);

  const auto& g = c.gateway;
  if (g.port < 0 || g.port > 65535) v.push_back("gateway port outside 0..65535");
  if (g.subscriber_buffer < 1) v.push_back("subscriber_buffer must be >= 1");
  if (g.block_samples < 1) v.push_back("block_samples must be >= 1");
  if (g.eeg_frame_samples < 1 || g.eeg_frame_samples > 32) {
    v.push_back("eeg_frame_samples must lie in 1..32");
  }
  if (g.max_frame_bytes < 1024 || g.max_frame_bytes > 64 * 1024) {
    v.push_back("max_frame_bytes must lie in 1024..65536");
  }
  return r;
}

namespace {

// Object reader that rejects keys it was not asked about.
class Strict {
 public:
  Strict(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::Config, path_ + "." + key + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail("unknown key '" + it.key() + "'");
    }
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::Config, path_ + ": " + why);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

AppConfig config_from_json(const json& j) {
  AppConfig c;
  Strict root(j, "config");

  if (const json* st = root.child("stimuli")) {
    if (!st->is_array()) throw Error(ErrorCode::Config, "config.stimuli must be an array");
    c.stimuli.stimuli.clear();
    for (std::size_t i = 0; i < st->size(); ++i) {
      Strict e((*st)[i], "config.stimuli[" + std::to_string(i) + "]");
      Stimulus s;
      s.id = static_cast<int>(i);
      std::string position = to_string(static_cast<Position>(i % 4));
      e.get("id", s.id);
      e.get("frequency", s.frequency);
      e.get("duty_cycle", s.duty_cycle);
      e.get("position", position);
      e.get("marker_code", s.marker_code);
      e.finish();
      s.position = position_from_string(position);
      c.stimuli.stimuli.push_back(s);
    }
    c.robot.command_map = CommandMap::defaults(c.stimuli);
  }

  if (const json* p = root.child("protocol")) {
    Strict e(*p, "config.protocol");
    e.get("focus_duration", c.protocol.focus_duration);
    e.get("rest_duration", c.protocol.rest_duration);
    e.get("frequency_order", c.protocol.frequency_order);
    e.get("sessions", c.protocol.sessions);
    e.finish();
  }

  if (const json* s = root.child("synth")) {
    Strict e(*s, "config.synth");
    auto& sp = c.synth;
    std::vector<double> amps(sp.ssvep_amplitudes.begin(), sp.ssvep_amplitudes.end());
    e.get("sample_rate", sp.sample_rate);
    e.get("ssvep_amplitudes", amps);
    e.get("p300_amplitude", sp.p300_amplitude);
    e.get("p300_latency", sp.p300_latency);
    e.get("p300_width_sigma", sp.p300_width_sigma);
    e.get("nontarget_p300_fraction", sp.nontarget_p300_fraction);
    e.get("noise_white_sigma", sp.noise_white_sigma);
    e.get("noise_pink_sigma", sp.noise_pink_sigma);
    e.get("flash_duration", sp.flash_duration);
    e.get("seed", sp.seed);
    e.get("full_montage", sp.full_montage);
    e.get("physical_min", c.edf.physical_min);
    e.get("physical_max", c.edf.physical_max);
    e.get("marker_physical_max", c.edf.marker_physical_max);
    e.finish();
    if (amps.size() != 3) {
      throw Error(ErrorCode::Config, "config.synth.ssvep_amplitudes needs 3 values");
    }
    std::copy(amps.begin(), amps.end(), sp.ssvep_amplitudes.begin());
  }

  if (const json* d = root.child("decoder")) {
    Strict e(*d, "config.decoder");
    auto& dp = c.decoder;
    e.get("band_halfwidth", dp.band_halfwidth);
    e.get("harmonics", dp.harmonics);
    e.get("filter_order", dp.filter_order);
    e.get("edge_trim", dp.edge_trim);
    e.get("p300_window", dp.p300_window);
    e.get("p300_baseline", dp.p300_baseline);
    e.get("p300_min_latency", dp.p300_min_latency);
    e.get("fusion_margin_ssvep", dp.fusion_margin_ssvep);
    e.get("fusion_margin_p300", dp.fusion_margin_p300);
    e.finish();
  }

  if (const json* r = root.child("robot")) {
    Strict e(*r, "config.robot");
    std::string policy = to_string(c.robot.low_confidence_policy);
    e.get("low_confidence_policy", policy);
    if (const json* m = e.child("command_map")) {
      if (!m->is_object()) throw Error(ErrorCode::Config, "config.robot.command_map must be an object");
      c.robot.command_map.commands.clear();
      for (auto it = m->begin(); it != m->end(); ++it) {
        int id;
        try {
          std::size_t used = 0;
          id = std::stoi(it.key(), &used);
          if (used != it.key().size()) throw std::invalid_argument("id");
        } catch (const std::exception&) {
          throw Error(ErrorCode::Config, "config.robot.command_map key '" + it.key() + "' is not a stimulus id");
        }
        if (!it->is_string()) throw Error(ErrorCode::Config, "config.robot.command_map values must be strings");
        c.robot.command_map.commands[id] = command_from_string(it->get<std::string>());
      }
    }
    e.finish();
    c.robot.low_confidence_policy = policy_from_string(policy);
  }

  if (const json* g = root.child("gateway")) {
    Strict e(*g, "config.gateway");
    auto& gw = c.gateway;
    e.get("port", gw.port);
    e.get("subscriber_buffer", gw.subscriber_buffer);
    e.get("max_frame_bytes", gw.max_frame_bytes);
    e.get("block_samples", gw.block_samples);
    e.get("eeg_frame_samples", gw.eeg_frame_samples);
    e.finish();
  }

  root.finish();
  return c;
}

json config_to_json(const AppConfig& c) {
  json j = json::object();
  json stimuli = json::array();
  for (const auto& s : c.stimuli.stimuli) {
    stimuli.push_back({{"id", s.id},
                       {"frequency", s.frequency},
                       {"duty_cycle", s.duty_cycle},
                       {"position", to_string(s.position)},
                       {"marker_code", s.marker_code}});
  }
  j["stimuli"] = stimuli;
  j["protocol"] = {{"focus_duration", c.protocol.focus_duration},
                   {"rest_duration", c.protocol.rest_duration},
                   {"frequency_order", c.protocol.frequency_order},
                   {"sessions", c.protocol.sessions}};
  const auto& s = c.synth;
  j["synth"] = {{"sample_rate", s.sample_rate},
                {"ssvep_amplitudes", s.ssvep_amplitudes},
                {"p300_amplitude", s.p300_amplitude},
                {"p300_latency", s.p300_latency},
                {"p300_width_sigma", s.p300_width_sigma},
                {"nontarget_p300_fraction", s.nontarget_p300_fraction},
                {"noise_white_sigma", s.noise_white_sigma},
                {"noise_pink_sigma", s.noise_pink_sigma},
                {"flash_duration", s.flash_duration},
                {"seed", s.seed},
                {"full_montage", s.full_montage},
                {"physical_min", c.edf.physical_min},
                {"physical_max", c.edf.physical_max},
                {"marker_physical_max", c.edf.marker_physical_max}};
  const auto& d = c.decoder;
  j["decoder"] = {{"band_halfwidth", d.band_halfwidth},
                  {"harmonics", d.harmonics},
                  {"filter_order", d.filter_order},
                  {"edge_trim", d.edge_trim},
                  {"p300_window", d.p300_window},
                  {"p300_baseline", d.p300_baseline},
                  {"p300_min_latency", d.p300_min_latency},
                  {"fusion_margin_ssvep", d.fusion_margin_ssvep},
                  {"fusion_margin_p300", d.fusion_margin_p300}};
  json map = json::object();
  for (const auto& [id, cmd] : c.robot.command_map.commands) {
    map[std::to_string(id)] = to_string(cmd);
  }
  j["robot"] = {{"command_map", map},
                {"low_confidence_policy", to_string(c.robot.low_confidence_policy)}};
  const auto& g = c.gateway;
  j["gateway"] = {{"port", g.port},
                  {"subscriber_buffer", g.subscriber_buffer},
                  {"max_frame_bytes", g.max_frame_bytes},
                  {"block_samples", g.block_samples},
                  {"eeg_frame_samples", g.eeg_frame_samples}};
  return j;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Config, "config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace hbci
