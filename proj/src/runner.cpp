#include "hbci/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "hbci/edf.hpp"

namespace hbci {

using nlohmann::json;

namespace {

constexpr double kTimeEps = 1e-9;

void require_valid(const AppConfig& config) {
  const auto report = validate_app_config(config);
  if (!report.ok()) {
    std::string msg = "invalid configuration:";
    for (const auto& v : report.violations) msg += " " + v + ";";
    throw Error(ErrorCode::Config, msg);
  }
}

json id_or_null(const std::optional<StimulusId>& id) {
  return id ? json(*id) : json(nullptr);
}

json margin_json(double m) {
  return std::isfinite(m) ? json(m) : json(nullptr);
}

json scores_json(const ScoreMap& scores) {
  json j = json::object();
  for (const auto& [id, v] : scores) j[std::to_string(id)] = v;
  return j;
}

AnalysisWindow analysis_window(const WindowSpec& w) {
  AnalysisWindow a;
  a.start = w.start;
  a.end = w.end;
  return a;
}

double elapsed_seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace

std::uint64_t flash_seed(std::uint64_t seed) { return derive_seed(seed, 1); }
std::uint64_t synth_seed(std::uint64_t seed) { return derive_seed(seed, 2); }

json decision_to_json(const Decision& d, const StimulusConfig& config) {
  json j;
  j["class"] = d.class_id;
  j["frequency"] = config.by_id(d.class_id).frequency;
  j["margin"] = margin_json(d.margin);
  j["low_confidence"] = d.low_confidence;
  j["source"] = to_string(d.source);
  j["scores"] = scores_json(d.scores);
  if (d.source == DecisionSource::Fused) j["p300_scores"] = scores_json(d.p300_scores);
  return j;
}

json window_to_json(const WindowResult& w, const StimulusConfig& config) {
  json j;
  j["start"] = w.window.start;
  j["end"] = w.window.end;
  j["truth"] = id_or_null(w.window.truth);
  j["ssvep"] = decision_to_json(w.decode.ssvep, config);
  j["p300"] = w.decode.p300 ? decision_to_json(*w.decode.p300, config) : json(nullptr);
  j["p300_status"] = w.decode.p300_status;
  if (w.decode.p300_detail) {
    json flashes = json::array();
    for (const auto& f : w.decode.p300_detail->flashes) {
      flashes.push_back({{"stimulus", f.stimulus_id},
                         {"onset", f.onset},
                         {"latency", f.latency},
                         {"amplitude", f.amplitude}});
    }
    j["p300_flashes"] = flashes;
    j["p300_skipped_incomplete"] = w.decode.p300_detail->skipped_incomplete;
    j["p300_skipped_unknown"] = w.decode.p300_detail->skipped_unknown;
  }
  j["fused"] = decision_to_json(w.decode.fused, config);
  if (w.command) j["command"] = to_string(*w.command);
  if (w.latency) j["latency_s"] = *w.latency;
  return j;
}

void score_report(EvaluationReport& report) {
  int total = 0, ssvep = 0, p300 = 0, fused = 0;
  double latency_sum = 0.0;
  int latency_count = 0;
  for (const auto& w : report.windows) {
    if (w.latency) {
      latency_sum += *w.latency;
      ++latency_count;
    }
    if (!w.window.truth) continue;
    ++total;
    const StimulusId truth = *w.window.truth;
    if (w.decode.ssvep.class_id == truth) ++ssvep;
    if (w.decode.p300 && w.decode.p300->class_id == truth) ++p300;
    if (w.decode.fused.class_id == truth) ++fused;
  }
  if (total > 0) {
    report.accuracy_ssvep = static_cast<double>(ssvep) / total;
    report.accuracy_p300 = static_cast<double>(p300) / total;
    report.accuracy_fused = static_cast<double>(fused) / total;
  } else {
    report.accuracy_ssvep.reset();
    report.accuracy_p300.reset();
    report.accuracy_fused.reset();
    report.warnings.push_back(
        "no window has a ground-truth class; accuracy not computed");
  }
  if (latency_count > 0) report.mean_decode_latency = latency_sum / latency_count;
}

json report_to_json(const EvaluationReport& report, const StimulusConfig& config) {
  json j;
  j["mode"] = report.mode;
  j["seed"] = report.seed;
  j["metadata"] = report.metadata;
  json windows = json::array();
  for (const auto& w : report.windows) windows.push_back(window_to_json(w, config));
  j["windows"] = windows;
  j["warnings"] = report.warnings;

  if (report.accuracy_fused) {
    j["accuracy"] = {{"ssvep", *report.accuracy_ssvep},
                     {"p300", *report.accuracy_p300},
                     {"fused", *report.accuracy_fused}};
    std::vector<StimulusId> ids;
    for (const auto& s : config.stimuli) ids.push_back(s.id);
    auto column = [&ids](const std::optional<StimulusId>& id) {
      if (!id) return ids.size();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == *id) return i;
      }
      return ids.size();
    };
    using Matrix = std::vector<std::vector<int>>;
    Matrix ssvep(ids.size(), std::vector<int>(ids.size() + 1, 0));
    Matrix p300 = ssvep, fused = ssvep;
    for (const auto& w : report.windows) {
      if (!w.window.truth) continue;
      const std::size_t row = column(w.window.truth);
      if (row >= ids.size()) continue;
      ++ssvep[row][column(w.decode.ssvep.class_id)];
      ++fused[row][column(w.decode.fused.class_id)];
      ++p300[row][column(w.decode.p300 ? std::optional<StimulusId>(w.decode.p300->class_id)
                                       : std::nullopt)];
    }
    j["confusion"] = {{"labels", ids}, {"ssvep", ssvep}, {"p300", p300}, {"fused", fused}};
  }
  if (report.mean_decode_latency) j["mean_decode_latency_s"] = *report.mean_decode_latency;
  return j;
}

std::vector<WindowSpec> focus_windows(const AttentionSchedule& schedule) {
  std::vector<WindowSpec> out;
  for (const auto& s : schedule.segments) {
    if (s.attended) out.push_back({s.start, s.end, s.attended});
  }
  return out;
}

std::vector<WindowSpec> protocol_windows(const SessionProtocol& protocol,
                                         const StimulusConfig& config,
                                         double duration) {
  std::vector<WindowSpec> out;
  SessionProtocol p = protocol;
  // Enough sessions to cover the record.
  const double session = p.session_duration();
  p.sessions = session > 0.0 ? static_cast<int>(std::ceil(duration / session)) + 1 : 1;
  for (const auto& w : focus_windows(protocol_to_schedule(p, config))) {
    if (w.end <= duration + kTimeEps) out.push_back({w.start, w.end, std::nullopt});
  }
  return out;
}

OfflineResult run_offline(const AppConfig& config_in, std::uint64_t seed,
                          const OfflineOptions& options) {
  AppConfig config = config_in;
  if (options.sessions) config.protocol.sessions = *options.sessions;
  require_valid(config);

  OfflineResult out;
  out.schedule = protocol_to_schedule(config.protocol, config.stimuli);
  out.flashes = schedule_flashes(config.stimuli, out.schedule.duration(),
                                 config.synth.flash_duration, flash_seed(seed));
  SynthParams params = config.synth;
  params.seed = synth_seed(seed);
  out.record = synthesize(out.schedule, out.flashes, params, config.stimuli);

  std::vector<WindowSpec> windows;
  if (options.windows) {
    for (auto w : *options.windows) {
      w.truth.reset();
      for (const auto& s : out.schedule.segments) {
        if (s.attended && w.start >= s.start - kTimeEps && w.end <= s.end + kTimeEps) {
          w.truth = s.attended;
        }
      }
      windows.push_back(w);
    }
  } else {
    windows = focus_windows(out.schedule);
  }

  EvaluationReport& report = out.report;
  report.mode = "offline";
  report.seed = seed;
  report.metadata = {{"sessions", config.protocol.sessions},
                     {"duration_s", out.record.duration()},
                     {"flashes", out.flashes.flashes.size()},
                     {"config", config_to_json(config)}};
  for (const auto& w : windows) {
    WindowResult r;
    r.window = w;
    const auto t0 = std::chrono::steady_clock::now();
    r.decode = decode_window(out.record, analysis_window(w), config.stimuli, config.decoder);
    if (options.measure_latency) r.latency = elapsed_seconds(t0);
    report.windows.push_back(std::move(r));
  }
  score_report(report);
  return out;
}

EvaluationReport decode_record(const EegRecord& record, const AppConfig& config,
                               const std::vector<WindowSpec>& windows,
                               bool has_markers) {
  if (auto problem = record.check(); !problem.empty()) {
    throw Error(ErrorCode::InvalidArgument, "invalid record: " + problem);
  }
  const auto v = validate_config(config.stimuli, config.protocol, record.sample_rate);
  if (!v.ok()) throw Error(ErrorCode::Config, "record incompatible with config: " + v.violations.front());
  AnalysisWindow probe;
  if (!record.find(probe.channel_ssvep)) {
    throw Error(ErrorCode::MissingChannel, "record has no " + probe.channel_ssvep + " channel");
  }
  if (has_markers && !record.find(probe.channel_p300)) {
    throw Error(ErrorCode::MissingChannel, "record has no " + probe.channel_p300 + " channel");
  }

  EvaluationReport report;
  report.mode = "decode";
  report.metadata = {{"duration_s", record.duration()},
                     {"sample_rate", record.sample_rate},
                     {"markers", record.markers.size()},
                     {"config", config_to_json(config)}};
  if (!has_markers) {
    report.warnings.push_back("MARKER channel missing: P300 unavailable, SSVEP-only decisions");
  }
  for (const auto& w : windows) {
    WindowResult r;
    r.window = w;
    r.decode = decode_window(record, analysis_window(w), config.stimuli, config.decoder, has_markers);
    report.windows.push_back(std::move(r));
  }
  score_report(report);
  return report;
}

EvaluationReport decode_file(const std::filesystem::path& path,
                             const AppConfig& config,
                             const std::optional<std::vector<WindowSpec>>& windows) {
  const EdfContents contents = read_edf_contents(path);
  const auto plan = windows ? *windows
                            : protocol_windows(config.protocol, config.stimuli,
                                               contents.record.duration());
  EvaluationReport report =
      decode_record(contents.record, config, plan, contents.has_marker_channel);
  report.metadata["source"] = path.filename().string();
  return report;
}

std::string evaluate_reports(
    const std::vector<std::pair<std::string, json>>& reports) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-32s %-8s %7s %7s %7s %7s\n", "report",
                "mode", "windows", "ssvep", "p300", "fused");
  os << line;
  auto cell = [](const json& acc, const char* key) -> std::string {
    if (acc.is_null() || !acc.contains(key)) return "n/a";
    char b[32];
    std::snprintf(b, sizeof(b), "%.3f", acc.at(key).get<double>());
    return b;
  };
  double sum_s = 0, sum_p = 0, sum_f = 0;
  long scored = 0, total_windows = 0;
  for (const auto& [name, r] : reports) {
    if (!r.is_object() || !r.contains("windows") || !r["windows"].is_array()) {
      throw Error(ErrorCode::InvalidArgument, name + " is not an evaluation report");
    }
    const auto n = static_cast<long>(r["windows"].size());
    long truth = 0;
    for (const auto& w : r["windows"]) {
      if (w.contains("truth") && !w["truth"].is_null()) ++truth;
    }
    const json acc = r.contains("accuracy") ? r["accuracy"] : json(nullptr);
    std::snprintf(line, sizeof(line), "%-32s %-8s %7ld %7s %7s %7s\n",
                  name.substr(0, 32).c_str(), r.value("mode", "?").c_str(), n,
                  cell(acc, "ssvep").c_str(), cell(acc, "p300").c_str(),
                  cell(acc, "fused").c_str());
    os << line;
    total_windows += n;
    if (!acc.is_null()) {
      sum_s += acc["ssvep"].get<double>() * truth;
      sum_p += acc["p300"].get<double>() * truth;
      sum_f += acc["fused"].get<double>() * truth;
      scored += truth;
    }
  }
  json total = json(nullptr);
  if (scored > 0) {
    total = {{"ssvep", sum_s / scored}, {"p300", sum_p / scored}, {"fused", sum_f / scored}};
  }
  std::snprintf(line, sizeof(line), "%-32s %-8s %7ld %7s %7s %7s\n", "TOTAL", "",
                total_windows, cell(total, "ssvep").c_str(),
                cell(total, "p300").c_str(), cell(total, "fused").c_str());
  os << line;
  return os.str();
}

// --- live ------------------------------------------------------------------

ScriptedGaze::ScriptedGaze(std::vector<StimulusId> script,
                           const SessionProtocol& protocol)
    : script_(std::move(script)),
      focus_(protocol.focus_duration),
      cycle_(protocol.focus_duration + protocol.rest_duration) {}

std::optional<StimulusId> ScriptedGaze::attended(double t) {
  const auto k = static_cast<std::size_t>(std::floor(t / cycle_ + kTimeEps));
  const double within = t - static_cast<double>(k) * cycle_;
  if (k < script_.size() && within < focus_ - kTimeEps) return script_[k];
  return std::nullopt;
}

bool ScriptedGaze::finished(std::size_t windows_done) const {
  return windows_done >= script_.size();
}

LiveGaze::LiveGaze(const StimulusConfig& config) : config_(config) {}

void LiveGaze::request(std::optional<StimulusId> attend, Ack ack) {
  if (attend) config_.by_id(*attend);
  std::lock_guard lock(mutex_);
  pending_ = attend;
  if (ack) pending_acks_.push_back(std::move(ack));
}

void LiveGaze::set_connected(bool connected) {
  std::lock_guard lock(mutex_);
  connected_ = connected;
}

std::optional<StimulusId> LiveGaze::current() const {
  std::lock_guard lock(mutex_);
  return current_;
}

std::optional<StimulusId> LiveGaze::attended(double) {
  std::lock_guard lock(mutex_);
  if (pending_) {
    current_ = *pending_;
    pending_.reset();
    for (auto& a : pending_acks_) applied_acks_.push_back(std::move(a));
    pending_acks_.clear();
  }
  return current_;
}

bool LiveGaze::connected() const {
  std::lock_guard lock(mutex_);
  return connected_;
}

void LiveGaze::took_effect(std::uint64_t seq) {
  std::vector<Ack> acks;
  {
    std::lock_guard lock(mutex_);
    acks.swap(applied_acks_);
  }
  for (auto& a : acks) a(seq);
}

LiveResult run_live(const AppConfig& config, std::uint64_t seed,
                    GazeSource& gaze, LiveSink* sink, const LiveOptions& options) {
  require_valid(config);
  const double fs = config.synth.sample_rate;
  const std::size_t block = config.gateway.block_samples;
  const double focus = config.protocol.focus_duration;
  const double cycle = focus + config.protocol.rest_duration;
  const auto post_window =
      static_cast<std::size_t>(std::llround(config.decoder.p300_window * fs)) + 1;

  SynthParams params = config.synth;
  params.seed = synth_seed(seed);
  SynthStream stream(params, config.stimuli);
  FlashScheduler scheduler(config.stimuli, config.synth.flash_duration, flash_seed(seed));
  Flash next_flash = scheduler.next();

  LiveResult out;
  EegRecord& record = out.record;
  record.sample_rate = fs;
  for (const auto& label : stream.labels()) record.channels.push_back({label, "uV", {}});

  // Attention rendered per block; used to derive per-window truth.
  struct BlockInfo {
    std::size_t begin;
    std::optional<StimulusId> attended;
    bool connected;
  };
  std::vector<BlockInfo> blocks;

  std::vector<std::vector<double>> data;
  std::size_t window_index = 0;
  long last_clock = -1;
  const auto wall_start = std::chrono::steady_clock::now();

  for (;;) {
    if (options.stop && options.stop->load()) break;
    if (options.max_windows && out.windows.size() >= *options.max_windows) break;
    if (gaze.finished(out.windows.size())) break;

    const std::size_t cursor = stream.cursor();
    const double t = static_cast<double>(cursor) / fs;
    const bool connected = gaze.connected();
    const std::optional<StimulusId> attended =
        connected ? gaze.attended(t) : std::nullopt;
    blocks.push_back({cursor, attended, connected});

    if (const long sec = static_cast<long>(std::floor(t)); sec != last_clock) {
      last_clock = sec;
      if (sink) sink->on_clock(t);
    }
    std::uint64_t seq = blocks.size();
    if (sink) {
      std::vector<bool> on;
      for (const auto& s : config.stimuli.stimuli) on.push_back(flicker_on(s.frequency, s.duty_cycle, t));
      seq = sink->on_stimulus_state(t, attended, on);
    }
    gaze.took_effect(seq);

    std::vector<Flash> flashes;
    while (next_flash.onset * fs < static_cast<double>(cursor + block)) {
      flashes.push_back(next_flash);
      next_flash = scheduler.next();
    }
    for (auto& ch : data) ch.clear();
    stream.render(block, attended, flashes, data);
    for (std::size_t c = 0; c < data.size(); ++c) {
      record.channels[c].samples.insert(record.channels[c].samples.end(),
                                        data[c].begin(), data[c].end());
    }
    for (const auto& f : flashes) {
      const MarkerEvent m{config.stimuli.by_id(f.stimulus_id).marker_code, f.onset};
      record.markers.push_back(m);
      if (sink) sink->on_marker(m, f.stimulus_id);
    }
    if (sink) sink->on_eeg_block(t, stream.labels(), data);

    // Decode every window whose samples (plus P300 post-window) are complete.
    for (;;) {
      const double ws = static_cast<double>(window_index) * cycle;
      const double we = ws + focus;
      const auto end_index = static_cast<std::size_t>(std::llround(we * fs));
      if (stream.cursor() < end_index + post_window) break;

      const auto begin_index = static_cast<std::size_t>(std::llround(ws * fs));
      std::optional<StimulusId> truth;
      bool first = true, constant = true, all_connected = true;
      for (const auto& b : blocks) {
        if (b.begin + block <= begin_index || b.begin >= end_index) continue;
        all_connected = all_connected && b.connected;
        if (first) {
          truth = b.attended;
          first = false;
        } else if (b.attended != truth) {
          constant = false;
        }
      }
      ++window_index;
      if (!all_connected) {
        out.report.warnings.push_back("gaze source disconnected during window at " +
                                      std::to_string(ws) + " s; no decision issued");
        continue;
      }

      const auto t0 = std::chrono::steady_clock::now();
      WindowResult r;
      r.window = {ws, we, constant ? truth : std::nullopt};
      AnalysisWindow aw;
      aw.start = ws;
      aw.end = we;
      r.decode = decode_window(record, aw, config.stimuli, config.decoder);
      r.command = decision_to_command(r.decode.fused, config.robot.command_map,
                                      config.robot.low_confidence_policy);
      if (r.command) out.robot = apply_command(std::move(out.robot), *r.command, we);
      r.latency = elapsed_seconds(t0);

      const double now = static_cast<double>(stream.cursor()) / fs;
      if (sink) {
        sink->on_decision(now, r);
        sink->on_robot(now, out.robot);
      }
      out.windows.push_back(std::move(r));
      const auto next_begin = static_cast<std::size_t>(
          std::llround(static_cast<double>(window_index) * cycle * fs));
      std::erase_if(blocks, [&](const BlockInfo& b) { return b.begin + block <= next_begin; });
      if (options.max_windows && out.windows.size() >= *options.max_windows) break;
    }

    if (options.realtime) {
      const auto due = wall_start + std::chrono::duration<double>(
                                        static_cast<double>(stream.cursor()) / fs);
      std::this_thread::sleep_until(
          std::chrono::time_point_cast<std::chrono::steady_clock::duration>(due));
    }
  }

  EvaluationReport& report = out.report;
  report.mode = "live";
  report.seed = seed;
  report.metadata = {{"duration_s", record.duration()},
                     {"block_samples", block},
                     {"config", config_to_json(config)}};
  report.windows = out.windows;
  score_report(report);
  return out;
}

}  // namespace hbci
