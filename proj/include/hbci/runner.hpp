#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hbci/config.hpp"
#include "hbci/decoder.hpp"
#include "hbci/robot.hpp"
#include "hbci/stimulus.hpp"
#include "hbci/synth.hpp"

namespace hbci {

struct WindowSpec {
  double start = 0.0;
  double end = 0.0;
  std::optional<StimulusId> truth;  // nullopt: no ground truth (rest/unknown)
};

struct WindowResult {
  WindowSpec window;
  WindowDecode decode;
  std::optional<Command> command;  // live mode only
  std::optional<double> latency;   // seconds, when measured
};

struct EvaluationReport {
  std::string mode;  // "offline", "decode" or "live"
  std::uint64_t seed = 0;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<WindowResult> windows;
  std::vector<std::string> warnings;
  // Present only when at least one window has a ground-truth class.
  std::optional<double> accuracy_ssvep;
  std::optional<double> accuracy_p300;
  std::optional<double> accuracy_fused;
  std::optional<double> mean_decode_latency;
};

// Fills accuracies from windows with truth; warns when there are none.
void score_report(EvaluationReport& report);

// Schema-stable JSON: per-window decisions, accuracies, confusion matrices
// (rows = truth, columns = predicted, last column = no decision).
nlohmann::json report_to_json(const EvaluationReport& report,
                              const StimulusConfig& config);

nlohmann::json decision_to_json(const Decision& d, const StimulusConfig& config);
nlohmann::json window_to_json(const WindowResult& w, const StimulusConfig& config);

// Focus segments of the schedule as analysis windows with their truth.
std::vector<WindowSpec> focus_windows(const AttentionSchedule& schedule);

// Windows from protocol timing that fit in `duration`, without truth.
std::vector<WindowSpec> protocol_windows(const SessionProtocol& protocol,
                                         const StimulusConfig& config,
                                         double duration);

struct OfflineOptions {
  std::optional<int> sessions;               // overrides the protocol
  std::optional<std::vector<WindowSpec>> windows;  // explicit window plan
  bool measure_latency = false;
};

struct OfflineResult {
  EvaluationReport report;
  EegRecord record;
  AttentionSchedule schedule;
  FlashSchedule flashes;
};

// Seeds: flash schedule = derive_seed(seed, 1), synthesis = derive_seed(seed, 2).
OfflineResult run_offline(const AppConfig& config, std::uint64_t seed,
                          const OfflineOptions& options = {});

std::uint64_t flash_seed(std::uint64_t seed);
std::uint64_t synth_seed(std::uint64_t seed);

// Truth-free decoding of a record. has_markers = false yields SSVEP-only
// decisions with P300 marked unavailable.
EvaluationReport decode_record(const EegRecord& record, const AppConfig& config,
                               const std::vector<WindowSpec>& windows,
                               bool has_markers);

// Reads an EDF file; windows default to the protocol's focus segments.
EvaluationReport decode_file(const std::filesystem::path& path,
                             const AppConfig& config,
                             const std::optional<std::vector<WindowSpec>>& windows = {});

// Accuracy table over named JSON reports, plus a window-weighted total row.
std::string evaluate_reports(
    const std::vector<std::pair<std::string, nlohmann::json>>& reports);

// --- live pipeline ---------------------------------------------------------

class GazeSource {
 public:
  virtual ~GazeSource() = default;
  // Attention for the synthesis block starting at t; nullopt = Rest.
  virtual std::optional<StimulusId> attended(double t) = 0;
  virtual bool connected() const { return true; }
  // Seq of the first frame published for the block that used the latest
  // attended() answer.
  virtual void took_effect(std::uint64_t /*seq*/) {}
  // True once the source has nothing further to say (scripted runs).
  virtual bool finished(std::size_t /*windows_done*/) const { return false; }
};

// One attended stimulus per focus window, Rest in between.
class ScriptedGaze : public GazeSource {
 public:
  ScriptedGaze(std::vector<StimulusId> script, const SessionProtocol& protocol);
  std::optional<StimulusId> attended(double t) override;
  bool finished(std::size_t windows_done) const override;
  const std::vector<StimulusId>& script() const { return script_; }

 private:
  std::vector<StimulusId> script_;
  double focus_;
  double cycle_;
};

// Operator-driven attention (set from the gateway), applied at block
// boundaries; each request is acknowledged with the seq at which it took
// effect.
class LiveGaze : public GazeSource {
 public:
  using Ack = std::function<void(std::uint64_t seq)>;

  explicit LiveGaze(const StimulusConfig& config);

  // Throws InvalidArgument for unknown ids; state unchanged on error.
  void request(std::optional<StimulusId> attend, Ack ack = {});
  void set_connected(bool connected);
  std::optional<StimulusId> current() const;

  std::optional<StimulusId> attended(double t) override;
  bool connected() const override;
  void took_effect(std::uint64_t seq) override;

 private:
  StimulusConfig config_;
  mutable std::mutex mutex_;
  std::optional<StimulusId> current_;
  std::optional<std::optional<StimulusId>> pending_;
  std::vector<Ack> pending_acks_;
  std::vector<Ack> applied_acks_;
  bool connected_ = true;
};

// Receives everything the live loop produces, in pipeline order.
// on_stimulus_state returns the seq assigned to its frame.
class LiveSink {
 public:
  virtual ~LiveSink() = default;
  virtual std::uint64_t on_stimulus_state(double t, std::optional<StimulusId> attended,
                                          const std::vector<bool>& on) = 0;
  virtual void on_eeg_block(double t, const std::vector<std::string>& labels,
                            const std::vector<std::vector<double>>& block) = 0;
  virtual void on_marker(const MarkerEvent& event, StimulusId stimulus) = 0;
  virtual void on_decision(double t, const WindowResult& result) = 0;
  virtual void on_robot(double t, const RobotState& state) = 0;
  virtual void on_clock(double t) = 0;
};

struct LiveOptions {
  bool realtime = false;                  // pace blocks against the wall clock
  std::optional<std::size_t> max_windows; // stop after this many decisions
  const std::atomic<bool>* stop = nullptr;
};

struct LiveResult {
  std::vector<WindowResult> windows;
  RobotState robot;
  EegRecord record;
  EvaluationReport report;
};

// Focus windows start every focus+rest seconds. Each window is decoded once
// the record reaches its end plus the P300 post-window, so decisions are
// identical to offline decoding of the same samples.
LiveResult run_live(const AppConfig& config, std::uint64_t seed,
                    GazeSource& gaze, LiveSink* sink = nullptr,
                    const LiveOptions& options = {});

}  // namespace hbci
