#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "hbci/config.hpp"
#include "hbci/runner.hpp"

namespace hbci {

enum class FrameKind { StimulusState, EegBlock, Marker, Decision, RobotState, Clock };

const char* to_string(FrameKind k);

struct StreamFrame {
  FrameKind kind = FrameKind::Clock;
  double t = 0.0;
  nlohmann::json payload = nlohmann::json::object();
  std::uint64_t seq = 0;

  // {"kind":..., "payload":..., "seq":..., "t":...}
  std::string serialize() const;
};

// Per-subscriber bounded queue of serialized frames.
class Subscription {
 public:
  explicit Subscription(std::size_t capacity) : capacity_(capacity) {}

  // Waits up to `timeout` for a frame; nullopt on timeout or once closed and
  // drained.
  std::optional<std::string> pop(std::chrono::milliseconds timeout);
  std::optional<std::string> try_pop();
  bool closed() const;
  // True when the subscription was dropped for falling behind.
  bool overflowed() const;
  void close();

 private:
  friend class Broadcaster;
  // Returns false when the queue is full (the subscription is then closed).
  bool offer(const std::shared_ptr<const std::string>& frame);

  const std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::shared_ptr<const std::string>> queue_;  // shared by all subscribers
  bool closed_ = false;
  bool overflowed_ = false;
};

// Fan-out of frames in seq order. publish() never blocks on subscribers:
// a subscriber whose queue is full is disconnected.
class Broadcaster {
 public:
  explicit Broadcaster(std::size_t max_frame_bytes = 64 * 1024)
      : max_frame_bytes_(max_frame_bytes) {}

  std::shared_ptr<Subscription> subscribe(std::size_t capacity);

  // Assigns the next seq and delivers. Throws Gateway for frames whose
  // serialized size exceeds the limit (no seq is consumed).
  std::uint64_t publish(FrameKind kind, double t, nlohmann::json payload);

  std::size_t subscriber_count();
  std::uint64_t last_seq() const { return seq_.load(); }

 private:
  std::size_t max_frame_bytes_;
  std::mutex mutex_;
  std::vector<std::shared_ptr<Subscription>> subscribers_;
  std::atomic<std::uint64_t> seq_{0};
};

// LiveSink that turns pipeline events into frames. EEG payloads carry at
// most eeg_frame_samples samples per channel (decimated by striding).
class FramePublisher : public LiveSink {
 public:
  FramePublisher(Broadcaster& broadcaster, const AppConfig& config);

  std::uint64_t on_stimulus_state(double t, std::optional<StimulusId> attended,
                                  const std::vector<bool>& on) override;
  void on_eeg_block(double t, const std::vector<std::string>& labels,
                    const std::vector<std::vector<double>>& block) override;
  void on_marker(const MarkerEvent& event, StimulusId stimulus) override;
  void on_decision(double t, const WindowResult& result) override;
  void on_robot(double t, const RobotState& state) override;
  void on_clock(double t) override;

 private:
  Broadcaster& broadcaster_;
  AppConfig config_;
};

// Handles one /gaze message: {"attend": <id> | "rest", "t_client": <ms>}.
// Errors are replied immediately; success is acknowledged through `reply`
// once the change takes effect, carrying that block's seq.
void handle_gaze_message(const std::string& text, LiveGaze& gaze,
                         std::function<void(const std::string&)> reply);

// WebSocket /stream and /gaze, HTTP GET /config and /healthz.
class GatewayServer {
 public:
  GatewayServer(Broadcaster& broadcaster, LiveGaze& gaze,
                nlohmann::json config_json, std::size_t subscriber_buffer);
  ~GatewayServer();
  GatewayServer(const GatewayServer&) = delete;
  GatewayServer& operator=(const GatewayServer&) = delete;

  // Binds and starts accepting; port 0 picks an ephemeral port. Returns the
  // bound port.
  std::uint16_t start(std::uint16_t port, const std::string& address = "127.0.0.1");
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Gateway plus a real-time live pipeline driven by operator gaze.
class LiveService {
 public:
  LiveService(AppConfig config, std::uint64_t seed);
  ~LiveService();

  std::uint16_t start(std::uint16_t port, const std::string& address = "127.0.0.1");
  void stop();
  // Blocks until the pipeline thread ends.
  void wait();

  Broadcaster& broadcaster() { return broadcaster_; }
  LiveGaze& gaze() { return gaze_; }

 private:
  AppConfig config_;
  std::uint64_t seed_;
  Broadcaster broadcaster_;
  LiveGaze gaze_;
  FramePublisher publisher_;
  GatewayServer server_;
  std::atomic<bool> stop_{false};
  std::thread pipeline_;
};

}  // namespace hbci
