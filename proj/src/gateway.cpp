#include "hbci/gateway.hpp"

#include <algorithm>

namespace hbci {

using nlohmann::json;

const char* to_string(FrameKind k) {
  switch (k) {
    case FrameKind::StimulusState: return "StimulusState";
    case FrameKind::EegBlock: return "EegBlock";
    case FrameKind::Marker: return "Marker";
    case FrameKind::Decision: return "Decision";
    case FrameKind::RobotState: return "RobotState";
    case FrameKind::Clock: return "Clock";
  }
  return "?";
}

std::string StreamFrame::serialize() const {
  json j;
  j["kind"] = to_string(kind);
  j["t"] = t;
  j["seq"] = seq;
  j["payload"] = payload;
  return j.dump();
}

bool Subscription::offer(const std::shared_ptr<const std::string>& frame) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return false;
    if (queue_.size() >= capacity_) {
      closed_ = true;
      overflowed_ = true;
      queue_.clear();
    } else {
      queue_.push_back(frame);
    }
  }
  cv_.notify_all();
  return !overflowed();
}

std::optional<std::string> Subscription::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [this] { return closed_ || !queue_.empty(); });
  if (queue_.empty()) return std::nullopt;
  auto f = std::move(queue_.front());
  queue_.pop_front();
  lock.unlock();
  return *f;
}

std::optional<std::string> Subscription::try_pop() {
  return pop(std::chrono::milliseconds(0));
}

bool Subscription::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

bool Subscription::overflowed() const {
  std::lock_guard lock(mutex_);
  return overflowed_;
}

void Subscription::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::shared_ptr<Subscription> Broadcaster::subscribe(std::size_t capacity) {
  auto sub = std::make_shared<Subscription>(std::max<std::size_t>(capacity, 1));
  std::lock_guard lock(mutex_);
  subscribers_.push_back(sub);
  return sub;
}

std::uint64_t Broadcaster::publish(FrameKind kind, double t, json payload) {
  std::lock_guard lock(mutex_);
  StreamFrame frame{kind, t, std::move(payload), seq_.load() + 1};
  auto text = std::make_shared<const std::string>(frame.serialize());
  if (text->size() > max_frame_bytes_) {
    throw Error(ErrorCode::Gateway, std::string(to_string(kind)) + " frame of " +
                                        std::to_string(text->size()) +
                                        " bytes exceeds the frame limit");
  }
  seq_.store(frame.seq);
  for (const auto& s : subscribers_) s->offer(text);
  std::erase_if(subscribers_, [](const auto& s) { return s->closed(); });
  return frame.seq;
}

std::size_t Broadcaster::subscriber_count() {
  std::lock_guard lock(mutex_);
  std::erase_if(subscribers_, [](const auto& s) { return s->closed(); });
  return subscribers_.size();
}

FramePublisher::FramePublisher(Broadcaster& broadcaster, const AppConfig& config)
    : broadcaster_(broadcaster), config_(config) {}

std::uint64_t FramePublisher::on_stimulus_state(double t,
                                                std::optional<StimulusId> attended,
                                                const std::vector<bool>& on) {
  json stimuli = json::array();
  for (std::size_t i = 0; i < config_.stimuli.stimuli.size(); ++i) {
    const auto& s = config_.stimuli.stimuli[i];
    stimuli.push_back({{"id", s.id},
                       {"on", i < on.size() && on[i]},
                       {"frequency", s.frequency},
                       {"duty_cycle", s.duty_cycle},
                       {"position", to_string(s.position)},
                       {"marker_code", s.marker_code}});
  }
  return broadcaster_.publish(
      FrameKind::StimulusState, t,
      {{"stimuli", stimuli}, {"attended", attended ? json(*attended) : json("rest")}});
}

void FramePublisher::on_eeg_block(double t, const std::vector<std::string>& labels,
                                  const std::vector<std::vector<double>>& block) {
  const std::size_t limit = config_.gateway.eeg_frame_samples;
  json channels = json::object();
  std::size_t stride = 1;
  for (std::size_t c = 0; c < labels.size() && c < block.size(); ++c) {
    const auto& x = block[c];
    stride = std::max<std::size_t>(1, (x.size() + limit - 1) / limit);
    json samples = json::array();
    for (std::size_t i = 0; i < x.size(); i += stride) samples.push_back(x[i]);
    channels[labels[c]] = samples;
  }
  broadcaster_.publish(FrameKind::EegBlock, t,
                       {{"sample_rate", config_.synth.sample_rate / static_cast<double>(stride)},
                        {"channels", channels}});
}

void FramePublisher::on_marker(const MarkerEvent& event, StimulusId stimulus) {
  broadcaster_.publish(FrameKind::Marker, event.timestamp,
                       {{"code", event.code},
                        {"stimulus", stimulus},
                        {"flash_duration", config_.synth.flash_duration}});
}

void FramePublisher::on_decision(double t, const WindowResult& result) {
  broadcaster_.publish(FrameKind::Decision, t, window_to_json(result, config_.stimuli));
}

void FramePublisher::on_robot(double t, const RobotState& state) {
  json payload = {{"x", state.x}, {"y", state.y}, {"heading", to_string(state.heading)},
                  {"commands", state.log.size()}};
  if (!state.log.empty()) payload["last_command"] = to_string(state.log.back().command);
  broadcaster_.publish(FrameKind::RobotState, t, payload);
}

void FramePublisher::on_clock(double t) {
  broadcaster_.publish(FrameKind::Clock, t, json::object());
}

void handle_gaze_message(const std::string& text, LiveGaze& gaze,
                         std::function<void(const std::string&)> reply) {
  json t_client = nullptr;
  auto error = [&](const std::string& why) {
    reply(json{{"type", "error"}, {"ok", false}, {"error", why}, {"t_client", t_client}}.dump());
  };
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::parse_error&) {
    error("message is not JSON");
    return;
  }
  if (!msg.is_object() || !msg.contains("attend")) {
    error("message needs an \"attend\" field");
    return;
  }
  if (msg.contains("t_client")) t_client = msg["t_client"];
  const json& attend = msg["attend"];
  std::optional<StimulusId> target;
  if (attend.is_string() && attend.get<std::string>() == "rest") {
    target = std::nullopt;
  } else if (attend.is_number_integer()) {
    target = attend.get<int>();
  } else {
    error("\"attend\" must be a stimulus id or \"rest\"");
    return;
  }
  try {
    gaze.request(target, [reply, attend, t_client](std::uint64_t seq) {
      reply(json{{"type", "ack"}, {"ok", true}, {"attend", attend}, {"seq", seq},
                 {"t_client", t_client}}
                .dump());
    });
  } catch (const Error& e) {
    error(e.what());
  }
}

}  // namespace hbci
