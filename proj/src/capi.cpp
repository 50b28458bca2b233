#include "hbci/hbci.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hbci/config.hpp"
#include "hbci/edf.hpp"
#include "hbci/gateway.hpp"
#include "hbci/marker_link.hpp"
#include "hbci/robot.hpp"
#include "hbci/runner.hpp"

using nlohmann::json;

struct hbci_config {
  hbci::AppConfig config;
};

struct hbci_marker_parser {
  hbci::ParserState state;
};

struct hbci_service {
  std::unique_ptr<hbci::LiveService> service;
};

namespace {

thread_local std::string g_last_error;

hbci_status fail(hbci_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs f, translating exceptions into status codes.
template <typename F>
hbci_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return HBCI_OK;
  } catch (const hbci::Error& e) {
    return fail(static_cast<hbci_status>(e.code()), e.what());
  } catch (const json::exception& e) {
    return fail(HBCI_E_INVALID_ARGUMENT, std::string("JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(HBCI_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(HBCI_E_INTERNAL, e.what());
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw hbci::Error(hbci::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

}  // namespace

extern "C" {

const char* hbci_version(void) { return "0.1.0"; }

const char* hbci_status_name(hbci_status status) {
  switch (status) {
    case HBCI_OK: return "ok";
    case HBCI_E_INVALID_ARGUMENT: return "invalid_argument";
    case HBCI_E_CONFIG: return "config";
    case HBCI_E_IO: return "io";
    case HBCI_E_EDF_TRUNCATED: return "edf_truncated";
    case HBCI_E_EDF_MALFORMED_HEADER: return "edf_malformed_header";
    case HBCI_E_EDF_INCONSISTENT_RECORDS: return "edf_inconsistent_records";
    case HBCI_E_EDF_DEGENERATE_SCALING: return "edf_degenerate_scaling";
    case HBCI_E_UNREPRESENTABLE: return "unrepresentable";
    case HBCI_E_MISSING_CHANNEL: return "missing_channel";
    case HBCI_E_NO_MARKERS: return "no_markers";
    case HBCI_E_EMPTY_WINDOW: return "empty_window";
    case HBCI_E_GATEWAY: return "gateway";
    case HBCI_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* hbci_last_error(void) { return g_last_error.c_str(); }

void hbci_string_free(char* s) { std::free(s); }

hbci_status hbci_config_default(hbci_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new hbci_config{};
  });
}

hbci_status hbci_config_load(const char* path, hbci_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new hbci_config{hbci::load_config(path)};
  });
}

hbci_status hbci_config_from_json(const char* text, hbci_config** out) {
  return guarded([&] {
    require(text, "json");
    require(out, "out");
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw hbci::Error(hbci::ErrorCode::Config, std::string("config is not JSON: ") + e.what());
    }
    *out = new hbci_config{hbci::config_from_json(j)};
  });
}

hbci_status hbci_config_to_json(const hbci_config* config, char** out_json) {
  return guarded([&] {
    require(config, "config");
    require(out_json, "out_json");
    *out_json = dup(hbci::config_to_json(config->config).dump(2));
  });
}

hbci_status hbci_config_validate(const hbci_config* config, char** out_violations) {
  std::vector<std::string> violations;
  const hbci_status st = guarded([&] {
    require(config, "config");
    violations = hbci::validate_app_config(config->config).violations;
    if (out_violations) *out_violations = dup(json(violations).dump());
  });
  if (st != HBCI_OK) return st;
  if (!violations.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& v : violations) msg += " " + v + ";";
    return fail(HBCI_E_CONFIG, msg);
  }
  return HBCI_OK;
}

void hbci_config_free(hbci_config* config) { delete config; }

hbci_status hbci_simulate(const hbci_config* config, uint64_t seed, int sessions,
                          const char* out_edf, int timing, char** out_report) {
  return guarded([&] {
    require(config, "config");
    require(out_report, "out_report");
    hbci::OfflineOptions options;
    if (sessions > 0) options.sessions = sessions;
    options.measure_latency = timing != 0;
    const auto result = hbci::run_offline(config->config, seed, options);
    if (out_edf) hbci::write_edf(result.record, out_edf, config->config.edf);
    *out_report = dup(hbci::report_to_json(result.report, config->config.stimuli).dump(2));
  });
}

hbci_status hbci_decode_edf(const hbci_config* config, const char* path, char** out_report) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    require(out_report, "out_report");
    const auto report = hbci::decode_file(path, config->config);
    *out_report = dup(hbci::report_to_json(report, config->config.stimuli).dump(2));
  });
}

hbci_status hbci_evaluate(const char* const* names, const char* const* reports, size_t n,
                          char** out_table) {
  return guarded([&] {
    require(out_table, "out_table");
    if (n > 0) {
      require(names, "names");
      require(reports, "reports");
    }
    std::vector<std::pair<std::string, json>> docs;
    for (size_t i = 0; i < n; ++i) {
      require(names[i], "name");
      require(reports[i], "report");
      json j;
      try {
        j = json::parse(reports[i]);
      } catch (const json::parse_error& e) {
        throw hbci::Error(hbci::ErrorCode::InvalidArgument,
                          std::string(names[i]) + " is not JSON: " + e.what());
      }
      docs.emplace_back(names[i], std::move(j));
    }
    *out_table = dup(hbci::evaluate_reports(docs));
  });
}

hbci_status hbci_replay(const char* command_log_jsonl, char** out_state) {
  return guarded([&] {
    require(command_log_jsonl, "command_log");
    require(out_state, "out_state");
    const auto log = hbci::command_log_from_jsonl(command_log_jsonl);
    const auto state = hbci::replay(log);
    *out_state = dup(json{{"x", state.x},
                          {"y", state.y},
                          {"heading", hbci::to_string(state.heading)},
                          {"commands", state.log.size()}}
                         .dump());
  });
}

hbci_status hbci_live_scripted(const hbci_config* config, uint64_t seed, const int* script,
                               size_t n, char** out_result) {
  return guarded([&] {
    require(config, "config");
    require(out_result, "out_result");
    if (n > 0) require(script, "script");
    std::vector<hbci::StimulusId> ids(script, script + n);
    for (int id : ids) config->config.stimuli.by_id(id);
    hbci::ScriptedGaze gaze(ids, config->config.protocol);
    const auto result = hbci::run_live(config->config, seed, gaze);
    json out;
    out["report"] = hbci::report_to_json(result.report, config->config.stimuli);
    out["robot"] = {{"x", result.robot.x},
                    {"y", result.robot.y},
                    {"heading", hbci::to_string(result.robot.heading)},
                    {"commands", result.robot.log.size()}};
    out["command_log"] = hbci::command_log_to_jsonl(result.robot.log);
    *out_result = dup(out.dump(2));
  });
}

hbci_status hbci_service_start(const hbci_config* config, uint64_t seed, const char* address,
                               uint16_t port, hbci_service** out, uint16_t* out_port) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    const auto report = hbci::validate_app_config(config->config);
    if (!report.ok()) {
      std::string msg = "invalid configuration:";
      for (const auto& v : report.violations) msg += " " + v + ";";
      throw hbci::Error(hbci::ErrorCode::Config, msg);
    }
    auto handle = std::make_unique<hbci_service>();
    handle->service = std::make_unique<hbci::LiveService>(config->config, seed);
    const auto bound = handle->service->start(port, address ? address : "127.0.0.1");
    if (out_port) *out_port = bound;
    *out = handle.release();
  });
}

void hbci_service_stop(hbci_service* service) {
  if (!service) return;
  try {
    service->service->stop();
  } catch (...) {
  }
  delete service;
}

hbci_status hbci_marker_encode(int code, double timestamp, char** out_line) {
  return guarded([&] {
    require(out_line, "out_line");
    *out_line = dup(hbci::encode_marker({code, timestamp}));
  });
}

hbci_status hbci_marker_parser_new(hbci_marker_parser** out) {
  return guarded([&] {
    require(out, "out");
    *out = new hbci_marker_parser{};
  });
}

hbci_status hbci_marker_parser_feed(hbci_marker_parser* parser, const char* bytes, size_t n,
                                    char** out_json) {
  return guarded([&] {
    require(parser, "parser");
    require(out_json, "out_json");
    if (n > 0) require(bytes, "bytes");
    auto r = hbci::feed_bytes(parser->state, std::string_view(bytes ? bytes : "", n));
    json events = json::array();
    for (const auto& e : r.events) events.push_back({{"code", e.code}, {"timestamp", e.timestamp}});
    json diags = json::array();
    for (const auto& d : r.diagnostics) diags.push_back({{"offset", d.offset}, {"reason", d.reason}});
    *out_json = dup(json{{"events", events}, {"diagnostics", diags}}.dump());
    parser->state = std::move(r.state);
  });
}

void hbci_marker_parser_free(hbci_marker_parser* parser) { delete parser; }

double hbci_link_budget(size_t byte_count, double baud) {
  try {
    return hbci::link_budget(byte_count, baud);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return -1.0;
  }
}

}  // extern "C"
