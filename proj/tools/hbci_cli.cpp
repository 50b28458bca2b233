// Command-line front end. Talks to the platform only through hbci.h.
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hbci/hbci.h"
#include "json.hpp"

namespace {

struct Owned {
  char* p = nullptr;
  ~Owned() { hbci_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct ConfigHandle {
  hbci_config* p = nullptr;
  ~ConfigHandle() { hbci_config_free(p); }
};

int report_failure(hbci_status st) {
  std::cerr << "error (" << hbci_status_name(st) << "): " << hbci_last_error() << "\n";
  return static_cast<int>(st);
}

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  return static_cast<bool>(out);
}

// Loads --config when given, defaults otherwise.
hbci_status load(const std::string& path, ConfigHandle& cfg) {
  return path.empty() ? hbci_config_default(&cfg.p) : hbci_config_load(path.c_str(), &cfg.p);
}

int emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text << "\n";
    return 0;
  }
  if (!write_file(path, text + "\n")) {
    std::cerr << "error (io): cannot write " << path << "\n";
    return HBCI_E_IO;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid SSVEP/P300 BCI platform"};
  app.require_subcommand(1);
  app.set_version_flag("--version", hbci_version());

  std::string config_path;
  std::uint64_t seed = 1;
  std::string report_path;

  auto* simulate = app.add_subcommand("simulate", "synthesise a protocol run, decode it and report");
  int sessions = 0;
  std::string out_edf;
  bool timing = false;
  simulate->add_option("--config", config_path, "JSON configuration")->check(CLI::ExistingFile);
  simulate->add_option("--seed", seed, "master seed");
  simulate->add_option("--sessions", sessions, "number of sessions (default: from config)")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--out-edf", out_edf, "write the synthetic recording here");
  simulate->add_option("--report", report_path, "write the JSON report here (default stdout)");
  simulate->add_flag("--timing", timing, "include decode latency (not reproducible)");

  auto* decode = app.add_subcommand("decode", "decode an EDF recording");
  std::string in_edf;
  decode->add_option("--in-edf", in_edf, "recording to decode")->required();
  decode->add_option("--config", config_path, "JSON configuration")->check(CLI::ExistingFile);
  decode->add_option("--report", report_path, "write the JSON report here (default stdout)");

  auto* evaluate = app.add_subcommand("evaluate", "accuracy table over reports");
  std::vector<std::string> reports;
  evaluate->add_option("--report", reports, "report files")->required()->check(CLI::ExistingFile);

  auto* replay = app.add_subcommand("replay", "replay a robot command log");
  std::string command_log;
  replay->add_option("--command-log", command_log, "JSONL command log")
      ->required()
      ->check(CLI::ExistingFile);

  auto* live = app.add_subcommand("live", "run the closed loop against a scripted gaze");
  std::vector<int> script;
  std::string log_out;
  live->add_option("--config", config_path, "JSON configuration")->check(CLI::ExistingFile);
  live->add_option("--seed", seed, "master seed");
  live->add_option("--script", script, "attended stimulus id per window")
      ->required()
      ->delimiter(',');
  live->add_option("--report", report_path, "write the JSON result here (default stdout)");
  live->add_option("--command-log", log_out, "write the robot command log (JSONL) here");

  auto* serve = app.add_subcommand("serve", "run the gateway with a real-time pipeline");
  int port = -1;
  std::string address = "127.0.0.1";
  serve->add_option("--config", config_path, "JSON configuration")->check(CLI::ExistingFile);
  serve->add_option("--seed", seed, "master seed");
  serve->add_option("--port", port, "listen port (default: from config)")
      ->check(CLI::Range(0, 65535));
  serve->add_option("--address", address, "listen address");

  auto* validate = app.add_subcommand("validate", "check a configuration file");
  validate->add_option("--config", config_path, "JSON configuration")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  if (*evaluate) {
    std::vector<std::string> texts(reports.size()), labels(reports.size());
    std::vector<const char*> names, docs;
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (!read_file(reports[i], texts[i])) {
        std::cerr << "error (io): cannot read " << reports[i] << "\n";
        return HBCI_E_IO;
      }
      labels[i] = std::filesystem::path(reports[i]).filename().string();
      names.push_back(labels[i].c_str());
      docs.push_back(texts[i].c_str());
    }
    Owned table;
    if (auto st = hbci_evaluate(names.data(), docs.data(), names.size(), &table.p)) {
      return report_failure(st);
    }
    std::cout << table.str();
    return 0;
  }

  if (*replay) {
    std::string text;
    if (!read_file(command_log, text)) {
      std::cerr << "error (io): cannot read " << command_log << "\n";
      return HBCI_E_IO;
    }
    Owned state;
    if (auto st = hbci_replay(text.c_str(), &state.p)) return report_failure(st);
    std::cout << state.str() << "\n";
    return 0;
  }

  ConfigHandle cfg;
  if (auto st = load(config_path, cfg)) return report_failure(st);

  if (*validate) {
    Owned violations;
    const auto st = hbci_config_validate(cfg.p, &violations.p);
    if (st == HBCI_E_CONFIG) std::cerr << violations.str() << "\n";
    if (st) return report_failure(st);
    std::cout << "ok\n";
    return 0;
  }

  if (*simulate) {
    Owned report;
    if (auto st = hbci_simulate(cfg.p, seed, sessions, out_edf.empty() ? nullptr : out_edf.c_str(),
                                timing ? 1 : 0, &report.p)) {
      return report_failure(st);
    }
    return emit(report.str(), report_path);
  }

  if (*decode) {
    Owned report;
    if (auto st = hbci_decode_edf(cfg.p, in_edf.c_str(), &report.p)) return report_failure(st);
    return emit(report.str(), report_path);
  }

  if (*live) {
    Owned result;
    if (auto st = hbci_live_scripted(cfg.p, seed, script.data(), script.size(), &result.p)) {
      return report_failure(st);
    }
    if (!log_out.empty()) {
      const std::string jsonl =
          nlohmann::json::parse(result.str())["command_log"].get<std::string>();
      if (!write_file(log_out, jsonl)) {
        std::cerr << "error (io): cannot write " << log_out << "\n";
        return HBCI_E_IO;
      }
    }
    return emit(result.str(), report_path);
  }

  if (*serve) {
    if (port < 0) {
      Owned text;
      if (auto st = hbci_config_to_json(cfg.p, &text.p)) return report_failure(st);
      port = nlohmann::json::parse(text.str())["gateway"]["port"].get<int>();
    }
    // Block termination signals before any thread starts so sigwait gets them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    hbci_service* service = nullptr;
    std::uint16_t bound = 0;
    if (auto st = hbci_service_start(cfg.p, seed, address.c_str(),
                                     static_cast<std::uint16_t>(port), &service, &bound)) {
      return report_failure(st);
    }
    std::cout << "listening on " << address << ":" << bound << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    hbci_service_stop(service);
    std::cout << "stopped" << std::endl;
    return 0;
  }
  return 0;
}
