// natscan: simulated NAT-penetration scanning from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "natscan/error.hpp"
#include "natscan/orchestrator/config.hpp"
#include "natscan/orchestrator/pipeline.hpp"
#include "natscan/orchestrator/report.hpp"
#include "natscan/sim/scenario.hpp"
#include "natscan/sim/simulator.hpp"
#include "natscan/transport/sim_transport.hpp"
#include "natscan/transport/trace.hpp"

namespace fs = std::filesystem;
using namespace natscan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Raised for anything detected before the first packet: bad files, bad
/// values. Maps to exit status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint16_t> port;
  std::optional<double> rate;
  std::optional<double> noise_threshold;
  std::optional<int> concurrency;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "RNG seed, overrides the config");
  cmd->add_option("--port", o.port, "target TCP port");
  cmd->add_option("--rate", o.rate, "per-host send rate limit (packets/s)");
  cmd->add_option("--noise-threshold", o.noise_threshold, "IPID noise ceiling (packets/s)");
  cmd->add_option("--concurrency", o.concurrency, "targets scanned in parallel")
      ->check(CLI::PositiveNumber);
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path))
    throw UsageError("no such file: " + path);
}

ScanConfig load_config(const std::optional<std::string>& path, const Overrides& o) {
  ScanConfig c;
  try {
    if (path) {
      require_file(*path);
      c = load_scan_config(*path);
    }
    if (o.seed) c.rng_seed = *o.seed;
    if (o.port) c.target_port = *o.port;
    if (o.rate) c.max_rate_pps_per_host = *o.rate;
    if (o.noise_threshold) c.noise_threshold_pps = *o.noise_threshold;
    if (o.concurrency) c.concurrency_limit = *o.concurrency;
    c.validate();
  } catch (const ScanError& e) {
    throw UsageError(e.what());
  }
  return c;
}

sim::ScenarioConfig load_scenario_file(const std::string& path) {
  require_file(path);
  try {
    return sim::load_scenario(path);
  } catch (const ScanError& e) {
    throw UsageError(e.what());
  }
}

Ipv4Addr parse_addr(const std::string& text) {
  const auto a = Ipv4Addr::parse(text);
  if (!a)
    throw UsageError("bad address: " + text);
  return *a;
}

/// Opens the result file. With `resume`, completed targets are kept and
/// everything else is dropped; otherwise the file starts empty.
std::ofstream open_results(const std::string& path, bool resume, std::set<Ipv4Addr>& skip) {
  std::vector<std::string> kept;
  if (resume && fs::exists(path)) {
    auto state = load_resume_state(path);
    kept = std::move(state.kept_lines);
    skip = std::move(state.completed);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw ScanError(ErrorCode::InvalidConfig, "cannot write " + path);
  for (const auto& line : kept)
    out << line << '\n';
  out.flush();
  return out;
}

RecordSink line_sink(std::ofstream& out) {
  return [&out](const ScanRecord& r) {
    out << to_line(r) << '\n';
    out.flush();
  };
}

struct SimScanArgs {
  std::string scenario, config, out;
  std::optional<std::string> trace, event_log;
  bool resume = false;
  Overrides o;
};

int run_sim_scan(const SimScanArgs& a) {
  const auto scenario = load_scenario_file(a.scenario);
  const auto config = load_config(a.config, a.o);
  if (a.trace && a.resume)
    throw UsageError("--trace cannot be combined with --resume");

  std::vector<Ipv4Addr> targets = config.targets;
  if (targets.empty())
    for (const auto& h : scenario.outposts)
      targets.push_back(h.public_ip);

  std::set<Ipv4Addr> skip;
  auto out = open_results(a.out, a.resume, skip);

  std::mutex mu;
  std::map<Ipv4Addr, std::vector<TraceRecord>> traces;
  std::map<Ipv4Addr, std::vector<sim::LogEntry>> logs;
  const bool want_trace = a.trace.has_value();

  auto factory = [&](Ipv4Addr ip) -> std::unique_ptr<Transport> {
    auto t = std::make_unique<SimTransport>(
        std::make_unique<sim::Simulator>(scenario.slice(ip)));
    if (want_trace) {
      std::lock_guard lock(mu);
      t->record_to(&traces[ip]);
    }
    return t;
  };
  PipelineHooks hooks;
  if (a.event_log)
    hooks.on_target_done = [&](Ipv4Addr ip, Transport& backend) {
      auto& sim = static_cast<SimTransport&>(backend).simulator();
      std::lock_guard lock(mu);
      logs[ip] = sim.log();
    };

  int status = kExitOk;
  try {
    run_pipeline(targets, config, factory, line_sink(out), skip, hooks);
  } catch (const std::exception& e) {
    std::cerr << "natscan: " << e.what() << '\n';
    status = kExitRuntime;
  }

  if (a.trace) {
    Trace trace{scenario.scanner_ip, {}, {}};
    for (auto ip : targets)
      if (traces.contains(ip)) {
        trace.targets.push_back(ip);
        trace.records[ip] = std::move(traces[ip]);
      }
    std::ofstream tf(*a.trace, std::ios::trunc);
    write_trace(tf, trace);
  }
  if (a.event_log) {
    std::ofstream lf(*a.event_log, std::ios::trunc);
    for (auto ip : targets)
      if (logs.contains(ip))
        sim::dump_log(lf, logs[ip]);
  }
  return status;
}

struct ReplayArgs {
  std::string trace, config, out;
  Overrides o;
};

int run_replay(const ReplayArgs& a) {
  require_file(a.trace);
  Trace trace;
  try {
    trace = load_trace(a.trace);
  } catch (const ScanError& e) {
    throw UsageError(e.what());
  }
  const auto config = load_config(a.config, a.o);
  std::set<Ipv4Addr> skip;
  auto out = open_results(a.out, false, skip);

  auto factory = [&](Ipv4Addr ip) -> std::unique_ptr<Transport> {
    const auto it = trace.records.find(ip);
    return std::make_unique<ReplayTransport>(
        trace.scanner_ip, it == trace.records.end() ? std::vector<TraceRecord>{} : it->second);
  };
  PipelineHooks hooks;
  hooks.on_target_done = [](Ipv4Addr ip, Transport& backend) {
    if (const auto left = static_cast<ReplayTransport&>(backend).remaining_sends())
      throw ScanError(ErrorCode::TraceDivergence,
                      ip.to_string() + ": " + std::to_string(left) + " recorded sends not replayed");
  };
  try {
    run_pipeline(trace.targets, config, factory, line_sink(out), {}, hooks);
  } catch (const std::exception& e) {
    std::cerr << "natscan: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

struct ProbeArgs {
  std::string scenario, target;
  int n = 10;
  int t = 1;
  std::optional<std::string> config;
  Overrides o;
};

int run_probe(const ProbeArgs& a) {
  const auto scenario = load_scenario_file(a.scenario);
  const auto config = load_config(a.config, a.o);
  const auto ip = parse_addr(a.target);
  sim::Simulator sim(scenario.slice(ip));
  SimTransport backend(sim);
  PoliteTransport polite(backend, config.max_rate_pps_per_host, config.burst);
  Rng rng(mix_seed(config.rng_seed, ip.value()));
  const auto series =
      probe_series(polite, {ip, config.target_port}, {a.n, a.t, a.t}, rng);
  nlohmann::json j{{"target", ip.to_string()},
                   {"series", series_json(series)},
                   {"class", to_string(classify_shared_ipid(series, config.max_none,
                                                            config.noise_threshold_pps))}};
  try {
    j["noise_rate_pps"] = estimate_noise(series).rate_pps;
  } catch (const ScanError&) {
    j["noise_rate_pps"] = nullptr;
  }
  std::cout << j.dump() << '\n';
  return kExitOk;
}

struct DetectArgs {
  std::string scenario, outpost, subnet;
  std::optional<std::string> config;
  Overrides o;
};

int run_detect(const DetectArgs& a) {
  const auto scenario = load_scenario_file(a.scenario);
  auto config = load_config(a.config, a.o);
  const auto ip = parse_addr(a.outpost);
  const auto subnet = Ipv4Prefix::parse(a.subnet);
  if (!subnet)
    throw UsageError("bad subnet: " + a.subnet);
  config.sweep_subnet = *subnet;
  try {
    config.validate();
  } catch (const ScanError& e) {
    throw UsageError(e.what());
  }
  sim::Simulator sim(scenario.slice(ip));
  SimTransport backend(sim);
  PoliteTransport polite(backend, config.max_rate_pps_per_host, config.burst);
  Rng rng(mix_seed(config.rng_seed, ip.value()));
  try {
    sweep_private_range(polite, {ip, config.target_port}, *subnet, config.detection_params(), rng,
                        std::nullopt, [](const SweepEntry& e) {
                          std::cout << to_json(e).dump() << '\n' << std::flush;
                        });
  } catch (const ScanError& e) {
    std::cerr << "natscan: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

struct ReportArgs {
  std::string results;
  std::optional<std::string> compare;
  bool json = false;
};

int run_report(const ReportArgs& a) {
  require_file(a.results);
  if (a.compare)
    require_file(*a.compare);
  ClusterReport first, second;
  try {
    first = cluster_report(load_records(a.results));
    if (a.compare)
      second = cluster_report(load_records(*a.compare));
  } catch (const ScanError& e) {
    throw UsageError(e.what());
  }
  if (a.json) {
    nlohmann::json j = report_json(first);
    if (a.compare)
      j["comparison"] = comparison_json(compare_runs(first, second));
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << format_report(first);
    if (a.compare)
      std::cout << '\n' << format_comparison(compare_runs(first, second));
  }
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated NAT-penetration scanner"};
  app.require_subcommand(1);

  SimScanArgs scan;
  auto* sim_scan = app.add_subcommand("sim-scan", "Scan every target of a scenario");
  sim_scan->add_option("scenario", scan.scenario, "scenario file")->required();
  sim_scan->add_option("config", scan.config, "scan configuration file")->required();
  sim_scan->add_option("out", scan.out, "result file (one JSON record per line)")->required();
  sim_scan->add_flag("--resume", scan.resume, "keep completed targets of an existing result file");
  sim_scan->add_option("--trace", scan.trace, "record the scanner's packets for replay");
  sim_scan->add_option("--event-log", scan.event_log, "write the simulator's ground-truth log");
  add_overrides(sim_scan, scan.o);

  ProbeArgs probe;
  auto* probe_cmd = app.add_subcommand("probe", "Collect one IPID series from a host");
  probe_cmd->add_option("scenario", probe.scenario)->required();
  probe_cmd->add_option("target", probe.target)->required();
  probe_cmd->add_option("-n", probe.n, "samples")->check(CLI::Range(2, 1000));
  probe_cmd->add_option("-t", probe.t, "interval in seconds")->check(CLI::Range(1, 60));
  probe_cmd->add_option("--config", probe.config);
  add_overrides(probe_cmd, probe.o);

  DetectArgs detect;
  auto* detect_cmd = app.add_subcommand("detect", "Sweep a private subnet behind one outpost");
  detect_cmd->add_option("scenario", detect.scenario)->required();
  detect_cmd->add_option("outpost", detect.outpost)->required();
  detect_cmd->add_option("subnet", detect.subnet)->required();
  detect_cmd->add_option("--config", detect.config);
  add_overrides(detect_cmd, detect.o);

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Cluster qualified outposts by prefix");
  report_cmd->add_option("results", report.results)->required();
  report_cmd->add_option("--compare", report.compare, "second result file to intersect with");
  report_cmd->add_flag("--json", report.json, "machine-readable output");

  ReplayArgs replay;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a scan against a recorded trace");
  replay_cmd->add_option("trace", replay.trace)->required();
  replay_cmd->add_option("config", replay.config)->required();
  replay_cmd->add_option("out", replay.out)->required();
  add_overrides(replay_cmd, replay.o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*sim_scan) return run_sim_scan(scan);
    if (*probe_cmd) return run_probe(probe);
    if (*detect_cmd) return run_detect(detect);
    if (*report_cmd) return run_report(report);
    if (*replay_cmd) return run_replay(replay);
  } catch (const UsageError& e) {
    std::cerr << "natscan: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "natscan: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
