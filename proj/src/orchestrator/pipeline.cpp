#include "natscan/orchestrator/pipeline.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "natscan/error.hpp"
#include "natscan/random.hpp"

namespace natscan {

void require_caps(const TransportCaps& caps) {
  if (!caps.accepts_unsolicited_synack)
    throw ScanError(ErrorCode::CapabilityMissing,
                    "backend cannot send unsolicited SYN-ACK probes");
  if (!caps.can_spoof_source)
    throw ScanError(ErrorCode::SpoofUnsupported,
                    "outpost selection needs a backend that can spoof source addresses");
}

std::vector<ScanRecord> scan_target(Transport& backend, Ipv4Addr target,
                                    const ScanConfig& config) {
  require_caps(backend.caps());
  PoliteTransport polite(backend, config.max_rate_pps_per_host, config.burst);
  Rng rng(mix_seed(config.rng_seed, target.value()));
  const ProbeTarget pt{target, config.target_port};

  std::vector<ScanRecord> out;
  Millis start = polite.now();
  std::size_t sent = 0;
  auto emit = [&](Stage stage, nlohmann::json result) {
    ScanRecord r;
    r.target = target;
    r.stage = stage;
    r.start_ms = start;
    r.end_ms = polite.now();
    r.packets_sent = polite.sent_to(target) - sent;
    r.result = std::move(result);
    out.push_back(std::move(r));
    start = polite.now();
    sent = polite.sent_to(target);
  };
  auto finish = [&] {
    out.back().final = true;
    return out;
  };

  const auto pf = prefilter(polite, pt, rng);
  emit(Stage::Prefilter, to_json(pf));
  if (!pf.passed)
    return finish();

  const auto outpost = select_outpost(polite, pt, config.outpost_params(), rng);
  emit(Stage::Outpost, to_json(outpost));
  if (outpost.verdict != OutpostVerdict::QualifiedOutpost || !config.sweep_subnet)
    return finish();

  const auto params = config.detection_params();
  std::optional<RetransSchedule> schedule;
  try {
    schedule = measure_schedule(polite, pt, params, rng);
  } catch (const ScanError& e) {
    if (e.code() != ErrorCode::NoResponse)
      throw;
    emit(Stage::Detect, {{"outcome", to_string(PenetrationOutcome::Inconclusive)},
                         {"error", e.what()}});
    return finish();
  }
  sweep_private_range(polite, pt, *config.sweep_subnet, params, rng, schedule,
                      [&](const SweepEntry& e) { emit(Stage::Detect, to_json(e)); });
  return finish();
}

void run_pipeline(const std::vector<Ipv4Addr>& targets, const ScanConfig& config,
                  const TransportFactory& factory, const RecordSink& sink,
                  const std::set<Ipv4Addr>& skip, const PipelineHooks& hooks) {
  config.validate();
  std::vector<Ipv4Addr> todo;
  for (auto t : targets)
    if (!skip.contains(t))
      todo.push_back(t);
  if (todo.empty())
    return;
  require_caps(factory(todo.front())->caps());

  std::mutex mu;
  std::vector<std::optional<std::vector<ScanRecord>>> done(todo.size());
  std::vector<std::exception_ptr> errors(todo.size());
  std::size_t flushed = 0;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};

  // Hands finished targets to the sink in order; stops at the first gap.
  auto flush = [&] {
    while (flushed < todo.size() && done[flushed]) {
      for (const auto& r : *done[flushed])
        sink(r);
      done[flushed]->clear();
      ++flushed;
    }
  };

  auto worker = [&] {
    for (;;) {
      if (stop.load())
        return;
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size())
        return;
      try {
        auto transport = factory(todo[i]);
        auto records = scan_target(*transport, todo[i], config);
        if (hooks.on_target_done)
          hooks.on_target_done(todo[i], *transport);
        std::lock_guard lock(mu);
        done[i] = std::move(records);
        flush();
      } catch (...) {
        std::lock_guard lock(mu);
        errors[i] = std::current_exception();
        stop.store(true);
      }
    }
  };

  const auto workers = static_cast<std::size_t>(
      std::min<std::size_t>(static_cast<std::size_t>(config.concurrency_limit), todo.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);
}

ResumeState load_resume_state(const std::filesystem::path& path) {
  ResumeState state;
  std::ifstream in(path);
  if (!in)
    return state;
  std::vector<std::pair<Ipv4Addr, std::string>> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    ScanRecord r;
    try {
      r = record_from_line(line);
    } catch (const ScanError&) {
      break; // a torn last line from an interrupted run
    }
    if (r.final)
      state.completed.insert(r.target);
    lines.emplace_back(r.target, line);
  }
  for (auto& [target, text] : lines)
    if (state.completed.contains(target))
      state.kept_lines.push_back(std::move(text));
  return state;
}

} // namespace natscan
