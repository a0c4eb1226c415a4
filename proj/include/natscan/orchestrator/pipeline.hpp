#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <vector>

#include "natscan/orchestrator/config.hpp"
#include "natscan/orchestrator/rate.hpp"
#include "natscan/orchestrator/records.hpp"
#include "natscan/transport/transport.hpp"

namespace natscan {

/// Builds the backend transport for one target.
using TransportFactory = std::function<std::unique_ptr<Transport>(Ipv4Addr target)>;
using RecordSink = std::function<void(const ScanRecord&)>;

struct PipelineHooks {
  /// Runs on the worker thread once a target is finished, before its
  /// transport is destroyed.
  std::function<void(Ipv4Addr target, Transport& backend)> on_target_done;
};

/// Checks the capabilities the pipeline needs. Throws SpoofUnsupported or
/// CapabilityMissing.
void require_caps(const TransportCaps& caps);

/// prefilter -> select_outpost -> (qualified and sweep_subnet set) sweep,
/// rate-limited per host. Records come back in pipeline order; the last one
/// is marked final.
std::vector<ScanRecord> scan_target(Transport& backend, Ipv4Addr target, const ScanConfig& config);

/// Scans every target not in `skip`, up to config.concurrency_limit at a
/// time. Records reach `sink` grouped by target, in target order, whatever
/// the scheduling. Capabilities are checked before any packet is sent.
void run_pipeline(const std::vector<Ipv4Addr>& targets, const ScanConfig& config,
                  const TransportFactory& factory, const RecordSink& sink,
                  const std::set<Ipv4Addr>& skip = {}, const PipelineHooks& hooks = {});

/// Loads a partial result file for resumption: returns the lines of targets
/// whose final record is present, in file order, and their addresses.
struct ResumeState {
  std::vector<std::string> kept_lines;
  std::set<Ipv4Addr> completed;
};
ResumeState load_resume_state(const std::filesystem::path& path);

} // namespace natscan
