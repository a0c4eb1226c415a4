#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "natscan/detect.hpp"
#include "natscan/ipv4.hpp"
#include "natscan/outpost.hpp"

namespace natscan {

struct ScanConfig {
  std::uint16_t target_port = 80;
  double max_rate_pps_per_host = 0.6;
  double burst = 10.0;
  double noise_threshold_pps = 6.0;
  Ipv4Addr private_probe_addr{192, 168, 1, 1};
  Ipv4Addr public_spoof_addr{203, 0, 113, 7};
  std::optional<Ipv4Prefix> sweep_subnet;
  int concurrency_limit = 1;
  std::uint64_t rng_seed = 0;
  /// Targets to scan; empty means every host of the scenario.
  std::vector<Ipv4Addr> targets;
  /// Poisson standard deviations tolerated by the spoof checks.
  double noise_z = 1.0;
  int max_none = 2;

  /// Throws ScanError(InvalidConfig).
  void validate() const;

  OutpostParams outpost_params() const;
  DetectionParams detection_params() const;
};

/// YAML scan configuration; see docs/config-schema.md. Unknown keys are errors.
ScanConfig parse_scan_config(const std::string& yaml_text);
ScanConfig load_scan_config(const std::filesystem::path& path);

} // namespace natscan
