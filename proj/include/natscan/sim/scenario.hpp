#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "natscan/ipv4.hpp"

namespace natscan::sim {

/// One counter shared by every packet the host emits.
struct GlobalCounter {
  std::uint16_t initial = 0;
};

/// One counter per remote address.
struct PerFlowCounter {
  std::uint16_t initial = 0;
};

struct RandomIpid {
  std::uint64_t seed = 0;
};

struct ConstantIpid {
  std::uint16_t value = 0;
};

using IpidPolicy = std::variant<GlobalCounter, PerFlowCounter, RandomIpid, ConstantIpid>;

/// SYN-ACK retransmission timer: the i-th retransmission fires
/// first_interval_s * (2^i - 1) seconds after the first SYN-ACK.
struct RetransBehavior {
  int first_interval_s = 1;
  int count = 5;
  bool doubling = true;

  /// Cumulative offsets of all retransmissions, e.g. {1,3,7,15,31}.
  std::vector<int> offsets_s() const;
};

enum class FilterPolicy { BlockAllSpoofed, BlockPrivateSourceOnly, NoFiltering };

struct InternalHost {
  Ipv4Addr private_ip;
  bool alive = true;
};

/// A public host (candidate outpost) together with the network behind it.
struct HostConfig {
  Ipv4Addr public_ip;
  std::vector<std::uint16_t> open_ports{80};
  IpidPolicy ipid_policy = GlobalCounter{};
  RetransBehavior retrans_behavior;
  FilterPolicy filter_policy = FilterPolicy::NoFiltering;
  bool hole_present = false;
  double noise_rate_pps = 0.0;
  std::vector<InternalHost> internal_hosts;
  /// Whether the host answers a SYN at all (false models an inbound drop).
  bool responds_to_syn = true;
  /// Whether the host answers an unsolicited SYN-ACK with RST.
  bool responds_to_synack = true;
};

struct ScenarioConfig {
  std::vector<HostConfig> outposts;
  double link_loss_prob = 0.0;
  std::uint64_t rng_seed = 0;
  Ipv4Addr scanner_ip{198, 51, 100, 1};
  int latency_ms = 20;
  int lan_latency_ms = 1;
  /// Extra per-packet delivery delay, uniform in [0, jitter_ms].
  int jitter_ms = 0;

  /// Throws ScanError(InvalidConfig) on a broken topology.
  void validate() const;

  const HostConfig* find_host(Ipv4Addr public_ip) const;

  /// The scenario restricted to one host, with a seed derived from the
  /// host's index. Unknown addresses give an empty topology.
  ScenarioConfig slice(Ipv4Addr public_ip) const;
};

std::string_view to_string(FilterPolicy p);

/// YAML scenario files; see docs/config-schema.md. Unknown keys are errors.
ScenarioConfig parse_scenario(const std::string& yaml_text);
ScenarioConfig load_scenario(const std::filesystem::path& path);
std::string dump_scenario(const ScenarioConfig& config);

} // namespace natscan::sim
