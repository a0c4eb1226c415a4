#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "natscan/ipid.hpp"
#include "natscan/ipv4.hpp"

namespace natscan {

/// Staged outcome of qualifying a host as an outpost. The order of the
/// enumerators follows the order of the checks: a value is only reachable
/// when every check before it succeeded.
enum class OutpostVerdict {
  NotAlive,
  NoRstResponse,
  ZeroIpid,
  TooNoisy,
  NotSharedIpid,
  SpoofedPublicFiltered,
  SpoofedPrivateFiltered,
  Inconclusive,
  QualifiedOutpost,
};

std::string_view to_string(OutpostVerdict v);
std::optional<OutpostVerdict> outpost_verdict_from_string(std::string_view s);

enum class PenetrationOutcome { HolePresent, HoleAbsent, Inconclusive };

std::string_view to_string(PenetrationOutcome v);
std::optional<PenetrationOutcome> penetration_outcome_from_string(std::string_view s);

/// Retransmission offsets in seconds, relative to the first SYN-ACK.
struct RetransSchedule {
  std::vector<int> offsets_s;
  bool calibrated = false;

  friend bool operator==(const RetransSchedule&, const RetransSchedule&) = default;
};

struct PenetrationVerdict {
  PenetrationOutcome outcome = PenetrationOutcome::Inconclusive;
  Ipv4Addr probed_private_ip;
  RetransSchedule schedule;
  IpidSeries detection_series;
  int k = 0;
};

} // namespace natscan
