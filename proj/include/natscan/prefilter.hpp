#pragma once

#include <optional>
#include <utility>

#include "natscan/probe.hpp"

namespace natscan {

struct PrefilterResult {
  Ipv4Addr target;
  bool alive = false;
  bool rst_seen = false;
  std::optional<std::uint16_t> first_ipid;
  bool passed = false;
};

/// SYN to the port; alive iff a SYN-ACK comes back. A live connection is
/// torn down with an explicit RST.
bool syn_probe(Transport& transport, const ProbeTarget& target, Rng& rng,
               Millis timeout = seconds(1));

/// One unsolicited SYN-ACK: (RST seen, its IPID).
std::pair<bool, std::optional<std::uint16_t>> synack_probe(Transport& transport,
                                                           const ProbeTarget& target, Rng& rng,
                                                           Millis timeout = seconds(1));

/// passed = alive && rst_seen && first_ipid && *first_ipid != 0.
bool prefilter_passes(bool alive, bool rst_seen, std::optional<std::uint16_t> first_ipid);

/// Both probes, always.
PrefilterResult prefilter(Transport& transport, const ProbeTarget& target, Rng& rng);

} // namespace natscan
