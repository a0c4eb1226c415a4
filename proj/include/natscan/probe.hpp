#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "natscan/ipid.hpp"
#include "natscan/random.hpp"
#include "natscan/transport/transport.hpp"

namespace natscan {

/// A host and the open port found by pre-filtering.
struct ProbeTarget {
  Ipv4Addr ip;
  std::uint16_t port = 80;
};

/// ipids(T, N).
struct ProbeParams {
  int n = 10;
  int interval_s = 1;
  int timeout_s = 1;
};

struct NoiseEstimate {
  double rate_pps = 0.0;
  int valid_pairs = 0;
};

enum class IpidClass { SharedMonotonic, TooManyNone, NotMonotonic, TooNoisy };

std::string_view to_string(IpidClass c);

/// Sends one unsolicited SYN-ACK from a fresh local port and returns the IPID
/// of the RST it provokes, or nullopt if none arrives within `timeout`.
std::optional<std::uint16_t> probe_once(Transport& transport, const ProbeTarget& target,
                                        Rng& rng, Millis timeout);

/// Collects a series whose i-th probe leaves at start + i * interval. A
/// sample's wait for its RST never runs past the next scheduled send, nor
/// past `stop` for the final one.
IpidSeries collect_series(Transport& transport, const ProbeTarget& target,
                          const ProbeParams& params, Millis start, Rng& rng,
                          std::optional<Millis> stop = std::nullopt);

/// Reserves the rate budget for the whole series, then collects it.
IpidSeries probe_series(Transport& transport, const ProbeTarget& target,
                        const ProbeParams& params, Rng& rng);

/// Throws ScanError(InsufficientData) with fewer than two samples.
NoiseEstimate estimate_noise(const IpidSeries& series);

IpidClass classify_shared_ipid(const IpidSeries& series, int max_none, double max_noise_pps);

/// How many foreign packets to tolerate over `span_s` seconds at `rate_pps`:
/// the Poisson mean plus z standard deviations, rounded up. z = 0 gives
/// ceil(rate * span).
int noise_allowance(double rate_pps, double span_s, double z);

} // namespace natscan
