#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "natscan/outpost.hpp"
#include "natscan/probe.hpp"
#include "natscan/verdict.hpp"

namespace natscan {

struct DetectionParams {
  int observe_window_s = 25;
  int post_send_delay_ms = 500;
  bool neighbor_extension = true;
  int min_checked_offsets = 2;
  /// Noise series taken right before the spoofed SYNs.
  ProbeParams ipids5{10, 1, 1};
  int max_none = 2;
  double noise_threshold_pps = 6.0;
  /// Standard deviations of Poisson noise above the mean after which a
  /// reading is put down to interference rather than to the probe.
  double noise_z = 3.0;
  /// Lost spoofed SYNs tolerated as a fraction of K (rounded down).
  double loss_fraction = 0.25;
  /// Upper limit on K so a probe fits the per-host rate budget.
  int max_k = 10;
  /// Gap between consecutive spoofed SYNs, and between the last ipids6
  /// probe and the first closing RST.
  int syn_spacing_ms = 10;
  int synack_timeout_ms = 1000;
  int syn_attempts = 2;
  /// Probes per address in a sweep; an Inconclusive reading is retried.
  int attempts = 4;
  /// Independent retransmission measurements behind one schedule.
  int schedule_measurements = 2;
};

/// SYN with the local RST suppressed; the offsets (whole seconds after the
/// first SYN-ACK) of every retransmission inside the observation window.
/// Throws ScanError(NoResponse) if no SYN-ACK arrives.
RetransSchedule measure_retrans(Transport& transport, const ProbeTarget& target,
                                const DetectionParams& params, Rng& rng);

/// gap_0 = offsets[0] > 0 and gap_{i+1} = 2 * gap_i.
bool follows_doubling(const std::vector<int>& offsets);

/// Repairs a uniform shift of one second in either direction.
RetransSchedule calibrate(const RetransSchedule& r);

/// Calibrated schedule from params.schedule_measurements measurements.
/// A lost retransmission only ever removes offsets, so the longest
/// calibrated reading wins. Throws ScanError(NoResponse) if none answered.
RetransSchedule measure_schedule(Transport& transport, const ProbeTarget& target,
                                 const DetectionParams& params, Rng& rng);

struct PenetrationProbe {
  IpidSeries ipids5;
  NoiseEstimate noise;
  int k = 0;
  IpidSeries ipids6;
};

/// ipids5, K spoofed SYNs from `private_ip` on distinct ports, ipids6 long
/// enough to cover every offset, then K spoofed RSTs closing the flows.
/// Throws ScanError(NoisySeriesAbort) if ipids5 is too noisy or broken.
PenetrationProbe penetration_probe(Transport& transport, const ProbeTarget& target,
                                   Ipv4Addr private_ip, const RetransSchedule& schedule,
                                   const DetectionParams& params, Rng& rng);

/// How one offset was read.
struct OffsetReading {
  int offset_s = 0;
  int from = 0; // ipids6 indices of the pair used
  int to = 0;
  std::int64_t increment = 0;
  PenetrationOutcome outcome = PenetrationOutcome::Inconclusive;
};

/// Throws ScanError(MissingSamples) if an offset and both of its widened
/// windows lack samples.
PenetrationVerdict decide(const IpidSeries& ipids6, const RetransSchedule& schedule, int k,
                          const NoiseEstimate& noise, const DetectionParams& params,
                          std::vector<OffsetReading>* readings = nullptr);

struct SweepEntry {
  Ipv4Addr private_ip;
  PenetrationVerdict verdict;
  PenetrationProbe probe;
  std::string error; // set when the address could not be measured
  int attempts = 0;
};

/// One retransmission measurement (unless `schedule` is given), then probe
/// and decide for every address of `subnet`. Per-address failures become
/// Inconclusive entries. `on_entry` sees each entry as soon as it is done.
std::vector<SweepEntry> sweep_private_range(
    Transport& transport, const ProbeTarget& target, const Ipv4Prefix& subnet,
    const DetectionParams& params, Rng& rng, std::optional<RetransSchedule> schedule = {},
    const std::function<void(const SweepEntry&)>& on_entry = {});

} // namespace natscan
