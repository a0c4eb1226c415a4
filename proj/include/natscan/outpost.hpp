#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "natscan/probe.hpp"
#include "natscan/verdict.hpp"

namespace natscan {

/// M = max(2, 2 * ceil(rate)).
int choose_m(const NoiseEstimate& noise);

struct SpoofCheckParams {
  int m = 2;
  ProbeParams pre_series{4, 1, 1};
  ProbeParams post_series{4, 1, 1};
  int slack = 1;
  /// Background rate the tolerances are scaled by (from ipids0).
  double noise_rate_pps = 0.0;
  /// Standard deviations of Poisson noise tolerated on top of the mean.
  double noise_z = 1.0;
  /// Lost spoofed SYNs tolerated as a fraction of M (rounded down).
  double loss_fraction = 0.25;
  // Burst placement: first spoofed SYN lead_ms after the last pre-series
  // probe, M SYNs spread over spread_ms, first post-series probe tail_ms
  // after the last SYN.
  int lead_ms = 100;
  int spread_ms = 50;
  int tail_ms = 100;
};

enum class SpoofOutcome { SpoofReceived, SpoofFiltered, Inconclusive };

std::string_view to_string(SpoofOutcome o);

/// Closed interval of counter increments.
struct Band {
  std::int64_t lo = 0;
  std::int64_t hi = -1;

  bool contains(std::int64_t x) const { return lo <= x && x <= hi; }
  friend bool operator==(const Band&, const Band&) = default;
};

struct SpoofBands {
  Band received;
  Band filtered;
};

/// Bands for a boundary pair `span_s` seconds apart with between `probes_lo`
/// and `probes_hi` of our own probes' RSTs in it.
SpoofBands spoof_bands(const SpoofCheckParams& p, int probes_lo, int probes_hi, double span_s);

SpoofOutcome classify_increment(std::int64_t increment, const SpoofBands& bands);

struct TimedSeries {
  Millis start = 0;
  IpidSeries series;
};

/// Send times of one check: pre-series, burst, post-series.
struct SpoofTimeline {
  std::vector<Millis> pre;
  std::vector<Millis> burst;
  std::vector<Millis> post;
};

SpoofTimeline spoof_timeline(const SpoofCheckParams& p, Millis pre_start);

struct SpoofCheckResult {
  SpoofOutcome outcome = SpoofOutcome::Inconclusive;
  Ipv4Addr spoofed_src;
  int m = 0;
  TimedSeries pre;
  TimedSeries post;
  std::int64_t increment = 0;
  double span_s = 0.0;
  SpoofBands bands;
};

/// Boundary increment between the last answered pre-series sample and the
/// first answered post-series sample. Throws ScanError(MissingSamples) if
/// either series has no answered sample.
SpoofCheckResult evaluate_spoof(const TimedSeries& pre, const TimedSeries& post,
                                const SpoofCheckParams& p);

/// Sends M duplicated SYNs (one 4-tuple, distinct sequence numbers) from
/// `spoofed_src` at the given times.
void send_spoofed_burst(Transport& transport, const ProbeTarget& target, Ipv4Addr spoofed_src,
                        const std::vector<Millis>& times, Rng& rng);

/// pre-series, burst, post-series. With `pre` given, that series is reused
/// and only the burst and post-series are sent. With `reserve`, the rate
/// budget for the sends is reserved first.
SpoofCheckResult spoof_check(Transport& transport, const ProbeTarget& target,
                             Ipv4Addr spoofed_src, const SpoofCheckParams& p, Rng& rng,
                             const std::optional<TimedSeries>& pre = std::nullopt,
                             bool reserve = true);

struct LocalCheckResult {
  SpoofOutcome outcome = SpoofOutcome::Inconclusive;
  SpoofCheckResult first;
  std::optional<SpoofCheckResult> confirmation;
};

/// spoof_check with a private source; a SpoofReceived is repeated once and
/// stands only if the repetition agrees.
LocalCheckResult local_check(Transport& transport, const ProbeTarget& target,
                             Ipv4Addr private_src, const SpoofCheckParams& p, Rng& rng,
                             const std::optional<TimedSeries>& pre = std::nullopt,
                             bool reserve = true);

struct OutpostParams {
  ProbeParams ipids0{10, 1, 1};
  int max_none = 2;
  double noise_threshold_pps = 6.0;
  Ipv4Addr public_spoof_addr{203, 0, 113, 7};
  Ipv4Addr private_spoof_addr{192, 168, 1, 1};
  /// Template for every spoof check; m and noise_rate_pps are filled in.
  SpoofCheckParams spoof;
  /// Upper limit on M so the checks fit the per-host rate budget.
  int max_m = 10;
  /// Use this M instead of deriving it from the measured noise.
  std::optional<int> fixed_m;
  /// Runs of the spoof-check chain; a run short of QualifiedOutpost is
  /// repeated, and the last run decides.
  int attempts = 2;
};

struct OutpostEvidence {
  IpidSeries ipids0;
  std::optional<IpidClass> ipid_class;
  std::optional<NoiseEstimate> noise;
  int m = 0;
  std::vector<SpoofCheckResult> checks; // public, private, confirmation
  int attempts = 0;
};

struct OutpostResult {
  OutpostVerdict verdict = OutpostVerdict::Inconclusive;
  OutpostEvidence evidence;
};

/// ipids0 -> shared-counter check -> spoofed public source -> spoofed
/// private source (twice). The first failing stage names the verdict.
OutpostResult select_outpost(Transport& transport, const ProbeTarget& target,
                             const OutpostParams& params, Rng& rng);

} // namespace natscan
