#include "natscan/detect.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "natscan/error.hpp"

namespace natscan {

RetransSchedule measure_retrans(Transport& transport, const ProbeTarget& target,
                                const DetectionParams& params, Rng& rng) {
  for (int attempt = 0; attempt < std::max(1, params.syn_attempts); ++attempt) {
    Packet syn;
    syn.src_ip = transport.local_address();
    syn.dst_ip = target.ip;
    syn.src_port = random_ephemeral_port(rng);
    syn.dst_port = target.port;
    syn.flags = TcpFlags::syn();
    syn.seq = random_u32(rng);

    const Flow flow{target.ip, target.port, syn.src_port};
    const auto synacks = FlowFilter::of(flow).with_flags(TcpFlags::syn_ack());
    RstGuard guard = transport.suppress_local_rst(flow);
    transport.send(syn);
    auto first = transport.recv_match(synacks, params.synack_timeout_ms);
    if (!first)
      continue;

    std::set<int> offsets;
    const Millis end = first->at + seconds(params.observe_window_s);
    while (transport.now() < end) {
      auto again = transport.recv_match(synacks, end - transport.now());
      if (!again)
        break;
      const auto off = static_cast<int>(std::lround((again->at - first->at) / 1000.0));
      if (off > 0)
        offsets.insert(off);
    }
    Packet rst = syn;
    rst.flags = TcpFlags::rst();
    rst.seq = syn.seq + 1;
    transport.send(rst);
    guard.release();
    return {{offsets.begin(), offsets.end()}, false};
  }
  throw ScanError(ErrorCode::NoResponse, "no SYN-ACK from " + target.ip.to_string());
}

bool follows_doubling(const std::vector<int>& offsets) {
  if (offsets.empty() || offsets[0] <= 0)
    return false;
  int gap = offsets[0];
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    if (offsets[i] - offsets[i - 1] != 2 * gap)
      return false;
    gap *= 2;
  }
  return true;
}

RetransSchedule calibrate(const RetransSchedule& r) {
  if (follows_doubling(r.offsets_s))
    return {r.offsets_s, true};
  std::vector<std::vector<int>> fits;
  for (int delta : {+1, -1}) {
    auto shifted = r.offsets_s;
    for (auto& o : shifted)
      o += delta;
    if (follows_doubling(shifted))
      fits.push_back(std::move(shifted));
  }
  if (fits.size() == 1)
    return {fits.front(), true};
  return {r.offsets_s, false};
}

RetransSchedule measure_schedule(Transport& transport, const ProbeTarget& target,
                                 const DetectionParams& params, Rng& rng) {
  std::optional<RetransSchedule> best;
  std::optional<ScanError> failure;
  for (int i = 0; i < std::max(1, params.schedule_measurements); ++i) {
    try {
      auto r = calibrate(measure_retrans(transport, target, params, rng));
      const auto rank = [](const RetransSchedule& s) {
        return std::pair{s.calibrated, s.offsets_s.size()};
      };
      if (!best || rank(r) > rank(*best))
        best = std::move(r);
    } catch (const ScanError& e) {
      if (e.code() != ErrorCode::NoResponse)
        throw;
      failure = e;
    }
  }
  if (!best)
    throw *failure;
  return *best;
}

namespace {

std::uint16_t unused_port(std::set<std::uint16_t>& used, Rng& rng) {
  for (;;) {
    auto p = random_ephemeral_port(rng);
    if (used.insert(p).second)
      return p;
  }
}

} // namespace

PenetrationProbe penetration_probe(Transport& transport, const ProbeTarget& target,
                                   Ipv4Addr private_ip, const RetransSchedule& schedule,
                                   const DetectionParams& params, Rng& rng) {
  if (schedule.offsets_s.empty())
    throw ScanError(ErrorCode::InsufficientData, "empty retransmission schedule");
  PenetrationProbe out;
  out.ipids5 = probe_series(transport, target, params.ipids5, rng);
  const auto cls = classify_shared_ipid(out.ipids5, params.max_none, params.noise_threshold_pps);
  if (cls != IpidClass::SharedMonotonic)
    throw ScanError(ErrorCode::NoisySeriesAbort,
                    "ipids5 of " + target.ip.to_string() + " is " + std::string(to_string(cls)));
  out.noise = estimate_noise(out.ipids5);
  out.k = std::min(choose_m(out.noise), std::max(2, params.max_k));

  const int k = out.k;
  const Millis spacing = params.syn_spacing_ms;
  const int n6 = *std::max_element(schedule.offsets_s.begin(), schedule.offsets_s.end()) + 2;
  const Millis series_start = (k - 1) * spacing + params.post_send_delay_ms;
  const Millis rst_start = series_start + seconds(n6 - 1) + seconds(1);
  std::vector<Millis> plan;
  for (int j = 0; j < k; ++j)
    plan.push_back(j * spacing);
  for (int i = 0; i < n6; ++i)
    plan.push_back(series_start + seconds(i));
  for (int j = 0; j < k; ++j)
    plan.push_back(rst_start + j * spacing);
  const Millis t0 = transport.reserve_schedule(target.ip, plan);

  std::set<std::uint16_t> used;
  std::vector<Packet> syns;
  for (int j = 0; j < k; ++j) {
    Packet syn;
    syn.src_ip = private_ip;
    syn.dst_ip = target.ip;
    syn.src_port = unused_port(used, rng);
    syn.dst_port = target.port;
    syn.flags = TcpFlags::syn();
    syn.seq = random_u32(rng);
    syn.ipid = static_cast<std::uint16_t>(rng());
    transport.wait_until(t0 + j * spacing);
    transport.send(syn);
    syns.push_back(syn);
  }

  ProbeParams p6{n6, 1, params.ipids5.timeout_s};
  out.ipids6 = collect_series(transport, target, p6, t0 + series_start, rng, t0 + rst_start);

  for (int j = 0; j < k; ++j) {
    Packet rst = syns[static_cast<std::size_t>(j)];
    rst.flags = TcpFlags::rst();
    rst.seq = rst.seq + 1;
    rst.ipid = static_cast<std::uint16_t>(rng());
    transport.wait_until(t0 + rst_start + j * spacing);
    transport.send(rst);
  }
  return out;
}

namespace {

struct Bands {
  Band absent;
  Band present;
};

Bands decision_bands(int k, double rate, int window_s, int probes_lo, int probes_hi,
                     const DetectionParams& params) {
  const int ceiling = noise_allowance(rate, window_s, params.noise_z) + 1;
  const auto tolerated_loss = static_cast<int>(std::floor(k * params.loss_fraction));
  // Both hypotheses carry the same expected noise; split halfway between
  // the probes alone and the probes plus the surviving retransmissions.
  const auto split = static_cast<std::int64_t>(
      std::floor(probes_lo + rate * window_s + (k - tolerated_loss) / 2.0));
  Bands b;
  b.present = {probes_lo, std::min<std::int64_t>(probes_hi + ceiling, split)};
  b.absent = {split + 1, k + probes_hi + ceiling};
  return b;
}

PenetrationOutcome classify(std::int64_t inc, const Bands& b) {
  if (b.absent.contains(inc))
    return PenetrationOutcome::HoleAbsent;
  if (b.present.contains(inc))
    return PenetrationOutcome::HolePresent;
  return PenetrationOutcome::Inconclusive;
}

} // namespace

PenetrationVerdict decide(const IpidSeries& ipids6, const RetransSchedule& schedule, int k,
                          const NoiseEstimate& noise, const DetectionParams& params,
                          std::vector<OffsetReading>* readings) {
  PenetrationVerdict v;
  v.schedule = schedule;
  v.detection_series = ipids6;
  v.k = k;
  v.outcome = PenetrationOutcome::Inconclusive;

  const int n = static_cast<int>(ipids6.size());
  const std::set<int> offsets(schedule.offsets_s.begin(), schedule.offsets_s.end());
  std::vector<int> checked;
  for (int t : offsets)
    if (t >= 1 && t <= n - 1)
      checked.push_back(t);
  if (static_cast<int>(checked.size()) < std::max(1, params.min_checked_offsets))
    return v;

  auto sample = [&](int i) -> std::optional<std::uint16_t> {
    if (i < 0 || i >= n)
      return std::nullopt;
    return ipids6[static_cast<std::size_t>(i)];
  };
  auto read = [&](int t, int from, int to, int window_s, int probes_lo) {
    OffsetReading r{t, from, to, ipid_delta(*sample(from), *sample(to)),
                    PenetrationOutcome::Inconclusive};
    r.outcome = classify(r.increment, decision_bands(k, noise.rate_pps, window_s, probes_lo,
                                                     window_s, params));
    return r;
  };

  std::vector<OffsetReading> all;
  for (int t : checked) {
    std::optional<OffsetReading> strict;
    if (sample(t - 1) && sample(t)) {
      strict = read(t, t - 1, t, 1, 1);
      if (strict->outcome != PenetrationOutcome::Inconclusive || !params.neighbor_extension) {
        all.push_back(*strict);
        continue;
      }
    }
    std::vector<OffsetReading> wide;
    if (params.neighbor_extension) {
      // A widened window must not swallow a neighbouring retransmission.
      if (sample(t - 1) && sample(t + 1) && !offsets.contains(t + 1))
        wide.push_back(read(t, t - 1, t + 1, 2, sample(t) ? 2 : 1));
      if (sample(t - 2) && sample(t) && !offsets.contains(t - 1))
        wide.push_back(read(t, t - 2, t, 2, sample(t - 1) ? 2 : 1));
    }
    if (wide.empty()) {
      if (!strict)
        throw ScanError(ErrorCode::MissingSamples,
                        "no usable samples around offset " + std::to_string(t));
      all.push_back(*strict);
      continue;
    }
    OffsetReading chosen = wide.front();
    if (wide.size() == 2) {
      const auto a = wide[0].outcome;
      const auto b = wide[1].outcome;
      if (a == PenetrationOutcome::Inconclusive)
        chosen = wide[1];
      else if (b != PenetrationOutcome::Inconclusive && a != b)
        chosen.outcome = PenetrationOutcome::Inconclusive;
    }
    all.push_back(chosen);
  }

  const auto agree = [&](PenetrationOutcome o) {
    return std::all_of(all.begin(), all.end(), [o](const auto& r) { return r.outcome == o; });
  };
  if (agree(PenetrationOutcome::HoleAbsent))
    v.outcome = PenetrationOutcome::HoleAbsent;
  else if (agree(PenetrationOutcome::HolePresent))
    v.outcome = PenetrationOutcome::HolePresent;
  if (readings)
    *readings = std::move(all);
  return v;
}

std::vector<SweepEntry> sweep_private_range(Transport& transport, const ProbeTarget& target,
                                            const Ipv4Prefix& subnet,
                                            const DetectionParams& params, Rng& rng,
                                            std::optional<RetransSchedule> schedule,
                                            const std::function<void(const SweepEntry&)>& on_entry) {
  if (!schedule)
    schedule = measure_schedule(transport, target, params, rng);
  std::vector<SweepEntry> out;
  for (std::uint64_t i = 0; i < subnet.size(); ++i) {
    SweepEntry e;
    e.private_ip = subnet.at(i);
    while (e.attempts < std::max(1, params.attempts)) {
      ++e.attempts;
      e.probe = {};
      e.error.clear();
      e.verdict = {};
      e.verdict.schedule = *schedule;
      try {
        e.probe = penetration_probe(transport, target, e.private_ip, *schedule, params, rng);
        e.verdict = decide(e.probe.ipids6, *schedule, e.probe.k, e.probe.noise, params);
      } catch (const ScanError& err) {
        e.error = err.what();
        e.verdict.outcome = PenetrationOutcome::Inconclusive;
        e.verdict.k = e.probe.k;
        e.verdict.detection_series = e.probe.ipids6;
      }
      if (e.verdict.outcome != PenetrationOutcome::Inconclusive)
        break;
    }
    e.verdict.probed_private_ip = e.private_ip;
    if (on_entry)
      on_entry(e);
    out.push_back(std::move(e));
  }
  return out;
}

} // namespace natscan
