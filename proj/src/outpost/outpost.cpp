#include "natscan/outpost.hpp"

#include <algorithm>
#include <cmath>

#include "natscan/error.hpp"

namespace natscan {

int choose_m(const NoiseEstimate& noise) {
  const double rate = std::max(0.0, noise.rate_pps);
  return std::max(2, 2 * static_cast<int>(std::ceil(rate - 1e-9)));
}

std::string_view to_string(SpoofOutcome o) {
  switch (o) {
  case SpoofOutcome::SpoofReceived: return "SpoofReceived";
  case SpoofOutcome::SpoofFiltered: return "SpoofFiltered";
  case SpoofOutcome::Inconclusive: return "Inconclusive";
  }
  return "?";
}

SpoofBands spoof_bands(const SpoofCheckParams& p, int probes_lo, int probes_hi, double span_s) {
  const int allow = noise_allowance(p.noise_rate_pps, span_s, p.noise_z);
  const auto tolerated_loss = static_cast<int>(std::floor(p.m * p.loss_fraction));
  // A received reading must rise above what our probes and the noise
  // allowance alone explain; the slack widens the filtered band only where
  // it does not collide with that.
  SpoofBands b;
  b.received = {std::max(p.m + probes_lo - tolerated_loss, probes_hi + allow + 1),
                p.m + probes_hi + p.slack + allow};
  b.filtered = {probes_lo, std::min<std::int64_t>(probes_hi + p.slack + allow,
                                                  b.received.lo - 1)};
  return b;
}

SpoofOutcome classify_increment(std::int64_t increment, const SpoofBands& bands) {
  if (bands.received.contains(increment))
    return SpoofOutcome::SpoofReceived;
  if (bands.filtered.contains(increment))
    return SpoofOutcome::SpoofFiltered;
  return SpoofOutcome::Inconclusive;
}

SpoofTimeline spoof_timeline(const SpoofCheckParams& p, Millis pre_start) {
  SpoofTimeline t;
  for (int i = 0; i < p.pre_series.n; ++i)
    t.pre.push_back(pre_start + i * seconds(p.pre_series.interval_s));
  const Millis first = t.pre.back() + p.lead_ms;
  for (int j = 0; j < p.m; ++j)
    t.burst.push_back(p.m > 1 ? first + static_cast<Millis>(j) * p.spread_ms / (p.m - 1)
                              : first);
  const Millis post_start = t.burst.back() + p.tail_ms;
  for (int i = 0; i < p.post_series.n; ++i)
    t.post.push_back(post_start + i * seconds(p.post_series.interval_s));
  return t;
}

SpoofCheckResult evaluate_spoof(const TimedSeries& pre, const TimedSeries& post,
                                const SpoofCheckParams& p) {
  std::optional<std::size_t> i;
  for (std::size_t k = pre.series.size(); k-- > 0;)
    if (pre.series[k]) {
      i = k;
      break;
    }
  std::optional<std::size_t> j;
  for (std::size_t k = 0; k < post.series.size(); ++k)
    if (post.series[k]) {
      j = k;
      break;
    }
  if (!i || !j)
    throw ScanError(ErrorCode::MissingSamples, "no answered sample on one side of the burst");

  SpoofCheckResult r;
  r.m = p.m;
  r.pre = pre;
  r.post = post;
  r.increment = ipid_delta(*pre.series[*i], *post.series[*j]);
  const Millis t_pre = pre.start + static_cast<Millis>(*i) * seconds(pre.series.interval_s());
  const Millis t_post = post.start + static_cast<Millis>(*j) * seconds(post.series.interval_s());
  r.span_s = static_cast<double>(t_post - t_pre) / 1000.0;
  // Every probe after the pre boundary up to the post boundary may have
  // produced an RST, but only the last one certainly did.
  const int probes_hi = static_cast<int>(pre.series.size() - 1 - *i + *j + 1);
  r.bands = spoof_bands(p, 1, probes_hi, r.span_s);
  r.outcome = classify_increment(r.increment, r.bands);
  return r;
}

void send_spoofed_burst(Transport& transport, const ProbeTarget& target, Ipv4Addr spoofed_src,
                        const std::vector<Millis>& times, Rng& rng) {
  Packet syn;
  syn.src_ip = spoofed_src;
  syn.dst_ip = target.ip;
  syn.src_port = random_ephemeral_port(rng);
  syn.dst_port = target.port;
  syn.flags = TcpFlags::syn();
  syn.seq = random_u32(rng);
  syn.ipid = static_cast<std::uint16_t>(rng());
  for (auto at : times) {
    transport.wait_until(at);
    transport.send(syn);
    syn.seq += 1u + static_cast<std::uint32_t>(uniform_below(rng, 1u << 20));
    ++syn.ipid;
  }
}

namespace {

std::vector<Millis> relative(std::initializer_list<const std::vector<Millis>*> parts,
                             Millis origin) {
  std::vector<Millis> out;
  for (const auto* part : parts)
    for (auto t : *part)
      out.push_back(t - origin);
  return out;
}

void shift(std::vector<Millis>& v, Millis by) {
  for (auto& t : v)
    t += by;
}

} // namespace

SpoofCheckResult spoof_check(Transport& transport, const ProbeTarget& target,
                             Ipv4Addr spoofed_src, const SpoofCheckParams& p, Rng& rng,
                             const std::optional<TimedSeries>& pre, bool reserve) {
  if (p.m < 1)
    throw std::invalid_argument("spoof_check needs m >= 1");
  TimedSeries before;
  SpoofTimeline plan;
  if (pre) {
    plan = spoof_timeline(p, pre->start);
    before = *pre;
    if (reserve) {
      const Millis t0 =
          transport.reserve_schedule(target.ip, relative({&plan.burst, &plan.post}, plan.burst[0]));
      if (t0 > plan.burst[0]) {
        const Millis late = t0 - plan.burst[0];
        shift(plan.burst, late);
        shift(plan.post, late);
      }
    }
  } else {
    Millis start = transport.now();
    if (reserve) {
      plan = spoof_timeline(p, 0);
      start = transport.reserve_schedule(target.ip,
                                         relative({&plan.pre, &plan.burst, &plan.post}, 0));
    }
    plan = spoof_timeline(p, start);
    before.start = start;
    before.series = collect_series(transport, target, p.pre_series, start, rng,
                                   plan.pre.back() + p.lead_ms);
  }

  send_spoofed_burst(transport, target, spoofed_src, plan.burst, rng);

  TimedSeries after;
  after.start = plan.post.front();
  after.series = collect_series(transport, target, p.post_series, after.start, rng,
                                plan.post.back() + p.lead_ms);
  auto r = evaluate_spoof(before, after, p);
  r.spoofed_src = spoofed_src;
  return r;
}

LocalCheckResult local_check(Transport& transport, const ProbeTarget& target,
                             Ipv4Addr private_src, const SpoofCheckParams& p, Rng& rng,
                             const std::optional<TimedSeries>& pre, bool reserve) {
  LocalCheckResult r;
  r.first = spoof_check(transport, target, private_src, p, rng, pre, reserve);
  r.outcome = r.first.outcome;
  if (r.outcome != SpoofOutcome::SpoofReceived)
    return r;
  r.confirmation = spoof_check(transport, target, private_src, p, rng, r.first.post, reserve);
  if (r.confirmation->outcome != SpoofOutcome::SpoofReceived)
    r.outcome = SpoofOutcome::Inconclusive;
  return r;
}

namespace {

OutpostVerdict run_spoof_chain(Transport& transport, const ProbeTarget& target,
                               const OutpostParams& params, const SpoofCheckParams& sp, Rng& rng,
                               OutpostEvidence& ev) {
  // The three checks chain into one timed plan: each post-series is the
  // next check's pre-series.
  const auto s1 = spoof_timeline(sp, 0);
  const auto s2 = spoof_timeline(sp, s1.post.front());
  const auto s3 = spoof_timeline(sp, s2.post.front());
  const Millis start = transport.reserve_schedule(
      target.ip,
      relative({&s1.pre, &s1.burst, &s1.post, &s2.burst, &s2.post, &s3.burst, &s3.post}, 0));
  transport.wait_until(start);

  try {
    auto pub = spoof_check(transport, target, params.public_spoof_addr, sp, rng, std::nullopt,
                           false);
    ev.checks.push_back(pub);
    if (pub.outcome == SpoofOutcome::SpoofFiltered)
      return OutpostVerdict::SpoofedPublicFiltered;
    if (pub.outcome == SpoofOutcome::Inconclusive)
      return OutpostVerdict::Inconclusive;
    auto local = local_check(transport, target, params.private_spoof_addr, sp, rng, pub.post,
                             false);
    ev.checks.push_back(local.first);
    if (local.confirmation)
      ev.checks.push_back(*local.confirmation);
    switch (local.outcome) {
    case SpoofOutcome::SpoofFiltered: return OutpostVerdict::SpoofedPrivateFiltered;
    case SpoofOutcome::Inconclusive: return OutpostVerdict::Inconclusive;
    case SpoofOutcome::SpoofReceived: return OutpostVerdict::QualifiedOutpost;
    }
  } catch (const ScanError& e) {
    if (e.code() != ErrorCode::MissingSamples)
      throw;
  }
  return OutpostVerdict::Inconclusive;
}

} // namespace

OutpostResult select_outpost(Transport& transport, const ProbeTarget& target,
                             const OutpostParams& params, Rng& rng) {
  OutpostResult out;
  auto& ev = out.evidence;
  ev.ipids0 = probe_series(transport, target, params.ipids0, rng);
  const auto cls = classify_shared_ipid(ev.ipids0, params.max_none, params.noise_threshold_pps);
  ev.ipid_class = cls;
  switch (cls) {
  case IpidClass::TooManyNone: out.verdict = OutpostVerdict::NoRstResponse; return out;
  case IpidClass::NotMonotonic: out.verdict = OutpostVerdict::NotSharedIpid; return out;
  case IpidClass::TooNoisy:
    ev.noise = estimate_noise(ev.ipids0);
    out.verdict = OutpostVerdict::TooNoisy;
    return out;
  case IpidClass::SharedMonotonic: break;
  }
  ev.noise = estimate_noise(ev.ipids0);
  ev.m = params.fixed_m ? *params.fixed_m
                        : std::min(choose_m(*ev.noise), std::max(2, params.max_m));

  SpoofCheckParams sp = params.spoof;
  sp.m = ev.m;
  sp.noise_rate_pps = ev.noise->rate_pps;

  for (ev.attempts = 1;; ++ev.attempts) {
    ev.checks.clear();
    out.verdict = run_spoof_chain(transport, target, params, sp, rng, ev);
    if (out.verdict == OutpostVerdict::QualifiedOutpost || ev.attempts >= params.attempts)
      break;
  }
  return out;
}

} // namespace natscan
