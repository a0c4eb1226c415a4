#include "natscan/probe.hpp"

#include <cmath>
#include <vector>

#include "natscan/error.hpp"

namespace natscan {

std::string_view to_string(IpidClass c) {
  switch (c) {
  case IpidClass::SharedMonotonic: return "SharedMonotonic";
  case IpidClass::TooManyNone: return "TooManyNone";
  case IpidClass::NotMonotonic: return "NotMonotonic";
  case IpidClass::TooNoisy: return "TooNoisy";
  }
  return "?";
}

std::optional<std::uint16_t> probe_once(Transport& transport, const ProbeTarget& target,
                                        Rng& rng, Millis timeout) {
  Packet pkt;
  pkt.src_ip = transport.local_address();
  pkt.dst_ip = target.ip;
  pkt.src_port = random_ephemeral_port(rng);
  pkt.dst_port = target.port;
  pkt.flags = TcpFlags::syn_ack();
  pkt.seq = random_u32(rng);
  pkt.ack = random_u32(rng);
  transport.send(pkt);
  if (timeout <= 0)
    return std::nullopt;
  auto filter = FlowFilter::of({target.ip, target.port, pkt.src_port});
  auto reply = transport.recv_match(filter.with_flags(TcpFlags::rst()), timeout);
  if (!reply)
    return std::nullopt;
  return reply->packet.ipid;
}

IpidSeries collect_series(Transport& transport, const ProbeTarget& target,
                          const ProbeParams& params, Millis start, Rng& rng,
                          std::optional<Millis> stop) {
  const Millis interval = seconds(params.interval_s);
  std::vector<std::optional<std::uint16_t>> values;
  values.reserve(static_cast<std::size_t>(params.n));
  for (int i = 0; i < params.n; ++i) {
    const Millis at = start + i * interval;
    transport.wait_until(at);
    Millis limit = at + seconds(params.timeout_s);
    if (i + 1 < params.n)
      limit = std::min(limit, at + interval);
    else if (stop)
      limit = std::min(limit, *stop);
    values.push_back(probe_once(transport, target, rng, limit - transport.now()));
  }
  return IpidSeries(params.interval_s, values);
}

IpidSeries probe_series(Transport& transport, const ProbeTarget& target,
                        const ProbeParams& params, Rng& rng) {
  std::vector<Millis> plan;
  for (int i = 0; i < params.n; ++i)
    plan.push_back(i * seconds(params.interval_s));
  const Millis start = transport.reserve_schedule(target.ip, plan);
  return collect_series(transport, target, params, start, rng);
}

NoiseEstimate estimate_noise(const IpidSeries& series) {
  std::optional<std::size_t> prev;
  double noise = 0.0;
  std::int64_t spanned = 0;
  int pairs = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (!series[i])
      continue;
    if (prev) {
      const auto gap = static_cast<std::int64_t>(i - *prev);
      noise += static_cast<double>(ipid_delta(*series[*prev], *series[i])) -
               static_cast<double>(gap);
      spanned += gap * series.interval_s();
      ++pairs;
    }
    prev = i;
  }
  if (pairs == 0)
    throw ScanError(ErrorCode::InsufficientData,
                    "noise estimate needs at least two answered probes");
  return {std::max(0.0, noise / static_cast<double>(spanned)), pairs};
}

IpidClass classify_shared_ipid(const IpidSeries& series, int max_none, double max_noise_pps) {
  if (static_cast<int>(series.none_count()) > max_none)
    return IpidClass::TooManyNone;
  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (!series[i])
      continue;
    if (prev) {
      const auto a = *series[*prev];
      const auto b = *series[i];
      if (!is_forward_step(a, b))
        return IpidClass::NotMonotonic;
      // Bridging lost samples: bound what the hidden interval may contain.
      const auto gap = static_cast<double>(i - *prev);
      if (gap > 1 && ipid_delta(a, b) > gap * (max_noise_pps * series.interval_s() + 1) + 2)
        return IpidClass::NotMonotonic;
    }
    prev = i;
  }
  if (!prev || series.size() - series.none_count() < 2)
    return IpidClass::TooManyNone;
  if (estimate_noise(series).rate_pps > max_noise_pps)
    return IpidClass::TooNoisy;
  return IpidClass::SharedMonotonic;
}

int noise_allowance(double rate_pps, double span_s, double z) {
  const double lambda = std::max(0.0, rate_pps * span_s);
  return static_cast<int>(std::ceil(lambda + z * std::sqrt(lambda) - 1e-9));
}

} // namespace natscan
