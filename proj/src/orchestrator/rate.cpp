#include "natscan/orchestrator/rate.hpp"

#include <algorithm>
#include <cmath>

#include "natscan/error.hpp"

namespace natscan {

namespace {

constexpr double kEps = 1e-9;
constexpr Millis kWindow = seconds(60);
constexpr Millis kRetryStep = 100;
constexpr Millis kSearchLimit = seconds(4 * 3600);

} // namespace

TokenBucket::TokenBucket(double rate_pps, double burst, Millis start)
    : rate_(rate_pps), burst_(burst), level_(burst), last_(start) {
  if (!(rate_pps > 0) || !(burst >= 1))
    throw ScanError(ErrorCode::InvalidConfig, "token bucket needs rate > 0 and burst >= 1");
}

double TokenBucket::level(Millis t) const {
  if (t <= last_)
    return level_;
  return std::min(burst_, level_ + rate_ * static_cast<double>(t - last_) / 1000.0);
}

Millis TokenBucket::time_until(double tokens, Millis t) const {
  const Millis from = std::max(t, last_);
  const double have = level(from);
  if (have >= tokens - kEps)
    return t >= last_ || level_ >= tokens - kEps ? t : from;
  return from + static_cast<Millis>(std::ceil((tokens - have) * 1000.0 / rate_ - kEps));
}

bool TokenBucket::try_take(Millis t, double tokens) {
  if (level(t) < tokens - kEps)
    return false;
  charge(t, tokens);
  return true;
}

void TokenBucket::charge(Millis t, double tokens) {
  level_ = level(t) - tokens;
  last_ = std::max(last_, t);
}

std::optional<PolitenessViolation> audit_politeness(const std::vector<Millis>& times,
                                                    double rate_pps, double burst, Millis from) {
  const std::size_t n = times.size();
  // For a window [times[i], p] the slack is (idx_p + 1 - rate*p - burst) +
  // (rate*times[i] - i); keep the running maximum of the second term.
  std::vector<double> best(n);
  std::vector<std::size_t> arg(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = rate_pps * static_cast<double>(times[i]) / 1000.0 - static_cast<double>(i);
    if (i == 0 || g > best[i - 1]) {
      best[i] = g;
      arg[i] = i;
    } else {
      best[i] = best[i - 1];
      arg[i] = arg[i - 1];
    }
  }
  const double fixed_cap = rate_pps * static_cast<double>(kWindow) / 1000.0 + burst;
  std::size_t lo = 0;   // first index inside [p - 60 s, p]
  std::size_t old = 0;  // number of sends at or before p - 60 s
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (idx + 1 < n && times[idx + 1] == times[idx])
      continue; // evaluate each distinct time at its last index
    const Millis p = times[idx];
    while (times[lo] < p - kWindow)
      ++lo;
    while (old < n && times[old] <= p - kWindow)
      ++old;
    if (p < from)
      continue;
    const std::size_t in_window = idx - lo + 1;
    if (static_cast<double>(in_window) > fixed_cap + kEps)
      return PolitenessViolation{p - kWindow, p, in_window, fixed_cap};
    if (old == 0)
      continue;
    const double slack = static_cast<double>(idx + 1) -
                         rate_pps * static_cast<double>(p) / 1000.0 - burst + best[old - 1];
    if (slack > kEps) {
      const std::size_t i = arg[old - 1];
      const double allowed = rate_pps * static_cast<double>(p - times[i]) / 1000.0 + burst;
      return PolitenessViolation{times[i], p, idx - i + 1, allowed};
    }
  }
  return std::nullopt;
}

PoliteTransport::PoliteTransport(Transport& inner, double rate_pps, double burst)
    : inner_(inner), rate_(rate_pps), burst_(burst) {
  TokenBucket probe(rate_pps, burst); // validates the parameters
}

PoliteTransport::PerHost& PoliteTransport::host(Ipv4Addr dst) {
  auto it = hosts_.find(dst);
  if (it == hosts_.end())
    it = hosts_.emplace(dst, PerHost{TokenBucket(rate_, burst_, inner_.now()), {}, {}}).first;
  return it->second;
}

bool PoliteTransport::law_holds(const PerHost& h, const std::vector<Millis>& extra) const {
  std::vector<Millis> all = h.sent;
  all.insert(all.end(), h.slots.begin(), h.slots.end());
  all.insert(all.end(), extra.begin(), extra.end());
  std::sort(all.begin(), all.end());
  const Millis from = *std::min_element(extra.begin(), extra.end());
  return !audit_politeness(all, rate_, burst_, from);
}

void PoliteTransport::send(const Packet& pkt) {
  auto& h = host(pkt.dst_ip);
  Millis t = inner_.now();
  while (!h.slots.empty() && *h.slots.begin() < t - kWindow)
    h.slots.erase(h.slots.begin());
  if (!h.slots.empty() && *h.slots.begin() <= t) {
    h.slots.erase(h.slots.begin());
  } else {
    for (;;) {
      t = inner_.now();
      if (h.bucket.level(t) >= 1.0 - kEps && law_holds(h, {t})) {
        h.bucket.try_take(t);
        break;
      }
      Millis next = h.bucket.time_until(1.0, t);
      inner_.wait_until(next > t ? next : t + kRetryStep);
    }
  }
  inner_.send(pkt);
  h.sent.push_back(t);
}

Millis PoliteTransport::reserve_schedule(Ipv4Addr dst, std::span<const Millis> offsets) {
  if (offsets.empty())
    return inner_.now();
  std::vector<Millis> rel(offsets.begin(), offsets.end());
  std::sort(rel.begin(), rel.end());
  if (audit_politeness(rel, rate_, burst_))
    throw ScanError(ErrorCode::RateBudgetExceeded,
                    "a plan of " + std::to_string(rel.size()) + " sends over " +
                        std::to_string(rel.back() - rel.front()) +
                        " ms can never fit the per-host rate");
  auto& h = host(dst);
  const auto planned = static_cast<double>(rel.size());
  const double need = std::min(planned, burst_);
  const Millis now = inner_.now();
  Millis t0 = h.bucket.time_until(need, now);
  std::vector<Millis> abs(rel.size());
  for (;; t0 += kRetryStep) {
    if (t0 - now > kSearchLimit)
      throw ScanError(ErrorCode::RateBudgetExceeded,
                      "no admissible start for a plan to " + dst.to_string());
    for (std::size_t i = 0; i < rel.size(); ++i)
      abs[i] = t0 + rel[i];
    if (law_holds(h, abs))
      break;
  }
  h.bucket.charge(t0, planned);
  h.slots.insert(abs.begin(), abs.end());
  return t0;
}

std::size_t PoliteTransport::sent_to(Ipv4Addr dst) const {
  auto it = hosts_.find(dst);
  return it == hosts_.end() ? 0 : it->second.sent.size();
}

const std::vector<Millis>& PoliteTransport::send_times(Ipv4Addr dst) const {
  static const std::vector<Millis> none;
  auto it = hosts_.find(dst);
  return it == hosts_.end() ? none : it->second.sent;
}

} // namespace natscan
