#pragma once

#include <map>
#include <set>
#include <optional>
#include <vector>

#include "natscan/transport/transport.hpp"

namespace natscan {

/// Refill `rate` tokens per second up to `burst`; starts full. The level may
/// go negative when a reserved plan is charged up front.
class TokenBucket {
public:
  TokenBucket(double rate_pps, double burst, Millis start = 0);

  double level(Millis t) const;
  /// Earliest time >= t at which level() reaches `tokens`.
  Millis time_until(double tokens, Millis t) const;
  bool try_take(Millis t, double tokens = 1.0);
  void charge(Millis t, double tokens);

  double rate() const { return rate_; }
  double burst() const { return burst_; }

private:
  double rate_;
  double burst_;
  double level_;
  Millis last_;
};

struct PolitenessViolation {
  Millis window_start = 0;
  Millis window_end = 0;
  std::size_t count = 0;
  double allowed = 0.0;
};

/// Checks that every window of at least 60 s ending at a send holds no more
/// than rate * W + burst sends. Only windows ending at or after `from` are
/// examined. `times` must be sorted.
std::optional<PolitenessViolation> audit_politeness(const std::vector<Millis>& times,
                                                    double rate_pps, double burst,
                                                    Millis from = 0);

/// Per-destination rate limiting in front of another transport. Ordinary
/// sends wait for a token. Timed phases announced through reserve_schedule()
/// are admitted as a whole: when the bucket alone funds them, or when it is
/// full and the sliding-window law holds for every planned send; the plan is
/// charged up front and later ordinary sends wait until the debt is repaid.
class PoliteTransport final : public Transport {
public:
  PoliteTransport(Transport& inner, double rate_pps, double burst);

  TransportCaps caps() const override { return inner_.caps(); }
  Ipv4Addr local_address() const override { return inner_.local_address(); }
  Millis now() const override { return inner_.now(); }
  void send(const Packet& pkt) override;
  std::optional<Inbound> recv_match(const FlowFilter& filter, Millis timeout) override {
    return inner_.recv_match(filter, timeout);
  }
  void wait_until(Millis t) override { inner_.wait_until(t); }
  RstGuard suppress_local_rst(const Flow& flow) override {
    return inner_.suppress_local_rst(flow);
  }
  Millis reserve_schedule(Ipv4Addr dst, std::span<const Millis> offsets) override;

  std::size_t sent_to(Ipv4Addr dst) const;
  const std::vector<Millis>& send_times(Ipv4Addr dst) const;

private:
  struct PerHost {
    TokenBucket bucket;
    std::vector<Millis> sent;
    std::multiset<Millis> slots;
  };

  PerHost& host(Ipv4Addr dst);
  bool law_holds(const PerHost& h, const std::vector<Millis>& extra) const;

  Transport& inner_;
  double rate_;
  double burst_;
  std::map<Ipv4Addr, PerHost> hosts_;
};

} // namespace natscan
