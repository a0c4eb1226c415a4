#pragma once

#include <functional>
#include <optional>
#include <span>
#include <utility>

#include "natscan/ipv4.hpp"
#include "natscan/packet.hpp"

namespace natscan {

struct TransportCaps {
  bool can_spoof_source = false;
  bool accepts_unsolicited_synack = false;
};

/// A packet received by the scanner, with its arrival time.
struct Inbound {
  Millis at = 0;
  Packet packet;
};

/// Keeps the scanner's kernel from answering SYN-ACKs on one flow with RST.
/// Released on destruction.
class RstGuard {
public:
  RstGuard() = default;
  explicit RstGuard(std::function<void()> release) : release_(std::move(release)) {}
  RstGuard(RstGuard&& other) noexcept : release_(std::exchange(other.release_, {})) {}
  RstGuard& operator=(RstGuard&& other) noexcept {
    if (this != &other) {
      release();
      release_ = std::exchange(other.release_, {});
    }
    return *this;
  }
  RstGuard(const RstGuard&) = delete;
  RstGuard& operator=(const RstGuard&) = delete;
  ~RstGuard() { release(); }

  bool active() const { return static_cast<bool>(release_); }
  void release() {
    if (auto f = std::exchange(release_, {}))
      f();
  }

private:
  std::function<void()> release_;
};

/// The scanner's view of the network. One handle per scan pipeline; handles
/// may move between threads but are never shared.
class Transport {
public:
  virtual ~Transport() = default;

  virtual TransportCaps caps() const = 0;
  virtual Ipv4Addr local_address() const = 0;
  virtual Millis now() const = 0;

  /// Throws ScanError(SpoofUnsupported) for a foreign source address on a
  /// backend that cannot spoof.
  virtual void send(const Packet& pkt) = 0;

  /// The first packet matching `filter` that is already queued or arrives
  /// before now() + timeout. On success the clock sits at the arrival time
  /// (or stays put for a queued packet); on timeout it sits at the deadline.
  virtual std::optional<Inbound> recv_match(const FlowFilter& filter, Millis timeout) = 0;

  /// Lets time pass until t (no-op if t <= now()).
  virtual void wait_until(Millis t) = 0;

  virtual RstGuard suppress_local_rst(const Flow& flow) = 0;

  /// Announces that packets to `dst` will be sent at t0 + offsets[i] and
  /// returns the earliest admissible t0 >= now(). Rate-limiting wrappers use
  /// this to admit timed phases as a whole; plain backends return now().
  virtual Millis reserve_schedule(Ipv4Addr dst, std::span<const Millis> offsets) {
    (void)dst;
    (void)offsets;
    return now();
  }
};

/// Throws SpoofUnsupported if `pkt` needs a capability `t` lacks.
void check_spoof_allowed(const Transport& t, const Packet& pkt);

} // namespace natscan
