#pragma once

#include <deque>
#include <map>
#include <memory>
#include <vector>

#include "natscan/sim/simulator.hpp"
#include "natscan/transport/trace.hpp"
#include "natscan/transport/transport.hpp"

namespace natscan {

/// Transport backed by a Simulator. Waiting advances virtual time. Inbound
/// SYN-ACKs on unguarded flows are answered by a simulated kernel RST, as a
/// real stack would.
class SimTransport final : public Transport {
public:
  explicit SimTransport(sim::Simulator& sim,
                        TransportCaps caps = {.can_spoof_source = true,
                                              .accepts_unsolicited_synack = true});
  /// Takes ownership of the simulator.
  explicit SimTransport(std::unique_ptr<sim::Simulator> sim,
                        TransportCaps caps = {.can_spoof_source = true,
                                              .accepts_unsolicited_synack = true});
  SimTransport(const SimTransport&) = delete;
  SimTransport& operator=(const SimTransport&) = delete;
  ~SimTransport() override;

  /// Every injected and received packet is appended to `out` while set.
  void record_to(std::vector<TraceRecord>* out) { trace_ = out; }

  TransportCaps caps() const override { return caps_; }
  Ipv4Addr local_address() const override { return sim_.config().scanner_ip; }
  Millis now() const override { return sim_.now(); }
  void send(const Packet& pkt) override;
  std::optional<Inbound> recv_match(const FlowFilter& filter, Millis timeout) override;
  void wait_until(Millis t) override;
  RstGuard suppress_local_rst(const Flow& flow) override;

  sim::Simulator& simulator() { return sim_; }
  std::size_t queued() const { return inbox_.size(); }

private:
  void on_arrival(Millis at, const Packet& pkt);
  void purge();

  std::unique_ptr<sim::Simulator> owned_;
  sim::Simulator& sim_;
  TransportCaps caps_;
  std::deque<Inbound> inbox_;
  std::map<Flow, int> guarded_;
  std::vector<TraceRecord>* trace_ = nullptr;
};

} // namespace natscan
