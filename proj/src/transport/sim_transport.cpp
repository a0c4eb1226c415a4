#include "natscan/transport/sim_transport.hpp"

#include "natscan/error.hpp"

namespace natscan {

namespace {

constexpr Millis kInboxLifetime = seconds(60);

} // namespace

void check_spoof_allowed(const Transport& t, const Packet& pkt) {
  const auto caps = t.caps();
  if (pkt.src_ip != t.local_address() && !caps.can_spoof_source)
    throw ScanError(ErrorCode::SpoofUnsupported,
                    "backend cannot send from " + pkt.src_ip.to_string());
  if (pkt.flags == TcpFlags::syn_ack() && !caps.accepts_unsolicited_synack)
    throw ScanError(ErrorCode::CapabilityMissing,
                    "backend cannot send unsolicited SYN-ACK packets");
}

SimTransport::SimTransport(sim::Simulator& sim, TransportCaps caps) : sim_(sim), caps_(caps) {
  sim_.set_scanner_sink([this](Millis at, const Packet& pkt) { on_arrival(at, pkt); });
}

SimTransport::SimTransport(std::unique_ptr<sim::Simulator> sim, TransportCaps caps)
    : owned_(std::move(sim)), sim_(*owned_), caps_(caps) {
  sim_.set_scanner_sink([this](Millis at, const Packet& pkt) { on_arrival(at, pkt); });
}

SimTransport::~SimTransport() { sim_.set_scanner_sink({}); }

void SimTransport::send(const Packet& pkt) {
  check_spoof_allowed(*this, pkt);
  if (trace_)
    trace_->push_back({pkt.dst_ip, sim_.now(), TraceDirection::Out, false, pkt});
  sim_.inject(pkt, sim::Origin::Scanner);
}

void SimTransport::on_arrival(Millis at, const Packet& pkt) {
  if (trace_)
    trace_->push_back({pkt.src_ip, at, TraceDirection::In, false, pkt});
  inbox_.push_back({at, pkt});
  if (pkt.flags != TcpFlags::syn_ack())
    return;
  const Flow flow{pkt.src_ip, pkt.src_port, pkt.dst_port};
  if (guarded_.contains(flow))
    return;
  // Nothing on our side knows this connection: the stack resets it.
  Packet rst{local_address(), pkt.src_ip, pkt.dst_port, pkt.src_port, TcpFlags::rst(),
             pkt.ack, 0, 0};
  if (trace_)
    trace_->push_back({pkt.src_ip, at, TraceDirection::Out, true, rst});
  sim_.inject(rst, sim::Origin::Kernel);
}

void SimTransport::purge() {
  const Millis horizon = sim_.now() - kInboxLifetime;
  while (!inbox_.empty() && inbox_.front().at < horizon)
    inbox_.pop_front();
}

std::optional<Inbound> SimTransport::recv_match(const FlowFilter& filter, Millis timeout) {
  purge();
  const Millis deadline = sim_.now() + timeout;
  std::size_t scanned = 0;
  for (;;) {
    for (; scanned < inbox_.size(); ++scanned)
      if (filter.matches(inbox_[scanned].packet)) {
        Inbound hit = inbox_[scanned];
        inbox_.erase(inbox_.begin() + static_cast<std::ptrdiff_t>(scanned));
        return hit;
      }
    if (!sim_.step(deadline)) {
      sim_.advance_to(deadline);
      return std::nullopt;
    }
  }
}

void SimTransport::wait_until(Millis t) {
  if (t > sim_.now())
    sim_.advance_to(t);
}

RstGuard SimTransport::suppress_local_rst(const Flow& flow) {
  ++guarded_[flow];
  return RstGuard([this, flow] {
    if (auto it = guarded_.find(flow); it != guarded_.end() && --it->second == 0)
      guarded_.erase(it);
  });
}

} // namespace natscan
