#include "natscan/prefilter.hpp"

namespace natscan {

bool syn_probe(Transport& transport, const ProbeTarget& target, Rng& rng, Millis timeout) {
  Packet syn;
  syn.src_ip = transport.local_address();
  syn.dst_ip = target.ip;
  syn.src_port = random_ephemeral_port(rng);
  syn.dst_port = target.port;
  syn.flags = TcpFlags::syn();
  syn.seq = random_u32(rng);

  const Flow flow{target.ip, target.port, syn.src_port};
  RstGuard guard = transport.suppress_local_rst(flow);
  transport.send(syn);
  // A closed port answers RST|ACK; only a SYN-ACK counts.
  auto reply = transport.recv_match(FlowFilter::of(flow), timeout);
  if (!reply || reply->packet.flags != TcpFlags::syn_ack())
    return false;
  Packet rst = syn;
  rst.flags = TcpFlags::rst();
  rst.seq = syn.seq + 1;
  transport.send(rst);
  return true;
}

std::pair<bool, std::optional<std::uint16_t>>
synack_probe(Transport& transport, const ProbeTarget& target, Rng& rng, Millis timeout) {
  auto ipid = probe_once(transport, target, rng, timeout);
  return {ipid.has_value(), ipid};
}

bool prefilter_passes(bool alive, bool rst_seen, std::optional<std::uint16_t> first_ipid) {
  return alive && rst_seen && first_ipid.has_value() && *first_ipid != 0;
}

PrefilterResult prefilter(Transport& transport, const ProbeTarget& target, Rng& rng) {
  PrefilterResult r;
  r.target = target.ip;
  r.alive = syn_probe(transport, target, rng);
  std::tie(r.rst_seen, r.first_ipid) = synack_probe(transport, target, rng);
  r.passed = prefilter_passes(r.alive, r.rst_seen, r.first_ipid);
  return r;
}

} // namespace natscan
