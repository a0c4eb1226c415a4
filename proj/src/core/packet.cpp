#include "natscan/packet.hpp"

#include <stdexcept>

namespace natscan {

TcpFlags TcpFlags::from_bits(std::uint8_t bits) {
  switch (bits) {
  case kSyn:
  case kSyn | kAck:
  case kRst:
  case kRst | kAck:
    return TcpFlags(bits);
  default:
    throw std::invalid_argument("unsupported TCP flag combination " +
                                std::to_string(bits));
  }
}

TcpFlags TcpFlags::from_string(std::string_view text) {
  if (text == "S")
    return syn();
  if (text == "SA")
    return syn_ack();
  if (text == "R")
    return rst();
  if (text == "RA")
    return rst_ack();
  throw std::invalid_argument("unsupported TCP flags: " + std::string(text));
}

std::string TcpFlags::to_string() const {
  std::string s;
  if (has_syn())
    s += 'S';
  if (has_rst())
    s += 'R';
  if (has_ack())
    s += 'A';
  return s;
}

std::string to_string(const Packet& p) {
  return p.src_ip.to_string() + ':' + std::to_string(p.src_port) + " > " +
         p.dst_ip.to_string() + ':' + std::to_string(p.dst_port) + " [" +
         p.flags.to_string() + "] seq=" + std::to_string(p.seq) +
         " ack=" + std::to_string(p.ack) + " id=" + std::to_string(p.ipid);
}

} // namespace natscan
