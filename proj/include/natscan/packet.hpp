#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "natscan/ipv4.hpp"

namespace natscan {

/// Virtual time in milliseconds.
using Millis = std::int64_t;

inline constexpr Millis seconds(std::int64_t s) { return s * 1000; }

/// TCP flag combinations used by the scanner and the simulated hosts. Only
/// SYN, SYN|ACK, RST and RST|ACK are representable.
class TcpFlags {
public:
  static constexpr std::uint8_t kSyn = 0x02;
  static constexpr std::uint8_t kRst = 0x04;
  static constexpr std::uint8_t kAck = 0x10;

  static constexpr TcpFlags syn() { return TcpFlags(kSyn); }
  static constexpr TcpFlags syn_ack() { return TcpFlags(kSyn | kAck); }
  static constexpr TcpFlags rst() { return TcpFlags(kRst); }
  static constexpr TcpFlags rst_ack() { return TcpFlags(kRst | kAck); }

  /// Throws std::invalid_argument for any other bit combination.
  static TcpFlags from_bits(std::uint8_t bits);
  static TcpFlags from_string(std::string_view text);

  constexpr std::uint8_t bits() const { return bits_; }
  constexpr bool has_syn() const { return bits_ & kSyn; }
  constexpr bool has_rst() const { return bits_ & kRst; }
  constexpr bool has_ack() const { return bits_ & kAck; }

  std::string to_string() const;

  friend constexpr bool operator==(TcpFlags, TcpFlags) = default;

private:
  constexpr explicit TcpFlags(std::uint8_t bits) : bits_(bits) {}
  std::uint8_t bits_;
};

struct Packet {
  Ipv4Addr src_ip;
  Ipv4Addr dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  TcpFlags flags = TcpFlags::syn();
  std::uint32_t seq = 0;
  std::uint32_t ack = 0;
  std::uint16_t ipid = 0;

  friend bool operator==(const Packet&, const Packet&) = default;
};

std::string to_string(const Packet& p);

/// Identifies a scanner-side flow: the remote endpoint plus our local port.
struct Flow {
  Ipv4Addr remote_ip;
  std::uint16_t remote_port = 0;
  std::uint16_t local_port = 0;

  friend auto operator<=>(const Flow&, const Flow&) = default;
};

/// Matches inbound packets. Unset fields match anything.
struct FlowFilter {
  Ipv4Addr remote_ip;
  std::optional<std::uint16_t> remote_port;
  std::optional<std::uint16_t> local_port;
  std::optional<TcpFlags> flags;

  static FlowFilter of(const Flow& f) {
    return {f.remote_ip, f.remote_port, f.local_port, std::nullopt};
  }

  FlowFilter with_flags(TcpFlags f) const {
    FlowFilter copy = *this;
    copy.flags = f;
    return copy;
  }

  bool matches(const Packet& inbound) const {
    return inbound.src_ip == remote_ip &&
           (!remote_port || inbound.src_port == *remote_port) &&
           (!local_port || inbound.dst_port == *local_port) &&
           (!flags || inbound.flags == *flags);
  }
};

} // namespace natscan
