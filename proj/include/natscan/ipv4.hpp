#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace natscan {

/// An IPv4 address stored in host byte order.
class Ipv4Addr {
public:
  constexpr Ipv4Addr() = default;
  constexpr explicit Ipv4Addr(std::uint32_t value) : value_(value) {}
  constexpr Ipv4Addr(std::uint8_t a, std::uint8_t b, std::uint8_t c,
                     std::uint8_t d)
      : value_((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) |
               (std::uint32_t{c} << 8) | std::uint32_t{d}) {}

  /// Parses dotted-quad notation; returns nullopt on malformed input.
  static std::optional<Ipv4Addr> parse(std::string_view text);

  /// Like parse(), but throws std::invalid_argument.
  static Ipv4Addr from_string(std::string_view text);

  constexpr std::uint32_t value() const { return value_; }

  constexpr std::array<std::uint8_t, 4> octets() const {
    return {static_cast<std::uint8_t>(value_ >> 24),
            static_cast<std::uint8_t>(value_ >> 16),
            static_cast<std::uint8_t>(value_ >> 8),
            static_cast<std::uint8_t>(value_)};
  }

  /// RFC 1918: 10.0.0.0/8, 172.16.0.0/12, 192.168.0.0/16.
  constexpr bool is_private() const {
    return (value_ >> 24) == 10 || (value_ >> 20) == 0xac1 ||
           (value_ >> 16) == 0xc0a8;
  }

  std::string to_string() const;

  friend constexpr auto operator<=>(Ipv4Addr, Ipv4Addr) = default;

private:
  std::uint32_t value_ = 0;
};

/// A CIDR prefix. The stored network address has its host bits cleared.
class Ipv4Prefix {
public:
  constexpr Ipv4Prefix() = default;
  Ipv4Prefix(Ipv4Addr addr, int length);

  static std::optional<Ipv4Prefix> parse(std::string_view text);
  static Ipv4Prefix from_string(std::string_view text);

  Ipv4Addr network() const { return network_; }
  int length() const { return length_; }
  std::uint64_t size() const { return std::uint64_t{1} << (32 - length_); }
  bool contains(Ipv4Addr addr) const;

  /// The i-th address of the prefix, i < size().
  Ipv4Addr at(std::uint64_t i) const;

  std::string to_string() const;

  friend auto operator<=>(const Ipv4Prefix&, const Ipv4Prefix&) = default;

private:
  Ipv4Addr network_;
  int length_ = 0;
};

} // namespace natscan

template <>
struct std::hash<natscan::Ipv4Addr> {
  std::size_t operator()(natscan::Ipv4Addr a) const noexcept {
    return std::hash<std::uint32_t>{}(a.value());
  }
};
