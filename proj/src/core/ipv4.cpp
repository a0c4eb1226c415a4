#include "natscan/ipv4.hpp"

#include <charconv>
#include <stdexcept>

namespace natscan {

namespace {

std::optional<unsigned> parse_uint(std::string_view s, unsigned max) {
  if (s.empty() || s.size() > 3)
    return std::nullopt;
  unsigned v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v > max)
    return std::nullopt;
  return v;
}

} // namespace

std::optional<Ipv4Addr> Ipv4Addr::parse(std::string_view text) {
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) {
    auto dot = text.find('.');
    if ((i < 3) == (dot == std::string_view::npos))
      return std::nullopt;
    auto octet = parse_uint(text.substr(0, dot), 255);
    if (!octet)
      return std::nullopt;
    value = (value << 8) | *octet;
    text = i < 3 ? text.substr(dot + 1) : std::string_view{};
  }
  return Ipv4Addr{value};
}

Ipv4Addr Ipv4Addr::from_string(std::string_view text) {
  if (auto a = parse(text))
    return *a;
  throw std::invalid_argument("invalid IPv4 address: " + std::string(text));
}

std::string Ipv4Addr::to_string() const {
  auto o = octets();
  return std::to_string(o[0]) + '.' + std::to_string(o[1]) + '.' +
         std::to_string(o[2]) + '.' + std::to_string(o[3]);
}

Ipv4Prefix::Ipv4Prefix(Ipv4Addr addr, int length) : length_(length) {
  if (length < 0 || length > 32)
    throw std::invalid_argument("prefix length out of range");
  auto mask = length == 0 ? 0u : ~std::uint32_t{0} << (32 - length);
  network_ = Ipv4Addr{addr.value() & mask};
}

std::optional<Ipv4Prefix> Ipv4Prefix::parse(std::string_view text) {
  auto slash = text.find('/');
  if (slash == std::string_view::npos)
    return std::nullopt;
  auto addr = Ipv4Addr::parse(text.substr(0, slash));
  auto len = parse_uint(text.substr(slash + 1), 32);
  if (!addr || !len)
    return std::nullopt;
  return Ipv4Prefix{*addr, static_cast<int>(*len)};
}

Ipv4Prefix Ipv4Prefix::from_string(std::string_view text) {
  if (auto p = parse(text))
    return *p;
  throw std::invalid_argument("invalid CIDR prefix: " + std::string(text));
}

bool Ipv4Prefix::contains(Ipv4Addr addr) const {
  return Ipv4Prefix{addr, length_}.network_ == network_;
}

Ipv4Addr Ipv4Prefix::at(std::uint64_t i) const {
  if (i >= size())
    throw std::out_of_range("address index outside prefix");
  return Ipv4Addr{network_.value() + static_cast<std::uint32_t>(i)};
}

std::string Ipv4Prefix::to_string() const {
  return network_.to_string() + '/' + std::to_string(length_);
}

} // namespace natscan
