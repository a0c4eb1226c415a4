#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace natscan {

/// (b - a) mod 65536.
constexpr std::uint32_t ipid_delta(std::uint16_t a, std::uint16_t b) {
  return static_cast<std::uint16_t>(b - a);
}

/// Serial-number comparison over the 16-bit counter: b is ahead of a when the
/// forward distance lies in [1, 32768).
constexpr bool is_forward_step(std::uint16_t a, std::uint16_t b) {
  const auto d = ipid_delta(a, b);
  return d >= 1 && d < 32768;
}

struct IpidSample {
  std::int64_t offset_s = 0;
  std::optional<std::uint16_t> value; // nullopt: no RST before the timeout

  friend bool operator==(const IpidSample&, const IpidSample&) = default;
};

/// A periodic IPID series: sample i was taken i * interval_s seconds after the
/// first one.
class IpidSeries {
public:
  IpidSeries() = default;

  /// Throws std::invalid_argument if interval_s <= 0.
  IpidSeries(int interval_s, const std::vector<std::optional<std::uint16_t>>& values);

  int interval_s() const { return interval_s_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  const std::vector<IpidSample>& samples() const { return samples_; }
  const std::optional<std::uint16_t>& operator[](std::size_t i) const {
    return samples_[i].value;
  }

  std::vector<std::optional<std::uint16_t>> values() const;
  std::size_t none_count() const;

  friend bool operator==(const IpidSeries&, const IpidSeries&) = default;

private:
  int interval_s_ = 1;
  std::vector<IpidSample> samples_;
};

} // namespace natscan
