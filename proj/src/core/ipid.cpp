#include "natscan/ipid.hpp"

#include <algorithm>
#include <stdexcept>

namespace natscan {

IpidSeries::IpidSeries(int interval_s,
                       const std::vector<std::optional<std::uint16_t>>& values)
    : interval_s_(interval_s) {
  if (interval_s <= 0)
    throw std::invalid_argument("IPID series interval must be positive");
  samples_.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    samples_.push_back({static_cast<std::int64_t>(i) * interval_s, values[i]});
}

std::vector<std::optional<std::uint16_t>> IpidSeries::values() const {
  std::vector<std::optional<std::uint16_t>> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_)
    out.push_back(s.value);
  return out;
}

std::size_t IpidSeries::none_count() const {
  return std::count_if(samples_.begin(), samples_.end(),
                       [](const IpidSample& s) { return !s.value; });
}

} // namespace natscan
