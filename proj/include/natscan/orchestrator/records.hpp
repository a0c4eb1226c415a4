#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "natscan/detect.hpp"
#include "natscan/outpost.hpp"
#include "natscan/prefilter.hpp"

namespace natscan {

enum class Stage { Prefilter, Outpost, Detect };

std::string_view to_string(Stage s);

/// One line of the result file.
struct ScanRecord {
  static constexpr int kSchema = 1;

  Ipv4Addr target;
  Stage stage = Stage::Prefilter;
  Millis start_ms = 0;
  Millis end_ms = 0;
  std::size_t packets_sent = 0;
  /// Last record of the target: its pipeline ran to completion.
  bool final = false;
  nlohmann::json result;
};

nlohmann::json series_json(const IpidSeries& s);
nlohmann::json to_json(const PrefilterResult& r);
nlohmann::json to_json(const OutpostResult& r);
nlohmann::json to_json(const SweepEntry& e);

std::string to_line(const ScanRecord& r);
/// Throws ScanError(InvalidConfig) on a malformed line.
ScanRecord record_from_line(std::string_view line);

/// The outpost verdict a record settles, if any. Prefilter failures map to
/// NotAlive, NoRstResponse and ZeroIpid.
std::optional<OutpostVerdict> outpost_verdict(const ScanRecord& r);
std::optional<PenetrationOutcome> penetration_outcome(const ScanRecord& r);
std::optional<Ipv4Addr> probed_address(const ScanRecord& r);

} // namespace natscan
