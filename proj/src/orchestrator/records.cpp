#include "natscan/orchestrator/records.hpp"

#include "natscan/error.hpp"

namespace natscan {

using nlohmann::json;

std::string_view to_string(Stage s) {
  switch (s) {
  case Stage::Prefilter: return "prefilter";
  case Stage::Outpost: return "outpost";
  case Stage::Detect: return "detect";
  }
  return "?";
}

json series_json(const IpidSeries& s) {
  json values = json::array();
  for (const auto& v : s.values())
    values.push_back(v ? json(*v) : json(nullptr));
  return json{{"interval_s", s.interval_s()}, {"values", values}};
}

namespace {

json band_json(const Band& b) { return json::array({b.lo, b.hi}); }

json check_json(const SpoofCheckResult& c) {
  return json{
      {"spoofed_src", c.spoofed_src.to_string()},
      {"m", c.m},
      {"outcome", to_string(c.outcome)},
      {"increment", c.increment},
      {"span_s", c.span_s},
      {"received_band", band_json(c.bands.received)},
      {"filtered_band", band_json(c.bands.filtered)},
      {"pre_start_ms", c.pre.start},
      {"pre", series_json(c.pre.series)},
      {"post_start_ms", c.post.start},
      {"post", series_json(c.post.series)},
  };
}

std::string prefilter_verdict(const PrefilterResult& r) {
  if (!r.alive)
    return std::string(to_string(OutpostVerdict::NotAlive));
  if (!r.rst_seen)
    return std::string(to_string(OutpostVerdict::NoRstResponse));
  if (!r.passed)
    return std::string(to_string(OutpostVerdict::ZeroIpid));
  return "Passed";
}

} // namespace

json to_json(const PrefilterResult& r) {
  return json{
      {"alive", r.alive},
      {"rst_seen", r.rst_seen},
      {"first_ipid", r.first_ipid ? json(*r.first_ipid) : json(nullptr)},
      {"passed", r.passed},
      {"verdict", prefilter_verdict(r)},
  };
}

json to_json(const OutpostResult& r) {
  const auto& ev = r.evidence;
  json checks = json::array();
  for (const auto& c : ev.checks)
    checks.push_back(check_json(c));
  return json{
      {"verdict", to_string(r.verdict)},
      {"ipids0", series_json(ev.ipids0)},
      {"ipid_class", ev.ipid_class ? json(to_string(*ev.ipid_class)) : json(nullptr)},
      {"noise_rate_pps", ev.noise ? json(ev.noise->rate_pps) : json(nullptr)},
      {"m", ev.m},
      {"checks", checks},
      {"attempts", ev.attempts},
  };
}

json to_json(const SweepEntry& e) {
  const auto& v = e.verdict;
  json j{
      {"private_ip", e.private_ip.to_string()},
      {"outcome", to_string(v.outcome)},
      {"k", v.k},
      {"schedule", {{"offsets_s", v.schedule.offsets_s}, {"calibrated", v.schedule.calibrated}}},
      {"ipids5", series_json(e.probe.ipids5)},
      {"noise_rate_pps", e.probe.noise.rate_pps},
      {"ipids6", series_json(v.detection_series)},
      {"attempts", e.attempts},
  };
  if (!e.error.empty())
    j["error"] = e.error;
  return j;
}

std::string to_line(const ScanRecord& r) {
  json j{
      {"schema", ScanRecord::kSchema},
      {"target", r.target.to_string()},
      {"stage", to_string(r.stage)},
      {"start_ms", r.start_ms},
      {"end_ms", r.end_ms},
      {"packets_sent", r.packets_sent},
      {"final", r.final},
      {"result", r.result},
  };
  return j.dump();
}

ScanRecord record_from_line(std::string_view line) {
  try {
    auto j = json::parse(line);
    if (j.at("schema").get<int>() != ScanRecord::kSchema)
      throw ScanError(ErrorCode::InvalidConfig, "unsupported record schema");
    ScanRecord r;
    auto target = Ipv4Addr::parse(j.at("target").get<std::string>());
    if (!target)
      throw ScanError(ErrorCode::InvalidConfig, "bad target in record");
    r.target = *target;
    const auto stage = j.at("stage").get<std::string>();
    if (stage == "prefilter")
      r.stage = Stage::Prefilter;
    else if (stage == "outpost")
      r.stage = Stage::Outpost;
    else if (stage == "detect")
      r.stage = Stage::Detect;
    else
      throw ScanError(ErrorCode::InvalidConfig, "unknown stage '" + stage + "'");
    r.start_ms = j.at("start_ms").get<Millis>();
    r.end_ms = j.at("end_ms").get<Millis>();
    r.packets_sent = j.at("packets_sent").get<std::size_t>();
    r.final = j.at("final").get<bool>();
    r.result = j.at("result");
    return r;
  } catch (const json::exception& e) {
    throw ScanError(ErrorCode::InvalidConfig, std::string("malformed record: ") + e.what());
  }
}

std::optional<OutpostVerdict> outpost_verdict(const ScanRecord& r) {
  if (r.stage == Stage::Detect || !r.result.contains("verdict"))
    return std::nullopt;
  return outpost_verdict_from_string(r.result["verdict"].get<std::string>());
}

std::optional<PenetrationOutcome> penetration_outcome(const ScanRecord& r) {
  if (r.stage != Stage::Detect || !r.result.contains("outcome"))
    return std::nullopt;
  return penetration_outcome_from_string(r.result["outcome"].get<std::string>());
}

std::optional<Ipv4Addr> probed_address(const ScanRecord& r) {
  if (r.stage != Stage::Detect || !r.result.contains("private_ip"))
    return std::nullopt;
  return Ipv4Addr::parse(r.result["private_ip"].get<std::string>());
}

} // namespace natscan
