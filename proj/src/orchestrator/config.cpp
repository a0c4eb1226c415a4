#include "natscan/orchestrator/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "natscan/error.hpp"

namespace natscan {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw ScanError(ErrorCode::InvalidConfig, "scan config: " + what);
}

constexpr std::string_view kKeys[] = {
    "target_port",  "max_rate_pps_per_host", "burst",     "noise_threshold_pps",
    "private_probe_addr", "public_spoof_addr", "sweep_subnet", "concurrency_limit",
    "rng_seed",     "targets",               "noise_z",   "max_none",
};

template <class T>
T get(const YAML::Node& root, const char* key, T fallback) {
  auto v = root[key];
  if (!v)
    return fallback;
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    fail(std::string("bad value for '") + key + "'");
  }
}

Ipv4Addr get_addr(const YAML::Node& root, const char* key, Ipv4Addr fallback) {
  auto text = get<std::string>(root, key, fallback.to_string());
  auto a = Ipv4Addr::parse(text);
  if (!a)
    fail(std::string("bad address for '") + key + "'");
  return *a;
}

} // namespace

void ScanConfig::validate() const {
  if (target_port == 0)
    fail("target_port must be non-zero");
  if (!(max_rate_pps_per_host > 0))
    fail("max_rate_pps_per_host must be positive");
  if (!(burst >= 1))
    fail("burst must be at least 1");
  if (!(noise_threshold_pps >= 0))
    fail("noise_threshold_pps must be non-negative");
  if (!private_probe_addr.is_private())
    fail("private_probe_addr must be an RFC 1918 address");
  if (public_spoof_addr.is_private())
    fail("public_spoof_addr must be public");
  if (sweep_subnet && !sweep_subnet->network().is_private())
    fail("sweep_subnet must be private");
  if (sweep_subnet && sweep_subnet->length() < 16)
    fail("sweep_subnet larger than a /16 is not supported");
  if (concurrency_limit < 1)
    fail("concurrency_limit must be positive");
  if (!(noise_z >= 0))
    fail("noise_z must be non-negative");
  if (max_none < 0)
    fail("max_none must be non-negative");
}

OutpostParams ScanConfig::outpost_params() const {
  OutpostParams p;
  p.max_none = max_none;
  p.noise_threshold_pps = noise_threshold_pps;
  p.public_spoof_addr = public_spoof_addr;
  p.private_spoof_addr = private_probe_addr;
  p.spoof.noise_z = noise_z;
  // The three chained checks send 16 + 3M packets in one plan; keep it
  // within what a 60 s window admits.
  const double window_budget = max_rate_pps_per_host * 60.0 + burst;
  p.max_m = std::max(2, static_cast<int>((window_budget - 16.0) / 3.0));
  return p;
}

DetectionParams ScanConfig::detection_params() const {
  DetectionParams p;
  p.max_none = max_none;
  p.noise_threshold_pps = noise_threshold_pps;
  return p;
}

ScanConfig parse_scan_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    fail(std::string("not valid YAML: ") + e.what());
  }
  ScanConfig c;
  if (root.IsNull()) {
    c.validate();
    return c;
  }
  if (!root.IsMap())
    fail("expected a mapping");
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys))
      fail("unknown key '" + key + "'");
  }
  c.target_port = get<std::uint16_t>(root, "target_port", c.target_port);
  c.max_rate_pps_per_host = get<double>(root, "max_rate_pps_per_host", c.max_rate_pps_per_host);
  c.burst = get<double>(root, "burst", c.burst);
  c.noise_threshold_pps = get<double>(root, "noise_threshold_pps", c.noise_threshold_pps);
  c.private_probe_addr = get_addr(root, "private_probe_addr", c.private_probe_addr);
  c.public_spoof_addr = get_addr(root, "public_spoof_addr", c.public_spoof_addr);
  if (auto s = root["sweep_subnet"]; s && !s.IsNull()) {
    auto p = Ipv4Prefix::parse(get<std::string>(root, "sweep_subnet", ""));
    if (!p)
      fail("bad prefix for 'sweep_subnet'");
    c.sweep_subnet = *p;
  }
  c.concurrency_limit = get<int>(root, "concurrency_limit", c.concurrency_limit);
  c.rng_seed = get<std::uint64_t>(root, "rng_seed", c.rng_seed);
  c.noise_z = get<double>(root, "noise_z", c.noise_z);
  c.max_none = get<int>(root, "max_none", c.max_none);
  for (const auto& text : get<std::vector<std::string>>(root, "targets", {})) {
    auto a = Ipv4Addr::parse(text);
    if (!a)
      fail("bad target address '" + text + "'");
    c.targets.push_back(*a);
  }
  c.validate();
  return c;
}

ScanConfig load_scan_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    fail("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scan_config(buf.str());
}

} // namespace natscan
