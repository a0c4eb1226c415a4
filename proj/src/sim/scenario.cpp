#include "natscan/sim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "natscan/error.hpp"
#include "natscan/random.hpp"

namespace natscan::sim {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw ScanError(ErrorCode::InvalidConfig, what);
}

void require_keys(const YAML::Node& node, const std::string& where,
                  std::initializer_list<std::string_view> allowed) {
  if (!node.IsMap())
    fail(where + ": expected a mapping");
  for (const auto& kv : node) {
    auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      fail(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get(const YAML::Node& node, const char* key, const std::string& where, T fallback) {
  auto v = node[key];
  if (!v)
    return fallback;
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    fail(where + ": bad value for '" + key + "'");
  }
}

Ipv4Addr get_addr(const YAML::Node& node, const char* key, const std::string& where,
                  std::optional<Ipv4Addr> fallback = std::nullopt) {
  auto v = node[key];
  if (!v) {
    if (fallback)
      return *fallback;
    fail(where + ": missing '" + key + "'");
  }
  auto a = Ipv4Addr::parse(v.as<std::string>());
  if (!a)
    fail(where + ": bad address for '" + key + "'");
  return *a;
}

IpidPolicy parse_policy(const YAML::Node& node, const std::string& where) {
  if (!node)
    return GlobalCounter{};
  require_keys(node, where, {"kind", "initial", "seed", "value"});
  auto kind = get<std::string>(node, "kind", where, "global");
  if (kind == "global") {
    require_keys(node, where, {"kind", "initial"});
    return GlobalCounter{get<std::uint16_t>(node, "initial", where, 0)};
  }
  if (kind == "per_flow") {
    require_keys(node, where, {"kind", "initial"});
    return PerFlowCounter{get<std::uint16_t>(node, "initial", where, 0)};
  }
  if (kind == "random") {
    require_keys(node, where, {"kind", "seed"});
    return RandomIpid{get<std::uint64_t>(node, "seed", where, 0)};
  }
  if (kind == "constant") {
    require_keys(node, where, {"kind", "value"});
    return ConstantIpid{get<std::uint16_t>(node, "value", where, 0)};
  }
  fail(where + ": unknown IPID policy kind '" + kind + "'");
}

FilterPolicy parse_filter(const std::string& s, const std::string& where) {
  if (s == "none")
    return FilterPolicy::NoFiltering;
  if (s == "block_all_spoofed")
    return FilterPolicy::BlockAllSpoofed;
  if (s == "block_private_source")
    return FilterPolicy::BlockPrivateSourceOnly;
  fail(where + ": unknown filter '" + s + "'");
}

HostConfig parse_host(const YAML::Node& node, const std::string& where) {
  require_keys(node, where,
               {"public_ip", "open_ports", "ipid_policy", "retrans", "filter",
                "hole_present", "noise_rate_pps", "internal_hosts", "responds_to_syn",
                "responds_to_synack"});
  HostConfig h;
  h.public_ip = get_addr(node, "public_ip", where);
  h.open_ports = get<std::vector<std::uint16_t>>(node, "open_ports", where, {80});
  h.ipid_policy = parse_policy(node["ipid_policy"], where + ".ipid_policy");
  if (auto r = node["retrans"]) {
    require_keys(r, where + ".retrans", {"first_interval_s", "count", "doubling"});
    h.retrans_behavior.first_interval_s = get<int>(r, "first_interval_s", where, 1);
    h.retrans_behavior.count = get<int>(r, "count", where, 5);
    h.retrans_behavior.doubling = get<bool>(r, "doubling", where, true);
  }
  h.filter_policy = parse_filter(get<std::string>(node, "filter", where, "none"), where);
  h.hole_present = get<bool>(node, "hole_present", where, false);
  h.noise_rate_pps = get<double>(node, "noise_rate_pps", where, 0.0);
  h.responds_to_syn = get<bool>(node, "responds_to_syn", where, true);
  h.responds_to_synack = get<bool>(node, "responds_to_synack", where, true);
  if (auto list = node["internal_hosts"]) {
    if (!list.IsSequence())
      fail(where + ".internal_hosts: expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      auto w = where + ".internal_hosts[" + std::to_string(i) + "]";
      require_keys(list[i], w, {"private_ip", "alive"});
      h.internal_hosts.push_back(
          {get_addr(list[i], "private_ip", w), get<bool>(list[i], "alive", w, true)});
    }
  }
  return h;
}

} // namespace

std::vector<int> RetransBehavior::offsets_s() const {
  std::vector<int> out;
  int t = 0;
  int gap = first_interval_s;
  for (int i = 0; i < count; ++i) {
    t += gap;
    out.push_back(t);
    if (doubling)
      gap *= 2;
  }
  return out;
}

std::string_view to_string(FilterPolicy p) {
  switch (p) {
  case FilterPolicy::BlockAllSpoofed: return "block_all_spoofed";
  case FilterPolicy::BlockPrivateSourceOnly: return "block_private_source";
  case FilterPolicy::NoFiltering: return "none";
  }
  return "?";
}

void ScenarioConfig::validate() const {
  if (!(link_loss_prob >= 0.0 && link_loss_prob <= 1.0))
    fail("link_loss_prob must lie in [0, 1]");
  if (latency_ms < 0 || lan_latency_ms < 0 || jitter_ms < 0)
    fail("latencies must be non-negative");
  if (scanner_ip.is_private())
    fail("scanner_ip must be public");
  std::set<Ipv4Addr> seen{scanner_ip};
  for (const auto& h : outposts) {
    const auto where = "outpost " + h.public_ip.to_string();
    if (h.public_ip.is_private())
      fail(where + ": public_ip must be public");
    if (!seen.insert(h.public_ip).second)
      fail(where + ": duplicate address");
    if (!(h.noise_rate_pps >= 0.0))
      fail(where + ": noise_rate_pps must be non-negative");
    const auto& rb = h.retrans_behavior;
    if (rb.first_interval_s <= 0 || rb.count < 3 || rb.count > 5)
      fail(where + ": retrans needs first_interval_s > 0 and count in [3, 5]");
    for (auto port : h.open_ports)
      if (port == 0)
        fail(where + ": port 0 is not a valid open port");
    for (const auto& ih : h.internal_hosts) {
      if (!ih.private_ip.is_private())
        fail(where + ": internal host " + ih.private_ip.to_string() + " is not private");
      if (!seen.insert(ih.private_ip).second)
        fail(where + ": duplicate address " + ih.private_ip.to_string());
    }
  }
}

const HostConfig* ScenarioConfig::find_host(Ipv4Addr public_ip) const {
  for (const auto& h : outposts)
    if (h.public_ip == public_ip)
      return &h;
  return nullptr;
}

ScenarioConfig ScenarioConfig::slice(Ipv4Addr public_ip) const {
  ScenarioConfig out = *this;
  out.outposts.clear();
  out.rng_seed = mix_seed(rng_seed, public_ip.value());
  if (const auto* h = find_host(public_ip))
    out.outposts.push_back(*h);
  return out;
}

ScenarioConfig parse_scenario(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    fail(std::string("scenario is not valid YAML: ") + e.what());
  }
  const std::string where = "scenario";
  require_keys(root, where,
               {"scanner_ip", "rng_seed", "link_loss_prob", "latency_ms", "lan_latency_ms",
                "jitter_ms", "outposts"});
  ScenarioConfig c;
  c.scanner_ip = get_addr(root, "scanner_ip", where, c.scanner_ip);
  c.rng_seed = get<std::uint64_t>(root, "rng_seed", where, 0);
  c.link_loss_prob = get<double>(root, "link_loss_prob", where, 0.0);
  c.latency_ms = get<int>(root, "latency_ms", where, c.latency_ms);
  c.lan_latency_ms = get<int>(root, "lan_latency_ms", where, c.lan_latency_ms);
  c.jitter_ms = get<int>(root, "jitter_ms", where, 0);
  if (auto list = root["outposts"]) {
    if (!list.IsSequence())
      fail("scenario.outposts: expected a list");
    for (std::size_t i = 0; i < list.size(); ++i)
      c.outposts.push_back(parse_host(list[i], "outposts[" + std::to_string(i) + "]"));
  }
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    fail("cannot read scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string dump_scenario(const ScenarioConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "scanner_ip" << YAML::Value << c.scanner_ip.to_string();
  out << YAML::Key << "rng_seed" << YAML::Value << c.rng_seed;
  out << YAML::Key << "link_loss_prob" << YAML::Value << c.link_loss_prob;
  out << YAML::Key << "latency_ms" << YAML::Value << c.latency_ms;
  out << YAML::Key << "lan_latency_ms" << YAML::Value << c.lan_latency_ms;
  out << YAML::Key << "jitter_ms" << YAML::Value << c.jitter_ms;
  out << YAML::Key << "outposts" << YAML::Value << YAML::BeginSeq;
  for (const auto& h : c.outposts) {
    out << YAML::BeginMap;
    out << YAML::Key << "public_ip" << YAML::Value << h.public_ip.to_string();
    out << YAML::Key << "open_ports" << YAML::Value << YAML::Flow << h.open_ports;
    out << YAML::Key << "ipid_policy" << YAML::Value << YAML::Flow << YAML::BeginMap;
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, GlobalCounter>)
            out << YAML::Key << "kind" << YAML::Value << "global" << YAML::Key << "initial"
                << YAML::Value << p.initial;
          else if constexpr (std::is_same_v<T, PerFlowCounter>)
            out << YAML::Key << "kind" << YAML::Value << "per_flow" << YAML::Key << "initial"
                << YAML::Value << p.initial;
          else if constexpr (std::is_same_v<T, RandomIpid>)
            out << YAML::Key << "kind" << YAML::Value << "random" << YAML::Key << "seed"
                << YAML::Value << p.seed;
          else
            out << YAML::Key << "kind" << YAML::Value << "constant" << YAML::Key << "value"
                << YAML::Value << p.value;
        },
        h.ipid_policy);
    out << YAML::EndMap;
    out << YAML::Key << "retrans" << YAML::Value << YAML::Flow << YAML::BeginMap
        << YAML::Key << "first_interval_s" << YAML::Value << h.retrans_behavior.first_interval_s
        << YAML::Key << "count" << YAML::Value << h.retrans_behavior.count << YAML::Key
        << "doubling" << YAML::Value << h.retrans_behavior.doubling << YAML::EndMap;
    out << YAML::Key << "filter" << YAML::Value << std::string(to_string(h.filter_policy));
    out << YAML::Key << "hole_present" << YAML::Value << h.hole_present;
    out << YAML::Key << "noise_rate_pps" << YAML::Value << h.noise_rate_pps;
    out << YAML::Key << "responds_to_syn" << YAML::Value << h.responds_to_syn;
    out << YAML::Key << "responds_to_synack" << YAML::Value << h.responds_to_synack;
    out << YAML::Key << "internal_hosts" << YAML::Value << YAML::BeginSeq;
    for (const auto& ih : h.internal_hosts)
      out << YAML::Flow << YAML::BeginMap << YAML::Key << "private_ip" << YAML::Value
          << ih.private_ip.to_string() << YAML::Key << "alive" << YAML::Value << ih.alive
          << YAML::EndMap;
    out << YAML::EndSeq;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

} // namespace natscan::sim
