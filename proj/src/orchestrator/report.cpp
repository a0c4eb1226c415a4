#include "natscan/orchestrator/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "natscan/error.hpp"

namespace natscan {

std::size_t ClusterReport::distinct(int length) const {
  const auto it = by_prefix.find(length);
  return it == by_prefix.end() ? 0 : it->second.size();
}

ClusterReport cluster_report(const std::vector<ScanRecord>& records) {
  ClusterReport r;
  std::map<Ipv4Addr, OutpostVerdict> verdict;
  for (const auto& rec : records) {
    if (const auto v = outpost_verdict(rec))
      verdict[rec.target] = *v;
    if (const auto p = penetration_outcome(rec)) {
      switch (*p) {
      case PenetrationOutcome::HolePresent: ++r.holes_present; break;
      case PenetrationOutcome::HoleAbsent: ++r.holes_absent; break;
      case PenetrationOutcome::Inconclusive: ++r.holes_inconclusive; break;
      }
    }
  }
  for (const auto& [ip, v] : verdict) {
    ++r.verdicts[v];
    if (v == OutpostVerdict::QualifiedOutpost)
      r.outposts.insert(ip);
  }
  for (int len : kReportLengths) {
    auto& m = r.by_prefix[len];
    for (auto ip : r.outposts)
      ++m[Ipv4Prefix(ip, len)];
  }
  return r;
}

RunComparison compare_runs(const ClusterReport& a, const ClusterReport& b) {
  RunComparison c;
  c.first = a.outposts.size();
  c.second = b.outposts.size();
  for (auto ip : a.outposts)
    if (b.outposts.contains(ip))
      c.common.insert(ip);
  for (int len : kReportLengths) {
    std::size_t n = 0;
    const auto& pa = a.by_prefix.at(len);
    const auto& pb = b.by_prefix.at(len);
    for (const auto& [p, _] : pa)
      n += pb.contains(p) ? 1 : 0;
    c.common_prefixes[len] = n;
  }
  return c;
}

std::vector<ScanRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ScanError(ErrorCode::InvalidConfig, "cannot open " + path);
  std::vector<ScanRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty())
      out.push_back(record_from_line(line));
  return out;
}

std::string format_report(const ClusterReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(28) << "verdict" << std::right << std::setw(7) << "targets"
     << "\n";
  for (const auto& [v, n] : r.verdicts)
    os << std::left << std::setw(28) << to_string(v) << std::right << std::setw(7) << n << "\n";
  os << "\nqualified outposts: " << r.outposts.size() << "\n";
  for (int len : kReportLengths)
    os << "distinct /" << len << ": " << r.distinct(len) << "\n";
  os << "\nholes: present " << r.holes_present << "  absent " << r.holes_absent
     << "  inconclusive " << r.holes_inconclusive << "\n";
  return os.str();
}

std::string format_comparison(const RunComparison& c) {
  std::ostringstream os;
  os << "outposts: first " << c.first << "  second " << c.second << "  common "
     << c.common.size() << "\n";
  for (const auto& [len, n] : c.common_prefixes)
    os << "common /" << len << ": " << n << "\n";
  return os.str();
}

nlohmann::json report_json(const ClusterReport& r) {
  nlohmann::json j;
  j["outposts"] = nlohmann::json::array();
  for (auto ip : r.outposts)
    j["outposts"].push_back(ip.to_string());
  auto& verdicts = j["verdicts"] = nlohmann::json::object();
  for (const auto& [v, n] : r.verdicts)
    verdicts[std::string(to_string(v))] = n;
  for (const auto& [len, m] : r.by_prefix) {
    auto& pj = j["prefixes"][std::to_string(len)] = nlohmann::json::object();
    for (const auto& [p, n] : m)
      pj[p.to_string()] = n;
    j["distinct"][std::to_string(len)] = m.size();
  }
  j["holes"] = {{"present", r.holes_present},
                {"absent", r.holes_absent},
                {"inconclusive", r.holes_inconclusive}};
  return j;
}

nlohmann::json comparison_json(const RunComparison& c) {
  nlohmann::json j{{"first", c.first}, {"second", c.second}};
  j["common"] = nlohmann::json::array();
  for (auto ip : c.common)
    j["common"].push_back(ip.to_string());
  for (const auto& [len, n] : c.common_prefixes)
    j["common_prefixes"][std::to_string(len)] = n;
  return j;
}

} // namespace natscan
