#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "natscan/ipv4.hpp"
#include "natscan/orchestrator/records.hpp"

namespace natscan {

/// Qualified outposts grouped by /24, /20 and /16.
struct ClusterReport {
  std::set<Ipv4Addr> outposts;
  std::map<int, std::map<Ipv4Prefix, std::size_t>> by_prefix; // length -> prefix -> count
  std::map<OutpostVerdict, std::size_t> verdicts;
  std::size_t holes_present = 0;
  std::size_t holes_absent = 0;
  std::size_t holes_inconclusive = 0;

  std::size_t distinct(int length) const;
};

inline constexpr int kReportLengths[] = {24, 20, 16};

ClusterReport cluster_report(const std::vector<ScanRecord>& records);

/// Overlap of two runs, by address and by prefix.
struct RunComparison {
  std::size_t first = 0;
  std::size_t second = 0;
  std::set<Ipv4Addr> common;
  std::map<int, std::size_t> common_prefixes;
};

RunComparison compare_runs(const ClusterReport& a, const ClusterReport& b);

std::vector<ScanRecord> load_records(const std::string& path);

std::string format_report(const ClusterReport& r);
std::string format_comparison(const RunComparison& c);
nlohmann::json report_json(const ClusterReport& r);
nlohmann::json comparison_json(const RunComparison& c);

} // namespace natscan
