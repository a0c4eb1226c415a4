#include "natscan/transport/trace.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "natscan/error.hpp"

namespace natscan {

namespace {

using nlohmann::json;

[[noreturn]] void malformed(const std::string& what) {
  throw ScanError(ErrorCode::InvalidConfig, "trace: " + what);
}

json record_to_json(const TraceRecord& r) {
  const auto& p = r.packet;
  return json{
      {"target", r.target.to_string()},
      {"time_ms", r.time_ms},
      {"kind", r.direction == TraceDirection::Out ? "injected" : "delivered_scanner"},
      {"origin", r.direction == TraceDirection::In ? "host" : r.kernel ? "kernel" : "scanner"},
      {"src", p.src_ip.to_string()},
      {"dst", p.dst_ip.to_string()},
      {"sport", p.src_port},
      {"dport", p.dst_port},
      {"flags", p.flags.to_string()},
      {"seq", p.seq},
      {"ack", p.ack},
      {"ipid", p.ipid},
  };
}

Ipv4Addr addr(const json& j, const char* key) {
  auto a = Ipv4Addr::parse(j.at(key).get<std::string>());
  if (!a)
    malformed(std::string("bad address in '") + key + "'");
  return *a;
}

TraceRecord record_from_json(const json& j) {
  TraceRecord r;
  r.target = addr(j, "target");
  r.time_ms = j.at("time_ms").get<Millis>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "injected")
    r.direction = TraceDirection::Out;
  else if (kind == "delivered_scanner")
    r.direction = TraceDirection::In;
  else
    malformed("unknown record kind '" + kind + "'");
  r.kernel = j.at("origin").get<std::string>() == "kernel";
  auto& p = r.packet;
  p.src_ip = addr(j, "src");
  p.dst_ip = addr(j, "dst");
  p.src_port = j.at("sport").get<std::uint16_t>();
  p.dst_port = j.at("dport").get<std::uint16_t>();
  p.flags = TcpFlags::from_string(j.at("flags").get<std::string>());
  p.seq = j.at("seq").get<std::uint32_t>();
  p.ack = j.at("ack").get<std::uint32_t>();
  p.ipid = j.at("ipid").get<std::uint16_t>();
  return r;
}

} // namespace

void write_trace(std::ostream& out, const Trace& trace) {
  json targets = json::array();
  for (auto t : trace.targets)
    targets.push_back(t.to_string());
  out << json{{"trace_version", Trace::kVersion},
              {"scanner_ip", trace.scanner_ip.to_string()},
              {"targets", targets}}
             .dump()
      << '\n';
  for (auto t : trace.targets)
    if (auto it = trace.records.find(t); it != trace.records.end())
      for (const auto& r : it->second)
        out << record_to_json(r).dump() << '\n';
}

Trace read_trace(std::istream& in) {
  Trace trace;
  std::string line;
  if (!std::getline(in, line))
    malformed("empty file");
  try {
    auto header = json::parse(line);
    if (header.at("trace_version").get<int>() != Trace::kVersion)
      malformed("unsupported version");
    trace.scanner_ip = addr(header, "scanner_ip");
    for (const auto& t : header.at("targets")) {
      auto a = Ipv4Addr::parse(t.get<std::string>());
      if (!a)
        malformed("bad target address");
      trace.targets.push_back(*a);
      trace.records[*a];
    }
    while (std::getline(in, line)) {
      if (line.empty())
        continue;
      auto r = record_from_json(json::parse(line));
      auto it = trace.records.find(r.target);
      if (it == trace.records.end())
        malformed("record for undeclared target " + r.target.to_string());
      it->second.push_back(r);
    }
  } catch (const json::exception& e) {
    malformed(e.what());
  } catch (const std::invalid_argument& e) {
    malformed(e.what());
  }
  return trace;
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ScanError(ErrorCode::InvalidConfig, "cannot read trace file " + path.string());
  return read_trace(in);
}

ReplayTransport::ReplayTransport(Ipv4Addr scanner_ip, std::vector<TraceRecord> records)
    : scanner_ip_(scanner_ip) {
  for (auto& r : records) {
    if (r.direction == TraceDirection::In)
      inbound_.push_back({r.time_ms, r.packet});
    else if (!r.kernel)
      sends_.push_back(std::move(r));
  }
  std::stable_sort(inbound_.begin(), inbound_.end(),
                   [](const Inbound& a, const Inbound& b) { return a.at < b.at; });
  consumed_.assign(inbound_.size(), false);
}

std::size_t ReplayTransport::remaining_sends() const { return sends_.size() - next_send_; }

void ReplayTransport::send(const Packet& pkt) {
  check_spoof_allowed(*this, pkt);
  if (next_send_ >= sends_.size())
    throw ScanError(ErrorCode::TraceDivergence,
                    "unrecorded send at " + std::to_string(now_) + " ms: " + to_string(pkt));
  const auto& expected = sends_[next_send_];
  if (expected.packet != pkt || expected.time_ms != now_)
    throw ScanError(ErrorCode::TraceDivergence,
                    "send " + std::to_string(next_send_) + " differs: recorded " +
                        to_string(expected.packet) + " at " + std::to_string(expected.time_ms) +
                        " ms, replayed " + to_string(pkt) + " at " + std::to_string(now_) +
                        " ms");
  ++next_send_;
}

std::optional<Inbound> ReplayTransport::recv_match(const FlowFilter& filter, Millis timeout) {
  const Millis horizon = now_ - seconds(60);
  const Millis deadline = now_ + timeout;
  for (std::size_t i = 0; i < inbound_.size() && inbound_[i].at <= deadline; ++i) {
    if (consumed_[i] || inbound_[i].at < horizon || !filter.matches(inbound_[i].packet))
      continue;
    consumed_[i] = true;
    now_ = std::max(now_, inbound_[i].at);
    return inbound_[i];
  }
  now_ = deadline;
  return std::nullopt;
}

void ReplayTransport::wait_until(Millis t) { now_ = std::max(now_, t); }

} // namespace natscan
