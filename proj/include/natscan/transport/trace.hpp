#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "natscan/packet.hpp"
#include "natscan/transport/transport.hpp"

namespace natscan {

enum class TraceDirection { Out, In };

/// One packet seen at the scanner's interface. Serialized with the same
/// field names as the simulator's event log, plus the target it belongs to.
struct TraceRecord {
  Ipv4Addr target;
  Millis time_ms = 0;
  TraceDirection direction = TraceDirection::Out;
  bool kernel = false; // outbound RST generated by the scanner's stack
  Packet packet;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct Trace {
  static constexpr int kVersion = 1;

  Ipv4Addr scanner_ip;
  std::vector<Ipv4Addr> targets;
  std::map<Ipv4Addr, std::vector<TraceRecord>> records;
};

void write_trace(std::ostream& out, const Trace& trace);
/// Throws ScanError(InvalidConfig) on a malformed file.
Trace read_trace(std::istream& in);
Trace load_trace(const std::filesystem::path& path);

/// Plays back one target's recorded exchange. Sends must reproduce the
/// recorded scanner packets in order and at the recorded times, otherwise
/// ScanError(TraceDivergence) is thrown.
class ReplayTransport final : public Transport {
public:
  ReplayTransport(Ipv4Addr scanner_ip, std::vector<TraceRecord> records);

  TransportCaps caps() const override { return {true, true}; }
  Ipv4Addr local_address() const override { return scanner_ip_; }
  Millis now() const override { return now_; }
  void send(const Packet& pkt) override;
  std::optional<Inbound> recv_match(const FlowFilter& filter, Millis timeout) override;
  void wait_until(Millis t) override;
  RstGuard suppress_local_rst(const Flow&) override { return {}; }

  /// Recorded scanner sends not yet reproduced.
  std::size_t remaining_sends() const;

private:
  Ipv4Addr scanner_ip_;
  Millis now_ = 0;
  std::vector<TraceRecord> sends_;
  std::size_t next_send_ = 0;
  std::vector<Inbound> inbound_;
  std::vector<bool> consumed_;
};

} // namespace natscan
