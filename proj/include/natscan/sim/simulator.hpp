#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "natscan/packet.hpp"
#include "natscan/random.hpp"
#include "natscan/sim/scenario.hpp"

namespace natscan::sim {

enum class EventKind {
  Injected,          // packet handed to the network by the scanner
  Accepted,          // packet accepted by a public host's stack
  Filtered,          // dropped by the host's ingress filter
  Emitted,           // packet emitted by a public host (IPID stamped)
  Lost,              // dropped by link loss
  Unroutable,        // destination outside the simulated topology
  Vanished,          // private destination not reachable through the NAT
  DeliveredInternal, // reached an internal host
  DeliveredScanner,  // reached the scanner
  RetransCancelled,  // half-open flow torn down by an RST
  FlowExpired,       // half-open flow exhausted its retransmissions
  LivenessChanged,
};

std::string_view to_string(EventKind k);

enum class Origin : std::uint8_t { Scanner, Kernel, Host, Internal, Noise };

std::string_view to_string(Origin o);

struct LogEntry {
  Millis time_ms = 0;
  EventKind kind = EventKind::Injected;
  Origin origin = Origin::Scanner;
  Packet packet;

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

/// One JSON object per line: {time_ms, kind, origin, src, dst, sport, dport,
/// flags, seq, ack, ipid}.
void write_log_line(std::ostream& out, const LogEntry& e);
void dump_log(std::ostream& out, std::span<const LogEntry> log);

/// Deterministic discrete-event network: one scanner, public hosts with
/// configurable TCP/IPID behavior, NAT gateways and internal hosts. Time only
/// moves through advance_to()/step(). Single-threaded.
class Simulator {
public:
  using ScannerSink = std::function<void(Millis, const Packet&)>;

  explicit Simulator(ScenarioConfig config);

  const ScenarioConfig& config() const { return config_; }
  Millis now() const { return now_; }

  /// Called for every packet that reaches the scanner, at its arrival time.
  void set_scanner_sink(ScannerSink sink) { sink_ = std::move(sink); }

  /// Hands a packet to the network at the current time.
  void inject(const Packet& pkt, Origin origin = Origin::Scanner);

  /// Processes every event with timestamp <= t_ms (ties in insertion order)
  /// and sets the clock to t_ms. Returns the log entries produced.
  std::vector<LogEntry> advance_to(Millis t_ms);

  /// Processes the earliest pending event if its time is <= limit.
  bool step(Millis limit);

  std::optional<Millis> next_event_time() const;

  /// Injects `pkt` at time `at`, runs for `horizon` and returns the packets
  /// that reached the scanner meanwhile.
  std::vector<std::pair<Millis, Packet>> deliver(const Packet& pkt, Millis at,
                                                 Millis horizon = seconds(60));

  // Ground truth, for tests and audits.
  const std::vector<LogEntry>& log() const { return log_; }
  std::vector<LogEntry> stimulus() const;
  std::uint64_t emitted_count(Ipv4Addr host) const;
  std::optional<std::uint16_t> global_counter(Ipv4Addr host) const;
  std::size_t pending_flows(Ipv4Addr host) const;
  std::size_t pending_events() const { return queue_.size(); }
  bool alive(Ipv4Addr private_ip) const;

  void set_alive(Ipv4Addr private_ip, bool alive);
  void schedule_alive(Ipv4Addr private_ip, Millis at, bool alive);

private:
  struct FlowKey {
    Ipv4Addr remote_ip;
    std::uint16_t remote_port;
    std::uint16_t local_port;
    friend auto operator<=>(const FlowKey&, const FlowKey&) = default;
  };

  struct HalfOpenFlow {
    std::uint32_t isn;
    std::uint32_t peer_seq;
    int retransmissions = 0;
    std::uint64_t generation;
  };

  struct HostState {
    HostConfig cfg;
    std::uint16_t counter = 0;
    std::map<Ipv4Addr, std::uint16_t> flow_counters;
    std::map<FlowKey, HalfOpenFlow> flows;
    std::vector<bool> internal_alive;
    std::uint64_t emitted = 0;
    double next_noise_s = 0.0;
    Rng noise_rng;
    Rng isn_rng;
    Rng ipid_rng;
  };

  enum class Hop { ToHost, ToScanner, ToInternal, FromInternal };

  struct Arrival {
    Packet packet;
    Hop hop;
    std::size_t host;
    std::size_t internal = 0;
    Origin origin;
  };
  struct RetransTimer {
    std::size_t host;
    FlowKey key;
    std::uint64_t generation;
  };
  struct NoiseTick {
    std::size_t host;
  };
  struct Liveness {
    Ipv4Addr private_ip;
    bool alive;
  };

  struct Event {
    Millis at;
    std::uint64_t seq;
    std::variant<Arrival, RetransTimer, NoiseTick, Liveness> what;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  void schedule(Millis at, decltype(Event::what) what);
  void record(EventKind kind, Origin origin, const Packet& pkt);
  void process(const Event& ev);

  void on_arrival(const Arrival& a);
  void on_host_packet(std::size_t h, const Packet& pkt);
  void on_internal_packet(std::size_t h, std::size_t i, const Packet& pkt);
  void on_retrans(const RetransTimer& t);
  void on_noise(std::size_t h);

  /// Stamps an IPID on `pkt`, logs it and routes it away from host h.
  void emit(std::size_t h, Packet pkt, Origin origin = Origin::Host);
  void transmit(Packet pkt, Hop hop, std::size_t host, std::size_t internal, Origin origin,
                int latency_ms);
  std::uint16_t next_ipid(HostState& host, Ipv4Addr dst);
  void schedule_noise(std::size_t h);

  std::optional<std::size_t> host_index(Ipv4Addr public_ip) const;
  std::optional<std::pair<std::size_t, std::size_t>> internal_index(Ipv4Addr private_ip) const;

  ScenarioConfig config_;
  std::vector<HostState> hosts_;
  Rng net_rng_;
  Millis now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_generation_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::vector<LogEntry> log_;
  ScannerSink sink_;
};

} // namespace natscan::sim
