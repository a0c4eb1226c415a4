#include "natscan/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <utility>

#include <nlohmann/json.hpp>

namespace natscan::sim {

std::string_view to_string(EventKind k) {
  switch (k) {
  case EventKind::Injected: return "injected";
  case EventKind::Accepted: return "accepted";
  case EventKind::Filtered: return "filtered";
  case EventKind::Emitted: return "emitted";
  case EventKind::Lost: return "lost";
  case EventKind::Unroutable: return "unroutable";
  case EventKind::Vanished: return "vanished";
  case EventKind::DeliveredInternal: return "delivered_internal";
  case EventKind::DeliveredScanner: return "delivered_scanner";
  case EventKind::RetransCancelled: return "retrans_cancelled";
  case EventKind::FlowExpired: return "flow_expired";
  case EventKind::LivenessChanged: return "liveness_changed";
  }
  return "?";
}

std::string_view to_string(Origin o) {
  switch (o) {
  case Origin::Scanner: return "scanner";
  case Origin::Kernel: return "kernel";
  case Origin::Host: return "host";
  case Origin::Internal: return "internal";
  case Origin::Noise: return "noise";
  }
  return "?";
}

void write_log_line(std::ostream& out, const LogEntry& e) {
  const auto& p = e.packet;
  nlohmann::json j{
      {"time_ms", e.time_ms},
      {"kind", to_string(e.kind)},
      {"origin", to_string(e.origin)},
      {"src", p.src_ip.to_string()},
      {"dst", p.dst_ip.to_string()},
      {"sport", p.src_port},
      {"dport", p.dst_port},
      {"flags", p.flags.to_string()},
      {"seq", p.seq},
      {"ack", p.ack},
      {"ipid", p.ipid},
  };
  out << j.dump() << '\n';
}

void dump_log(std::ostream& out, std::span<const LogEntry> log) {
  for (const auto& e : log)
    write_log_line(out, e);
}

Simulator::Simulator(ScenarioConfig config)
    : config_(std::move(config)), net_rng_(mix_seed(config_.rng_seed, 0)) {
  config_.validate();
  hosts_.reserve(config_.outposts.size());
  for (std::size_t i = 0; i < config_.outposts.size(); ++i) {
    const auto& cfg = config_.outposts[i];
    HostState h;
    h.cfg = cfg;
    h.noise_rng.seed(mix_seed(config_.rng_seed, 3 * i + 1));
    h.isn_rng.seed(mix_seed(config_.rng_seed, 3 * i + 2));
    if (const auto* g = std::get_if<GlobalCounter>(&cfg.ipid_policy))
      h.counter = g->initial;
    if (const auto* r = std::get_if<RandomIpid>(&cfg.ipid_policy))
      h.ipid_rng.seed(mix_seed(r->seed, cfg.public_ip.value()));
    for (const auto& ih : cfg.internal_hosts)
      h.internal_alive.push_back(ih.alive);
    hosts_.push_back(std::move(h));
  }
  for (std::size_t i = 0; i < hosts_.size(); ++i)
    if (hosts_[i].cfg.noise_rate_pps > 0)
      schedule_noise(i);
}

void Simulator::schedule(Millis at, decltype(Event::what) what) {
  queue_.push(Event{at, next_seq_++, std::move(what)});
}

void Simulator::record(EventKind kind, Origin origin, const Packet& pkt) {
  log_.push_back({now_, kind, origin, pkt});
}

std::optional<std::size_t> Simulator::host_index(Ipv4Addr public_ip) const {
  for (std::size_t i = 0; i < hosts_.size(); ++i)
    if (hosts_[i].cfg.public_ip == public_ip)
      return i;
  return std::nullopt;
}

std::optional<std::pair<std::size_t, std::size_t>>
Simulator::internal_index(Ipv4Addr private_ip) const {
  for (std::size_t h = 0; h < hosts_.size(); ++h) {
    const auto& internal = hosts_[h].cfg.internal_hosts;
    for (std::size_t i = 0; i < internal.size(); ++i)
      if (internal[i].private_ip == private_ip)
        return std::pair{h, i};
  }
  return std::nullopt;
}

void Simulator::inject(const Packet& pkt, Origin origin) {
  record(EventKind::Injected, origin, pkt);
  auto h = host_index(pkt.dst_ip);
  if (!h) {
    record(EventKind::Unroutable, origin, pkt);
    return;
  }
  transmit(pkt, Hop::ToHost, *h, 0, origin, config_.latency_ms);
}

void Simulator::transmit(Packet pkt, Hop hop, std::size_t host, std::size_t internal,
                         Origin origin, int latency_ms) {
  if (bernoulli(net_rng_, config_.link_loss_prob)) {
    record(EventKind::Lost, origin, pkt);
    return;
  }
  Millis delay = latency_ms;
  if (config_.jitter_ms > 0)
    delay += uniform_int(net_rng_, 0, config_.jitter_ms);
  schedule(now_ + delay, Arrival{pkt, hop, host, internal, origin});
}

std::optional<Millis> Simulator::next_event_time() const {
  if (queue_.empty())
    return std::nullopt;
  return queue_.top().at;
}

bool Simulator::step(Millis limit) {
  if (queue_.empty() || queue_.top().at > limit)
    return false;
  Event ev = queue_.top();
  queue_.pop();
  now_ = ev.at;
  process(ev);
  return true;
}

std::vector<LogEntry> Simulator::advance_to(Millis t_ms) {
  const auto first = log_.size();
  while (step(t_ms)) {
  }
  if (t_ms > now_)
    now_ = t_ms;
  return {log_.begin() + static_cast<std::ptrdiff_t>(first), log_.end()};
}

std::vector<std::pair<Millis, Packet>> Simulator::deliver(const Packet& pkt, Millis at,
                                                         Millis horizon) {
  advance_to(at);
  std::vector<std::pair<Millis, Packet>> out;
  auto saved = std::exchange(sink_, [&out](Millis t, const Packet& p) {
    out.emplace_back(t, p);
  });
  inject(pkt);
  advance_to(at + horizon);
  sink_ = std::move(saved);
  return out;
}

void Simulator::process(const Event& ev) {
  std::visit(
      [this](const auto& what) {
        using T = std::decay_t<decltype(what)>;
        if constexpr (std::is_same_v<T, Arrival>)
          on_arrival(what);
        else if constexpr (std::is_same_v<T, RetransTimer>)
          on_retrans(what);
        else if constexpr (std::is_same_v<T, NoiseTick>)
          on_noise(what.host);
        else {
          if (auto idx = internal_index(what.private_ip))
            hosts_[idx->first].internal_alive[idx->second] = what.alive;
          Packet marker;
          marker.dst_ip = what.private_ip;
          marker.ipid = what.alive ? 1 : 0;
          record(EventKind::LivenessChanged, Origin::Internal, marker);
        }
      },
      ev.what);
}

void Simulator::on_arrival(const Arrival& a) {
  const auto& pkt = a.packet;
  switch (a.hop) {
  case Hop::ToScanner:
    record(EventKind::DeliveredScanner, a.origin, pkt);
    if (sink_)
      sink_(now_, pkt);
    return;
  case Hop::ToInternal:
    if (!hosts_[a.host].internal_alive[a.internal]) {
      record(EventKind::Vanished, a.origin, pkt);
      return;
    }
    record(EventKind::DeliveredInternal, a.origin, pkt);
    on_internal_packet(a.host, a.internal, pkt);
    return;
  case Hop::FromInternal:
    record(EventKind::Accepted, a.origin, pkt);
    on_host_packet(a.host, pkt);
    return;
  case Hop::ToHost: {
    const auto& cfg = hosts_[a.host].cfg;
    const bool spoofed = pkt.src_ip != config_.scanner_ip;
    bool drop = false;
    switch (cfg.filter_policy) {
    case FilterPolicy::BlockAllSpoofed: drop = spoofed; break;
    case FilterPolicy::BlockPrivateSourceOnly: drop = pkt.src_ip.is_private(); break;
    case FilterPolicy::NoFiltering: break;
    }
    if (drop) {
      record(EventKind::Filtered, a.origin, pkt);
      return;
    }
    record(EventKind::Accepted, a.origin, pkt);
    on_host_packet(a.host, pkt);
    return;
  }
  }
}

void Simulator::on_host_packet(std::size_t h, const Packet& pkt) {
  auto& host = hosts_[h];
  const FlowKey key{pkt.src_ip, pkt.src_port, pkt.dst_port};
  Packet reply;
  reply.src_ip = host.cfg.public_ip;
  reply.dst_ip = pkt.src_ip;
  reply.src_port = pkt.dst_port;
  reply.dst_port = pkt.src_port;

  if (pkt.flags == TcpFlags::syn()) {
    if (!host.cfg.responds_to_syn)
      return;
    const auto& ports = host.cfg.open_ports;
    if (std::find(ports.begin(), ports.end(), pkt.dst_port) == ports.end()) {
      reply.flags = TcpFlags::rst_ack();
      reply.ack = pkt.seq + 1;
      emit(h, reply);
      return;
    }
    reply.flags = TcpFlags::syn_ack();
    reply.ack = pkt.seq + 1;
    if (auto it = host.flows.find(key); it != host.flows.end()) {
      // Duplicate SYN: answered, but no second retransmission timer.
      reply.seq = it->second.isn;
      emit(h, reply);
      return;
    }
    HalfOpenFlow flow{random_u32(host.isn_rng), pkt.seq, 0, next_generation_++};
    reply.seq = flow.isn;
    host.flows.emplace(key, flow);
    emit(h, reply);
    const auto& rb = host.cfg.retrans_behavior;
    if (rb.count > 0)
      schedule(now_ + seconds(rb.first_interval_s), RetransTimer{h, key, flow.generation});
    return;
  }

  if (pkt.flags == TcpFlags::syn_ack()) {
    if (!host.cfg.responds_to_synack)
      return;
    reply.flags = TcpFlags::rst();
    reply.seq = pkt.ack;
    emit(h, reply);
    return;
  }

  // RST or RST|ACK: tear down a matching half-open flow, never answered.
  if (auto it = host.flows.find(key); it != host.flows.end()) {
    host.flows.erase(it);
    record(EventKind::RetransCancelled, Origin::Host, pkt);
  }
}

void Simulator::on_internal_packet(std::size_t h, std::size_t i, const Packet& pkt) {
  if (pkt.flags != TcpFlags::syn_ack())
    return;
  // No local state for this connection, so the host resets it.
  Packet rst;
  rst.src_ip = hosts_[h].cfg.internal_hosts[i].private_ip;
  rst.dst_ip = pkt.src_ip;
  rst.src_port = pkt.dst_port;
  rst.dst_port = pkt.src_port;
  rst.flags = TcpFlags::rst();
  rst.seq = pkt.ack;
  record(EventKind::Emitted, Origin::Internal, rst);
  transmit(rst, Hop::FromInternal, h, i, Origin::Internal, config_.lan_latency_ms);
}

void Simulator::on_retrans(const RetransTimer& t) {
  auto& host = hosts_[t.host];
  auto it = host.flows.find(t.key);
  if (it == host.flows.end() || it->second.generation != t.generation)
    return;
  auto& flow = it->second;
  const auto& rb = host.cfg.retrans_behavior;
  ++flow.retransmissions;

  Packet synack;
  synack.src_ip = host.cfg.public_ip;
  synack.dst_ip = t.key.remote_ip;
  synack.src_port = t.key.local_port;
  synack.dst_port = t.key.remote_port;
  synack.flags = TcpFlags::syn_ack();
  synack.seq = flow.isn;
  synack.ack = flow.peer_seq + 1;

  const bool last = flow.retransmissions >= rb.count;
  const auto gap = rb.doubling ? seconds(rb.first_interval_s) << flow.retransmissions
                               : seconds(rb.first_interval_s);
  if (last) {
    host.flows.erase(it);
    emit(t.host, synack);
    record(EventKind::FlowExpired, Origin::Host, synack);
  } else {
    schedule(now_ + gap, t);
    emit(t.host, synack);
  }
}

void Simulator::schedule_noise(std::size_t h) {
  auto& host = hosts_[h];
  host.next_noise_s += exponential(host.noise_rng, host.cfg.noise_rate_pps);
  schedule(static_cast<Millis>(std::floor(host.next_noise_s * 1000.0)), NoiseTick{h});
}

void Simulator::on_noise(std::size_t h) {
  auto& host = hosts_[h];
  // Cross traffic towards some third party in 198.18.0.0/15.
  Packet pkt;
  pkt.src_ip = host.cfg.public_ip;
  pkt.dst_ip = Ipv4Addr{0xc6120000u | static_cast<std::uint32_t>(
                                          uniform_below(host.noise_rng, 1u << 17))};
  pkt.src_port = host.cfg.open_ports.empty() ? 80 : host.cfg.open_ports.front();
  pkt.dst_port = static_cast<std::uint16_t>(uniform_int(host.noise_rng, 1024, 65535));
  pkt.flags = TcpFlags::rst_ack();
  emit(h, pkt, Origin::Noise);
  schedule_noise(h);
}

std::uint16_t Simulator::next_ipid(HostState& host, Ipv4Addr dst) {
  return std::visit(
      [&](const auto& policy) -> std::uint16_t {
        using T = std::decay_t<decltype(policy)>;
        if constexpr (std::is_same_v<T, GlobalCounter>)
          return ++host.counter;
        else if constexpr (std::is_same_v<T, PerFlowCounter>) {
          auto [it, inserted] = host.flow_counters.try_emplace(dst, policy.initial);
          return ++it->second;
        } else if constexpr (std::is_same_v<T, RandomIpid>)
          return static_cast<std::uint16_t>(host.ipid_rng());
        else
          return policy.value;
      },
      host.cfg.ipid_policy);
}

void Simulator::emit(std::size_t h, Packet pkt, Origin origin) {
  auto& host = hosts_[h];
  pkt.ipid = next_ipid(host, pkt.dst_ip);
  ++host.emitted;
  record(EventKind::Emitted, origin, pkt);
  if (origin == Origin::Noise)
    return;
  if (pkt.dst_ip == config_.scanner_ip) {
    transmit(pkt, Hop::ToScanner, h, 0, origin, config_.latency_ms);
    return;
  }
  if (pkt.dst_ip.is_private()) {
    const auto& internal = host.cfg.internal_hosts;
    for (std::size_t i = 0; host.cfg.hole_present && i < internal.size(); ++i)
      if (internal[i].private_ip == pkt.dst_ip) {
        transmit(pkt, Hop::ToInternal, h, i, origin, config_.lan_latency_ms);
        return;
      }
    record(EventKind::Vanished, origin, pkt);
    return;
  }
  record(EventKind::Unroutable, origin, pkt);
}

std::vector<LogEntry> Simulator::stimulus() const {
  std::vector<LogEntry> out;
  for (const auto& e : log_)
    if (e.kind == EventKind::Injected)
      out.push_back(e);
  return out;
}

std::uint64_t Simulator::emitted_count(Ipv4Addr host) const {
  auto h = host_index(host);
  return h ? hosts_[*h].emitted : 0;
}

std::optional<std::uint16_t> Simulator::global_counter(Ipv4Addr host) const {
  auto h = host_index(host);
  if (!h || !std::holds_alternative<GlobalCounter>(hosts_[*h].cfg.ipid_policy))
    return std::nullopt;
  return hosts_[*h].counter;
}

std::size_t Simulator::pending_flows(Ipv4Addr host) const {
  auto h = host_index(host);
  return h ? hosts_[*h].flows.size() : 0;
}

bool Simulator::alive(Ipv4Addr private_ip) const {
  auto idx = internal_index(private_ip);
  return idx && hosts_[idx->first].internal_alive[idx->second];
}

void Simulator::set_alive(Ipv4Addr private_ip, bool alive) {
  schedule_alive(private_ip, now_, alive);
  advance_to(now_);
}

void Simulator::schedule_alive(Ipv4Addr private_ip, Millis at, bool alive) {
  schedule(at, Liveness{private_ip, alive});
}

} // namespace natscan::sim
