#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "natscan/error.hpp"
#include "natscan/sim/scenario.hpp"
#include "natscan/sim/simulator.hpp"

using namespace natscan;
using namespace natscan::sim;

namespace {

const Ipv4Addr kOutpost{20, 0, 0, 1};
const Ipv4Addr kScanner{198, 51, 100, 1};
const Ipv4Addr kInside{192, 168, 1, 1};

ScenarioConfig one_host(HostConfig h, std::uint64_t seed = 1) {
  ScenarioConfig c;
  c.rng_seed = seed;
  c.outposts.push_back(std::move(h));
  return c;
}

HostConfig global_host(std::uint16_t initial = 0) {
  HostConfig h;
  h.public_ip = kOutpost;
  h.ipid_policy = GlobalCounter{initial};
  return h;
}

Packet synack_probe(std::uint16_t sport = 40000) {
  return {kScanner, kOutpost, sport, 80, TcpFlags::syn_ack(), 1000, 2000, 0};
}

Packet spoofed_syn(Ipv4Addr src, std::uint16_t sport = 50000, std::uint32_t seq = 77) {
  return {src, kOutpost, sport, 80, TcpFlags::syn(), seq, 0, 0};
}

std::size_t count(const std::vector<LogEntry>& log, EventKind kind, Origin origin) {
  return static_cast<std::size_t>(std::count_if(log.begin(), log.end(), [&](const auto& e) {
    return e.kind == kind && e.origin == origin;
  }));
}

} // namespace

TEST(RetransBehavior, CumulativeOffsets) {
  EXPECT_EQ((RetransBehavior{1, 5, true}.offsets_s()), (std::vector<int>{1, 3, 7, 15, 31}));
  EXPECT_EQ((RetransBehavior{3, 5, true}.offsets_s()), (std::vector<int>{3, 9, 21, 45, 93}));
}

TEST(Deliver, SynAckProbeReturnsNextCounterValue) {
  Simulator sim(one_host(global_host(500)));
  auto out = sim.deliver(synack_probe(), 0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].second.flags, TcpFlags::rst());
  EXPECT_EQ(out[0].second.ipid, 501);
  EXPECT_EQ(out[0].first, 40);
}

TEST(Deliver, SpoofedSynWithHoleCostsOnePacket) {
  auto h = global_host();
  h.hole_present = true;
  h.internal_hosts = {{kInside, true}};
  Simulator sim(one_host(h));
  auto out = sim.deliver(spoofed_syn(kInside), 0);
  EXPECT_TRUE(out.empty());
  EXPECT_EQ(sim.emitted_count(kOutpost), 1u);
  EXPECT_EQ(sim.pending_flows(kOutpost), 0u);
  EXPECT_EQ(count(sim.log(), EventKind::DeliveredInternal, Origin::Host), 1u);
  EXPECT_EQ(count(sim.log(), EventKind::RetransCancelled, Origin::Host), 1u);
}

TEST(Deliver, SpoofedSynWithoutHoleRetransmits) {
  auto h = global_host();
  h.retrans_behavior = {1, 4, true};
  h.internal_hosts = {{kInside, true}};
  Simulator sim(one_host(h));
  sim.deliver(spoofed_syn(kInside), 0);
  std::vector<Millis> times;
  for (const auto& e : sim.log())
    if (e.kind == EventKind::Emitted && e.origin == Origin::Host)
      times.push_back(e.time_ms);
  const Millis t = 20;
  EXPECT_EQ(times, (std::vector<Millis>{t, t + 1000, t + 3000, t + 7000, t + 15000}));
  EXPECT_EQ(count(sim.log(), EventKind::DeliveredInternal, Origin::Host), 0u);
  EXPECT_EQ(count(sim.log(), EventKind::FlowExpired, Origin::Host), 1u);
}

TEST(Deliver, DeadInternalHostBehavesLikeNoHole) {
  auto h = global_host();
  h.hole_present = true;
  h.internal_hosts = {{kInside, false}};
  Simulator sim(one_host(h));
  sim.deliver(spoofed_syn(kInside), 0);
  EXPECT_EQ(sim.emitted_count(kOutpost), 6u);
}

TEST(Deliver, DuplicateSynsShareOneTimer) {
  auto h = global_host();
  h.retrans_behavior = {1, 3, true};
  Simulator sim(one_host(h));
  sim.inject(spoofed_syn(kInside, 50000, 1));
  sim.inject(spoofed_syn(kInside, 50000, 2));
  sim.inject(spoofed_syn(kInside, 50000, 3));
  sim.advance_to(seconds(60));
  EXPECT_EQ(sim.emitted_count(kOutpost), 3u + 3u);
}

TEST(Deliver, ClosedPortAnswersRstAck) {
  Simulator sim(one_host(global_host()));
  auto syn = spoofed_syn(kScanner);
  syn.dst_port = 81;
  auto out = sim.deliver(syn, 0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].second.flags, TcpFlags::rst_ack());
  EXPECT_EQ(sim.pending_flows(kOutpost), 0u);
}

TEST(Deliver, RstCancelsRetransmission) {
  Simulator sim(one_host(global_host()));
  auto syn = spoofed_syn(kScanner, 41000);
  sim.deliver(syn, 0, seconds(2));
  EXPECT_EQ(sim.pending_flows(kOutpost), 1u);
  Packet rst{kScanner, kOutpost, 41000, 80, TcpFlags::rst(), syn.seq + 1, 0, 0};
  sim.deliver(rst, sim.now(), seconds(60));
  EXPECT_EQ(sim.pending_flows(kOutpost), 0u);
  EXPECT_EQ(sim.emitted_count(kOutpost), 2u); // SYN-ACK, retransmission at +1 s, then silence
}

TEST(Deliver, UnroutableIsLogged) {
  Simulator sim(one_host(global_host()));
  Packet p = synack_probe();
  p.dst_ip = Ipv4Addr(9, 9, 9, 9);
  EXPECT_TRUE(sim.deliver(p, 0).empty());
  EXPECT_EQ(count(sim.log(), EventKind::Unroutable, Origin::Scanner), 1u);
}

TEST(Deliver, ForcedLossSilencesEverything) {
  auto c = one_host(global_host());
  c.link_loss_prob = 1.0;
  Simulator sim(c);
  for (int i = 0; i < 50; ++i)
    EXPECT_TRUE(sim.deliver(synack_probe(), seconds(i), seconds(1)).empty());
}

TEST(Filter, PolicyTable) {
  struct Row {
    FilterPolicy policy;
    Ipv4Addr src;
    bool accepted;
  };
  const Row rows[] = {
      {FilterPolicy::NoFiltering, Ipv4Addr(203, 0, 113, 7), true},
      {FilterPolicy::NoFiltering, kInside, true},
      {FilterPolicy::BlockPrivateSourceOnly, Ipv4Addr(203, 0, 113, 7), true},
      {FilterPolicy::BlockPrivateSourceOnly, kInside, false},
      {FilterPolicy::BlockAllSpoofed, Ipv4Addr(203, 0, 113, 7), false},
      {FilterPolicy::BlockAllSpoofed, kInside, false},
      {FilterPolicy::BlockAllSpoofed, kScanner, true},
  };
  for (const auto& row : rows) {
    auto h = global_host();
    h.filter_policy = row.policy;
    Simulator sim(one_host(h));
    sim.deliver(spoofed_syn(row.src), 0, seconds(1));
    EXPECT_EQ(count(sim.log(), EventKind::Accepted, Origin::Scanner), row.accepted ? 1u : 0u)
        << to_string(row.policy) << " " << row.src.to_string();
    EXPECT_EQ(count(sim.log(), EventKind::Filtered, Origin::Scanner), row.accepted ? 0u : 1u);
  }
}

TEST(Noise, ZeroRateLeavesCounterToProbes) {
  Simulator sim(one_host(global_host(10)));
  for (int i = 0; i < 20; ++i) {
    auto out = sim.deliver(synack_probe(), seconds(i), seconds(1));
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].second.ipid, 11 + i);
  }
}

TEST(Noise, PoissonCountsAcrossSeeds) {
  // Poisson(200): mean 200, variance 200. Over 1000 seeds the sample mean has
  // standard error ~0.45 and the sample variance about 200 +- 9.
  const int seeds = 1000;
  std::vector<double> counts;
  int within = 0;
  for (int s = 0; s < seeds; ++s) {
    auto h = global_host();
    h.noise_rate_pps = 2.0;
    Simulator sim(one_host(h, static_cast<std::uint64_t>(s) * 7919 + 1));
    sim.advance_to(seconds(100));
    const double n = static_cast<double>(sim.emitted_count(kOutpost));
    counts.push_back(n);
    within += std::abs(n - 200.0) <= 3.0 * std::sqrt(200.0);
  }
  const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / seeds;
  double var = 0;
  for (double c : counts)
    var += (c - mean) * (c - mean);
  var /= seeds - 1;
  EXPECT_NEAR(mean, 200.0, 2.0);
  EXPECT_NEAR(var, 200.0, 45.0);
  EXPECT_GE(within, 990);
}

TEST(Noise, LongRunMeanIncrement) {
  auto h = global_host();
  h.noise_rate_pps = 5.5;
  Simulator sim(one_host(h, 42));
  const int window = 4000;
  sim.advance_to(seconds(window));
  // Per-second increments recovered from the event log, not the counter.
  std::vector<int> per_second(window, 0);
  for (const auto& e : sim.log())
    if (e.kind == EventKind::Emitted && e.origin == Origin::Noise)
      ++per_second.at(static_cast<std::size_t>(e.time_ms / 1000));
  const double mean = std::accumulate(per_second.begin(), per_second.end(), 0.0) / window;
  EXPECT_NEAR(mean, 5.5, 3.0 * std::sqrt(5.5 / window));
}

TEST(AdvanceTo, EmptyScheduleMovesClock) {
  Simulator sim(one_host(global_host()));
  EXPECT_TRUE(sim.advance_to(1234).empty());
  EXPECT_EQ(sim.now(), 1234);
}

TEST(AdvanceTo, TiesKeepInsertionOrder) {
  auto c = one_host(global_host());
  auto h2 = global_host();
  h2.public_ip = Ipv4Addr(20, 0, 0, 2);
  c.outposts.push_back(h2);
  Simulator sim(c);
  auto a = synack_probe(1111);
  auto b = synack_probe(2222);
  b.dst_ip = h2.public_ip;
  sim.inject(b);
  sim.inject(a);
  auto log = sim.advance_to(20);
  ASSERT_EQ(log.size(), 4u); // two accepts, two emits
  EXPECT_EQ(log[0].packet.src_port, 2222);
  EXPECT_EQ(log[1].packet.dst_port, 2222);
  EXPECT_EQ(log[2].packet.src_port, 1111);
}

namespace {

std::string run_script(const ScenarioConfig& c) {
  Simulator sim(c);
  for (int i = 0; i < 40; ++i) {
    sim.advance_to(seconds(i));
    sim.inject(synack_probe(static_cast<std::uint16_t>(40000 + i)));
    if (i % 7 == 0)
      sim.inject(spoofed_syn(kInside, static_cast<std::uint16_t>(50000 + i), i));
    if (i % 11 == 0)
      sim.inject(spoofed_syn(Ipv4Addr(203, 0, 113, 7), 51000, i));
  }
  sim.advance_to(seconds(120));
  std::ostringstream out;
  dump_log(out, sim.log());
  return out.str();
}

ScenarioConfig busy_scenario(std::uint64_t seed) {
  auto h = global_host(65000);
  h.noise_rate_pps = 3.0;
  h.hole_present = true;
  h.internal_hosts = {{kInside, true}, {Ipv4Addr(192, 168, 1, 9), false}};
  auto c = one_host(h, seed);
  c.link_loss_prob = 0.05;
  c.jitter_ms = 300;
  return c;
}

} // namespace

TEST(Determinism, ReplayedScriptGivesIdenticalLog) {
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    auto first = run_script(busy_scenario(seed));
    EXPECT_EQ(first, run_script(busy_scenario(seed)));
    EXPECT_NE(first, run_script(busy_scenario(seed + 1000)));
  }
}

TEST(Invariants, GlobalCounterConservation) {
  Simulator sim(busy_scenario(5));
  for (int i = 0; i < 30; ++i) {
    sim.advance_to(seconds(i));
    sim.inject(synack_probe());
    sim.inject(spoofed_syn(kInside, static_cast<std::uint16_t>(50000 + i)));
  }
  sim.advance_to(seconds(100));
  std::uint64_t emitted = 0;
  for (const auto& e : sim.log())
    if (e.kind == EventKind::Emitted && e.packet.src_ip == kOutpost)
      ++emitted;
  EXPECT_EQ(emitted, sim.emitted_count(kOutpost));
  EXPECT_EQ(*sim.global_counter(kOutpost), static_cast<std::uint16_t>(65000 + emitted));
}

TEST(Invariants, BlockAllSpoofedAcceptsNoSpoofedPacket) {
  auto c = busy_scenario(8);
  c.outposts[0].filter_policy = FilterPolicy::BlockAllSpoofed;
  Simulator sim(c);
  for (int i = 0; i < 30; ++i) {
    sim.advance_to(seconds(i));
    sim.inject(spoofed_syn(kInside, static_cast<std::uint16_t>(50000 + i)));
    sim.inject(spoofed_syn(Ipv4Addr(8, 8, 8, 8), static_cast<std::uint16_t>(50000 + i)));
    sim.inject(synack_probe());
  }
  sim.advance_to(seconds(100));
  for (const auto& e : sim.log())
    if (e.kind == EventKind::Accepted && e.origin == Origin::Scanner) {
      EXPECT_EQ(e.packet.src_ip, kScanner);
    }
  EXPECT_EQ(count(sim.log(), EventKind::DeliveredInternal, Origin::Host), 0u);
}

TEST(Invariants, NoHoleMeansNoInternalDelivery) {
  auto c = busy_scenario(9);
  c.outposts[0].hole_present = false;
  Simulator sim(c);
  for (int i = 0; i < 30; ++i) {
    sim.advance_to(seconds(i));
    sim.inject(spoofed_syn(kInside, static_cast<std::uint16_t>(50000 + i)));
  }
  sim.advance_to(seconds(200));
  for (const auto& e : sim.log())
    EXPECT_NE(e.kind, EventKind::DeliveredInternal);
}

TEST(Invariants, ExactlyCountRetransmissionsPerFlow) {
  for (int cnt = 3; cnt <= 5; ++cnt) {
    auto h = global_host();
    h.retrans_behavior = {2, cnt, true};
    Simulator sim(one_host(h));
    for (int f = 0; f < 4; ++f)
      sim.inject(spoofed_syn(Ipv4Addr(203, 0, 113, 7), static_cast<std::uint16_t>(50000 + f)));
    sim.advance_to(seconds(500));
    EXPECT_EQ(sim.emitted_count(kOutpost), static_cast<std::uint64_t>(4 * (1 + cnt)));
    EXPECT_EQ(sim.pending_flows(kOutpost), 0u);
  }
}

TEST(Liveness, ScheduledChangeApplies) {
  auto h = global_host();
  h.hole_present = true;
  h.internal_hosts = {{kInside, true}};
  Simulator sim(one_host(h));
  sim.schedule_alive(kInside, seconds(10), false);
  sim.deliver(spoofed_syn(kInside, 50000), 0, seconds(5));
  EXPECT_EQ(sim.emitted_count(kOutpost), 1u);
  sim.deliver(spoofed_syn(kInside, 50001), seconds(20), seconds(60));
  EXPECT_FALSE(sim.alive(kInside));
  EXPECT_EQ(sim.emitted_count(kOutpost), 1u + 6u);
}

TEST(ScenarioFile, RoundTripAndFailClosed) {
  const std::string text = R"(
rng_seed: 17
link_loss_prob: 0.01
outposts:
  - public_ip: 20.0.0.1
    ipid_policy: {kind: global, initial: 42}
    retrans: {first_interval_s: 3, count: 5}
    filter: block_private_source
    hole_present: true
    noise_rate_pps: 1.5
    internal_hosts:
      - {private_ip: 192.168.178.17, alive: true}
)";
  auto c = parse_scenario(text);
  ASSERT_EQ(c.outposts.size(), 1u);
  EXPECT_EQ(c.rng_seed, 17u);
  EXPECT_EQ(std::get<GlobalCounter>(c.outposts[0].ipid_policy).initial, 42);
  EXPECT_EQ(c.outposts[0].retrans_behavior.first_interval_s, 3);
  EXPECT_EQ(c.outposts[0].filter_policy, FilterPolicy::BlockPrivateSourceOnly);
  auto again = parse_scenario(dump_scenario(c));
  EXPECT_EQ(dump_scenario(again), dump_scenario(c));

  auto expect_invalid = [](const std::string& t) {
    try {
      parse_scenario(t);
      ADD_FAILURE() << "accepted: " << t;
    } catch (const ScanError& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
    }
  };
  expect_invalid("rng_sed: 1\n");
  expect_invalid("outposts:\n  - public_ip: 20.0.0.1\n    holes: true\n");
  expect_invalid("outposts:\n  - public_ip: 10.0.0.1\n");
  expect_invalid("outposts:\n  - public_ip: 20.0.0.1\n    internal_hosts: [{private_ip: 8.8.8.8}]\n");
  expect_invalid("outposts:\n  - public_ip: 20.0.0.1\n  - public_ip: 20.0.0.1\n");
  expect_invalid("link_loss_prob: 1.5\n");
  expect_invalid("link_loss_prob: -0.1\n");
  expect_invalid("outposts:\n  - public_ip: 20.0.0.1\n    retrans: {count: 6}\n");
  expect_invalid("outposts:\n  - public_ip: 20.0.0.1\n    ipid_policy: {kind: weird}\n");
  expect_invalid("[1, 2");
}

TEST(ScenarioFile, SliceKeepsOneHost) {
  auto c = busy_scenario(3);
  auto h2 = global_host();
  h2.public_ip = Ipv4Addr(20, 0, 0, 2);
  c.outposts.push_back(h2);
  auto s = c.slice(h2.public_ip);
  ASSERT_EQ(s.outposts.size(), 1u);
  EXPECT_EQ(s.outposts[0].public_ip, h2.public_ip);
  EXPECT_NE(s.rng_seed, c.rng_seed);
  EXPECT_TRUE(c.slice(Ipv4Addr(1, 1, 1, 1)).outposts.empty());
}
