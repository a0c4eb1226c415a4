#include <gtest/gtest.h>

#include "natscan/error.hpp"
#include "natscan/outpost.hpp"
#include "support.hpp"

using namespace natscan;
using namespace natscan::testing;
using sim::FilterPolicy;

namespace {

const ProbeTarget kTarget{kOutpost, 80};

sim::HostConfig filtered_host(FilterPolicy f, double noise = 0.0) {
  auto h = global_host(1000, noise);
  h.filter_policy = f;
  return h;
}

SpoofCheckParams params_for(int m, double noise = 0.0) {
  SpoofCheckParams p;
  p.m = m;
  p.noise_rate_pps = noise;
  return p;
}

OutpostResult select(sim::HostConfig h, std::uint64_t seed = 1, OutpostParams op = {},
                     double loss = 0.0) {
  Rig rig(one_host(std::move(h), seed, loss));
  Rng rng(mix_seed(seed, 5));
  return select_outpost(rig.net, kTarget, op, rng);
}

/// Forwards to a SimTransport; runs `hook` before the n-th packet from
/// `watch` is sent.
class Tap final : public Transport {
public:
  Tap(SimTransport& inner, Ipv4Addr watch, int n, std::function<void()> hook)
      : inner_(inner), watch_(watch), n_(n), hook_(std::move(hook)) {}

  TransportCaps caps() const override { return inner_.caps(); }
  Ipv4Addr local_address() const override { return inner_.local_address(); }
  Millis now() const override { return inner_.now(); }
  void send(const Packet& pkt) override {
    if (pkt.src_ip == watch_ && ++seen_ == n_)
      hook_();
    inner_.send(pkt);
  }
  std::optional<Inbound> recv_match(const FlowFilter& f, Millis timeout) override {
    return inner_.recv_match(f, timeout);
  }
  void wait_until(Millis t) override { inner_.wait_until(t); }
  RstGuard suppress_local_rst(const Flow& flow) override {
    return inner_.suppress_local_rst(flow);
  }

private:
  SimTransport& inner_;
  Ipv4Addr watch_;
  int n_;
  int seen_ = 0;
  std::function<void()> hook_;
};

} // namespace

TEST(ChooseM, Examples) {
  EXPECT_EQ(choose_m({0.0, 9}), 2);
  EXPECT_EQ(choose_m({2.0, 9}), 4);
  EXPECT_EQ(choose_m({3.5, 9}), 8);
  EXPECT_EQ(choose_m({0.3, 9}), 2);
  EXPECT_EQ(choose_m({1.0, 9}), 2);
  EXPECT_EQ(choose_m({1.01, 9}), 4);
}

TEST(ChooseM, MatchesFormulaOnGrid) {
  for (int i = 0; i <= 1000; ++i) {
    const double rate = i / 100.0;
    int ceil_rate = 0;
    while (ceil_rate < rate - 1e-9)
      ++ceil_rate;
    EXPECT_EQ(choose_m({rate, 9}), std::max(2, 2 * ceil_rate)) << rate;
  }
}

TEST(SpoofBands, NoiselessBandsForMTwo) {
  const auto b = spoof_bands(params_for(2), 1, 1, 0.25);
  EXPECT_EQ(b.received, (Band{3, 4}));
  EXPECT_EQ(b.filtered, (Band{1, 2}));
}

TEST(SpoofBands, WideSpanRaisesReceivedFloor) {
  // Noise 4 over 1.25 s: allowance ceil(5 + sqrt 5) = 8, so a received
  // reading must exceed 2 probes + 8.
  const auto b = spoof_bands(params_for(8, 4.0), 1, 2, 1.25);
  EXPECT_EQ(b.received, (Band{11, 19}));
  EXPECT_EQ(b.filtered, (Band{1, 10}));
}

TEST(SpoofBands, AlwaysDisjointAndOrdered) {
  Rng rng(3);
  for (int i = 0; i < 5000; ++i) {
    auto p = params_for(static_cast<int>(uniform_int(rng, 2, 12)), uniform01(rng) * 6);
    p.slack = static_cast<int>(uniform_int(rng, 0, 3));
    p.noise_z = uniform01(rng) * 2;
    const int lo = 1;
    const int hi = static_cast<int>(uniform_int(rng, 1, 4));
    const double span = 0.1 + uniform01(rng) * 3;
    const auto b = spoof_bands(p, lo, hi, span);
    const int allow = noise_allowance(p.noise_rate_pps, span, p.noise_z);
    EXPECT_EQ(b.filtered.lo, lo);
    EXPECT_LE(b.filtered.hi, hi + p.slack + allow);
    EXPECT_LT(b.filtered.hi, b.received.lo);
    EXPECT_GT(b.received.lo, hi + allow);
    EXPECT_EQ(b.received.hi, p.m + hi + p.slack + allow);
  }
}

TEST(SpoofTimeline, BurstSitsBetweenSeries) {
  const auto p = params_for(5);
  const auto t = spoof_timeline(p, 2000);
  EXPECT_EQ(t.pre, (std::vector<Millis>{2000, 3000, 4000, 5000}));
  ASSERT_EQ(t.burst.size(), 5u);
  EXPECT_EQ(t.burst.front(), 5000 + p.lead_ms);
  EXPECT_EQ(t.burst.back(), 5000 + p.lead_ms + p.spread_ms);
  EXPECT_TRUE(std::is_sorted(t.burst.begin(), t.burst.end()));
  EXPECT_EQ(t.post.front(), t.burst.back() + p.tail_ms);
  EXPECT_EQ(t.post.size(), 4u);
}

TEST(SpoofCheck, IdealOutpostSeesMPlusOne) {
  Rig rig(one_host(global_host()));
  Rng rng(1);
  const auto r = spoof_check(rig.net, kTarget, kPublicSpoof, params_for(2), rng);
  EXPECT_EQ(r.increment, 3);
  EXPECT_EQ(r.outcome, SpoofOutcome::SpoofReceived);
}

TEST(SpoofCheck, BlockAllSpoofedSeesOne) {
  Rig rig(one_host(filtered_host(FilterPolicy::BlockAllSpoofed)));
  Rng rng(1);
  const auto r = spoof_check(rig.net, kTarget, kPublicSpoof, params_for(5), rng);
  EXPECT_EQ(r.increment, 1);
  EXPECT_EQ(r.outcome, SpoofOutcome::SpoofFiltered);
}

TEST(SpoofCheck, DuplicatedSynsOpenOneFlow) {
  auto h = global_host();
  h.retrans_behavior = {1, 5, true};
  Rig rig(one_host(h));
  Rng rng(1);
  const auto r = spoof_check(rig.net, kTarget, kPublicSpoof, params_for(6), rng);
  EXPECT_EQ(rig.sim.pending_flows(kOutpost), 1u);
  std::set<std::uint32_t> seqs;
  std::set<std::uint16_t> ports;
  for (const auto& e : rig.stimulus())
    if (e.packet.src_ip == kPublicSpoof) {
      seqs.insert(e.packet.seq);
      ports.insert(e.packet.src_port);
    }
  EXPECT_EQ(seqs.size(), 6u);
  EXPECT_EQ(ports.size(), 1u);
  EXPECT_EQ(r.outcome, SpoofOutcome::SpoofReceived);
}

TEST(SpoofCheck, DeterministicFunctionOfPolicyAtZeroNoise) {
  for (auto f : {FilterPolicy::NoFiltering, FilterPolicy::BlockPrivateSourceOnly,
                 FilterPolicy::BlockAllSpoofed})
    for (int m = 2; m <= 8; ++m)
      for (Ipv4Addr src : {kPublicSpoof, kPrivateSpoof}) {
        Rig rig(one_host(filtered_host(f)));
        Rng rng(static_cast<std::uint64_t>(m));
        const auto r = spoof_check(rig.net, kTarget, src, params_for(m), rng);
        const bool passes = f == FilterPolicy::NoFiltering ||
                            (f == FilterPolicy::BlockPrivateSourceOnly && src == kPublicSpoof);
        EXPECT_EQ(r.increment, passes ? m + 1 : 1);
        EXPECT_EQ(r.outcome, passes ? SpoofOutcome::SpoofReceived : SpoofOutcome::SpoofFiltered)
            << to_string(f) << " m=" << m << ' ' << src.to_string();
      }
}

TEST(SpoofCheck, NeverReceivedWithoutAcceptedSpoofAtZeroNoise) {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    Rig rig(one_host(filtered_host(FilterPolicy::BlockAllSpoofed), seed, 0.15));
    Rng rng(seed);
    const int m = 2 + static_cast<int>(seed % 5);
    try {
      const auto r = spoof_check(rig.net, kTarget, kPublicSpoof, params_for(m), rng);
      EXPECT_NE(r.outcome, SpoofOutcome::SpoofReceived) << "seed " << seed;
    } catch (const ScanError&) {
    }
    for (const auto& e : rig.sim.log())
      ASSERT_FALSE(e.kind == sim::EventKind::Accepted && e.packet.src_ip == kPublicSpoof);
  }
}

TEST(SpoofCheck, RarelyReceivedWithoutAcceptedSpoofUnderNoise) {
  int false_received = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    Rig rig(one_host(filtered_host(FilterPolicy::BlockAllSpoofed, 4.0), seed, 0.05));
    Rng rng(seed);
    try {
      false_received += spoof_check(rig.net, kTarget, kPublicSpoof, params_for(8, 4.0), rng)
                            .outcome == SpoofOutcome::SpoofReceived;
    } catch (const ScanError&) {
    }
  }
  EXPECT_LE(false_received, 10); // 2%: all from boundary samples lost to the 5% loss
}

TEST(SpoofCheck, NoiseTwoAccuracyOverFiveHundredSeeds) {
  int correct = 0, decided = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const bool filtered = seed % 2 == 1;
    Rig rig(one_host(
        filtered_host(filtered ? FilterPolicy::BlockAllSpoofed : FilterPolicy::NoFiltering, 2.0),
        seed));
    Rng rng(mix_seed(seed, 1));
    const auto r = spoof_check(rig.net, kTarget, kPublicSpoof, params_for(4, 2.0), rng);
    if (r.outcome == SpoofOutcome::Inconclusive)
      continue;
    ++decided;
    correct += (r.outcome == SpoofOutcome::SpoofFiltered) == filtered;
  }
  EXPECT_GE(decided, 450);
  EXPECT_GE(correct, 475); // at least 95% of all 500 runs
}

TEST(SpoofCheck, MissingBoundarySamples) {
  const IpidSeries none(1, {std::nullopt, std::nullopt});
  const IpidSeries some(1, {5, 6});
  try {
    evaluate_spoof({0, none}, {5000, some}, params_for(2));
    FAIL();
  } catch (const ScanError& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingSamples);
  }
  EXPECT_THROW(evaluate_spoof({0, some}, {5000, none}, params_for(2)), ScanError);
}

TEST(SpoofCheck, BoundaryUsesLastAndFirstAnsweredSamples) {
  const IpidSeries pre(1, {10, 11, 12, std::nullopt});
  const IpidSeries post(1, {std::nullopt, 20, 21, 22});
  const auto r = evaluate_spoof({0, pre}, {3150, post}, params_for(4));
  EXPECT_EQ(r.increment, 8);
  EXPECT_DOUBLE_EQ(r.span_s, 2.15);
  EXPECT_EQ(r.outcome, SpoofOutcome::SpoofReceived);
}

TEST(LocalCheck, PrivateOnlyFilteringSplitsTheChecks) {
  Rig rig(one_host(filtered_host(FilterPolicy::BlockPrivateSourceOnly)));
  Rng rng(1);
  const auto p = params_for(5);
  const auto pub = spoof_check(rig.net, kTarget, kPublicSpoof, p, rng);
  EXPECT_EQ(pub.outcome, SpoofOutcome::SpoofReceived);
  const auto loc = local_check(rig.net, kTarget, kPrivateSpoof, p, rng, pub.post);
  EXPECT_EQ(loc.outcome, SpoofOutcome::SpoofFiltered);
  EXPECT_FALSE(loc.confirmation);
}

TEST(LocalCheck, NoFilteringIsConfirmed) {
  Rig rig(one_host(global_host()));
  Rng rng(1);
  const auto loc = local_check(rig.net, kTarget, kPrivateSpoof, params_for(3), rng);
  EXPECT_EQ(loc.first.outcome, SpoofOutcome::SpoofReceived);
  ASSERT_TRUE(loc.confirmation);
  EXPECT_EQ(loc.confirmation->outcome, SpoofOutcome::SpoofReceived);
  EXPECT_EQ(loc.outcome, SpoofOutcome::SpoofReceived);
}

TEST(LocalCheck, FlakyConfirmationIsInconclusive) {
  Rig rig(one_host(global_host()));
  const int m = 3;
  // Before the confirmation's first SYN, a third party makes the outpost
  // emit 30 extra packets.
  Tap tap(rig.net, kPrivateSpoof, m + 1, [&] {
    for (std::uint16_t i = 0; i < 30; ++i)
      rig.sim.inject({Ipv4Addr(8, 8, 8, 8), kOutpost, static_cast<std::uint16_t>(1000 + i), 80,
                      TcpFlags::syn_ack(), 1, 1, 0},
                     sim::Origin::Noise);
  });
  Rng rng(1);
  const auto loc = local_check(tap, kTarget, kPrivateSpoof, params_for(m), rng);
  EXPECT_EQ(loc.first.outcome, SpoofOutcome::SpoofReceived);
  ASSERT_TRUE(loc.confirmation);
  EXPECT_EQ(loc.confirmation->outcome, SpoofOutcome::Inconclusive);
  EXPECT_EQ(loc.outcome, SpoofOutcome::Inconclusive);
}

TEST(SelectOutpost, ThreeFilteringCasesAtMFive) {
  OutpostParams op;
  op.fixed_m = 5;
  EXPECT_EQ(select(filtered_host(FilterPolicy::BlockAllSpoofed), 1, op).verdict,
            OutpostVerdict::SpoofedPublicFiltered);
  EXPECT_EQ(select(filtered_host(FilterPolicy::BlockPrivateSourceOnly), 1, op).verdict,
            OutpostVerdict::SpoofedPrivateFiltered);
  const auto ideal = select(filtered_host(FilterPolicy::NoFiltering), 1, op);
  EXPECT_EQ(ideal.verdict, OutpostVerdict::QualifiedOutpost);
  EXPECT_EQ(ideal.evidence.m, 5);
  EXPECT_EQ(ideal.evidence.checks.size(), 3u);
  EXPECT_EQ(ideal.evidence.attempts, 1);
}

TEST(SelectOutpost, FilteredVerdictIsRepeatedBeforeItSticks) {
  OutpostParams op;
  op.attempts = 3;
  const auto r = select(filtered_host(FilterPolicy::BlockAllSpoofed), 1, op);
  EXPECT_EQ(r.verdict, OutpostVerdict::SpoofedPublicFiltered);
  EXPECT_EQ(r.evidence.attempts, 3);
  EXPECT_EQ(r.evidence.checks.size(), 1u); // the last run only
  op.attempts = 1;
  EXPECT_EQ(select(filtered_host(FilterPolicy::BlockAllSpoofed), 1, op).evidence.attempts, 1);
}

TEST(SelectOutpost, VerdictPerHostKind) {
  EXPECT_EQ(select(global_host()).verdict, OutpostVerdict::QualifiedOutpost);

  auto per_flow = global_host();
  per_flow.ipid_policy = sim::PerFlowCounter{5};
  EXPECT_EQ(select(per_flow).verdict, OutpostVerdict::SpoofedPublicFiltered);

  auto constant = global_host();
  constant.ipid_policy = sim::ConstantIpid{1234};
  EXPECT_EQ(select(constant).verdict, OutpostVerdict::NotSharedIpid);

  auto random = global_host();
  random.ipid_policy = sim::RandomIpid{77};
  EXPECT_EQ(select(random).verdict, OutpostVerdict::NotSharedIpid);

  EXPECT_EQ(select(global_host(0, 20.0)).verdict, OutpostVerdict::TooNoisy);

  auto silent = global_host();
  silent.responds_to_synack = false;
  EXPECT_EQ(select(silent).verdict, OutpostVerdict::NoRstResponse);
}

TEST(SelectOutpost, PacketBudget) {
  for (double noise : {0.0, 1.0, 2.5}) {
    Rig rig(one_host(global_host(7, noise), 4));
    Rng rng(4);
    const auto r = select_outpost(rig.net, kTarget, {}, rng);
    const int m = r.evidence.m;
    std::size_t sent = 0;
    for (const auto& e : rig.stimulus())
      sent += e.origin == sim::Origin::Scanner;
    EXPECT_LE(sent, static_cast<std::size_t>(10 + (4 + 4 + m) + (4 + m) + (4 + m)))
        << "noise " << noise;
  }
}

TEST(SelectOutpost, QualifiedHostsAcrossSeeds) {
  int qualified = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed)
    qualified += select(global_host(static_cast<std::uint16_t>(seed * 611), 1.5), seed).verdict ==
                 OutpostVerdict::QualifiedOutpost;
  EXPECT_GE(qualified, 90);
}
