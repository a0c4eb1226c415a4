#pragma once

#include <algorithm>
#include <memory>
#include <vector>

#include "natscan/sim/scenario.hpp"
#include "natscan/sim/simulator.hpp"
#include "natscan/transport/sim_transport.hpp"

namespace natscan::testing {

inline const Ipv4Addr kOutpost{20, 0, 0, 1};
inline const Ipv4Addr kScanner{198, 51, 100, 1};
inline const Ipv4Addr kPublicSpoof{203, 0, 113, 7};
inline const Ipv4Addr kPrivateSpoof{192, 168, 1, 1};

inline sim::HostConfig global_host(std::uint16_t initial = 100, double noise = 0.0) {
  sim::HostConfig h;
  h.public_ip = kOutpost;
  h.ipid_policy = sim::GlobalCounter{initial};
  h.noise_rate_pps = noise;
  return h;
}

inline sim::ScenarioConfig one_host(sim::HostConfig h, std::uint64_t seed = 1,
                                    double loss = 0.0) {
  sim::ScenarioConfig c;
  c.rng_seed = seed;
  c.link_loss_prob = loss;
  c.outposts.push_back(std::move(h));
  return c;
}

/// A simulator and a transport bound to it.
struct Rig {
  explicit Rig(sim::ScenarioConfig cfg, TransportCaps caps = {true, true})
      : sim(std::move(cfg)), net(sim, caps) {}

  sim::Simulator sim;
  SimTransport net;

  std::vector<sim::LogEntry> stimulus() const { return sim.stimulus(); }

  /// Scanner-originated packets (not kernel RSTs) the log shows injected.
  std::size_t scanner_sends() const {
    const auto& log = sim.log();
    return static_cast<std::size_t>(std::count_if(log.begin(), log.end(), [](const auto& e) {
      return e.kind == sim::EventKind::Injected && e.origin == sim::Origin::Scanner;
    }));
  }
};

} // namespace natscan::testing
