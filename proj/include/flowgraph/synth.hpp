#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "flowgraph/error.hpp"
#include "flowgraph/flow_model.hpp"

namespace flowgraph::synth {

enum class Separation { low, high };

inline Separation parse_separation(std::string_view s) {
  if (s == "low") return Separation::low;
  if (s == "high") return Separation::high;
  throw InvalidParameter("unknown behaviour separation '" + std::string(s) + "'");
}

inline std::string_view to_string(Separation s) { return s == Separation::low ? "low" : "high"; }

struct SynthConfig {
  std::uint64_t seed = 1;
  double duration = 86400.0;
  std::size_t n_normal_entities = 200;
  std::size_t n_attack_entities = 40;
  double flows_per_entity_rate = 0.0024;  // per entity per second
  double attack_fraction_of_flows = 0.1;
  Separation behaviour_separation = Separation::high;

  void validate() const {
    if (!(duration >= 0.0) || !std::isfinite(duration)) throw InvalidParameter("duration must be >= 0");
    if (!(flows_per_entity_rate >= 0.0) || !std::isfinite(flows_per_entity_rate))
      throw InvalidParameter("flows_per_entity_rate must be >= 0");
    if (!(attack_fraction_of_flows >= 0.0 && attack_fraction_of_flows <= 1.0))
      throw InvalidParameter("attack_fraction_of_flows must lie in [0, 1]");
    if (n_normal_entities == 1) throw InvalidParameter("n_normal_entities must be 0 or >= 2");
    if (n_attack_entities == 1) throw InvalidParameter("n_attack_entities must be 0 or >= 2");
  }
};

/// Fixed entity layout derived from a config. Normal entities split into
/// clients (80%) and servers; attack entities into attackers (a quarter, at
/// least one) and victims, all attack-designated.
struct Population {
  std::vector<EntityId> clients;
  std::vector<EntityId> servers;
  std::vector<EntityId> attackers;
  std::vector<EntityId> victims;
};

namespace detail {

inline std::string ip(int a, std::size_t i) {
  return std::to_string(a) + "." + std::to_string((i >> 16) & 0xff) + "." + std::to_string((i >> 8) & 0xff) + "." +
         std::to_string((i & 0xff) + 1);
}

/// Uniform [0, 1) from the top 53 bits. Keeps output identical across
/// standard library implementations.
inline double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform(rng) * static_cast<double>(n)));
}

inline double exponential(std::mt19937_64& rng, double rate) { return -std::log1p(-uniform(rng)) / rate; }

inline double normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform(rng);
  const double u2 = uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double lognormal(std::mt19937_64& rng, double mu, double sigma) { return std::exp(mu + sigma * normal(rng)); }

inline std::uint64_t count(double v) { return static_cast<std::uint64_t>(std::max(1.0, std::round(v))); }

}  // namespace detail

inline Population population(const SynthConfig& config) {
  config.validate();
  Population p;
  const std::size_t nn = config.n_normal_entities;
  if (nn > 0) {
    const std::size_t clients = std::clamp<std::size_t>(nn * 4 / 5, 1, nn - 1);
    static constexpr std::uint16_t kServicePorts[] = {80, 443, 22, 53, 25, 8080};
    for (std::size_t i = 0; i < clients; ++i)
      p.clients.push_back({detail::ip(10, i), static_cast<std::uint16_t>(40000 + i % 20000)});
    for (std::size_t i = 0; i < nn - clients; ++i)
      p.servers.push_back({detail::ip(11, i / 6), kServicePorts[i % 6]});
  }
  const std::size_t na = config.n_attack_entities;
  if (na > 0) {
    const std::size_t attackers = std::clamp<std::size_t>(na / 4, 1, na - 1);
    for (std::size_t i = 0; i < attackers; ++i)
      p.attackers.push_back({detail::ip(172, i), static_cast<std::uint16_t>(50000 + i % 10000)});
    // Victims are probed ports, eight per host.
    for (std::size_t i = 0; i < na - attackers; ++i)
      p.victims.push_back({detail::ip(192, i / 8), static_cast<std::uint16_t>(1024 + i % 8)});
  }
  return p;
}

/// Entities that are attack-designated: attackers and victims.
inline std::vector<EntityId> attack_roster(const SynthConfig& config) {
  auto p = population(config);
  auto roster = p.attackers;
  roster.insert(roster.end(), p.victims.begin(), p.victims.end());
  return roster;
}

/// Poisson-arrival flow stream over [0, duration). Each arrival is an attack
/// flow (attacker to victim) with probability attack_fraction_of_flows, else
/// a normal flow from a client to one of its three preferred servers.
inline std::vector<FlowRecord> generate(const SynthConfig& config) {
  const Population pop = population(config);
  std::vector<FlowRecord> flows;
  const bool has_normal = !pop.clients.empty();
  const bool has_attack = !pop.attackers.empty();
  if (!has_normal && !has_attack) return flows;

  const double total_rate =
      config.flows_per_entity_rate * static_cast<double>(config.n_normal_entities + config.n_attack_entities);
  if (!(total_rate > 0.0) || !(config.duration > 0.0)) return flows;
  const double attack_p = !has_attack ? 0.0 : !has_normal ? 1.0 : config.attack_fraction_of_flows;
  const bool high = config.behaviour_separation == Separation::high;

  std::mt19937_64 rng(config.seed);
  std::vector<std::array<std::size_t, 3>> preferred(pop.clients.size());
  for (auto& pref : preferred)
    for (auto& s : pref) s = detail::pick(rng, pop.servers.size());

  flows.reserve(static_cast<std::size_t>(total_rate * config.duration * 1.05) + 16);
  for (double t = 0.0; t < config.duration; t += detail::exponential(rng, total_rate)) {
    FlowRecord f;
    f.start_time = std::round(t * 1e6) / 1e6;
    if (detail::uniform(rng) < attack_p) {
      f.src = pop.attackers[detail::pick(rng, pop.attackers.size())];
      f.dst = pop.victims[detail::pick(rng, pop.victims.size())];
      f.label = FlowLabel::attack;
      if (high) {
        f.duration = std::round(detail::uniform(rng) * 0.05 * 1e6) / 1e6;
        f.packets_total = 1 + detail::pick(rng, 3);
        f.bytes_src_to_dst = 40 + detail::pick(rng, 120);
        f.bytes_dst_to_src = detail::pick(rng, 60);
        flows.push_back(f);
        continue;
      }
    } else {
      const auto c = detail::pick(rng, pop.clients.size());
      f.src = pop.clients[c];
      f.dst = pop.servers[preferred[c][detail::pick(rng, 3)]];
    }
    f.duration = std::round(detail::lognormal(rng, 0.5, 1.0) * 1e6) / 1e6;
    f.bytes_src_to_dst = detail::count(detail::lognormal(rng, 6.5, 1.0));
    f.bytes_dst_to_src = detail::count(detail::lognormal(rng, 8.5, 1.2));
    f.packets_total = detail::count(static_cast<double>(f.bytes_src_to_dst + f.bytes_dst_to_src) / 700.0 + 2.0);
    flows.push_back(f);
  }
  return flows;
}

}  // namespace flowgraph::synth
