#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pda/clearing.hpp"
#include "pda/decimal.hpp"

namespace pda {

struct GameConfig {
  std::size_t n_buyers = 0;
  int horizon = 1;
  Ratio k = kAverageClearingFraction;
  Price p_max;
  /// Per-unit price of procuring leftover demand outside the auctions (Psi).
  Price balancing_price;
  Ratio beta = Ratio::from_int(2);
};

/// Returns an empty string when the config is usable, otherwise a message
/// naming the offending field.
inline std::string config_error(const GameConfig& cfg, const SupplyCurve& initial_curve) {
  if (cfg.n_buyers == 0) return "requirements: at least one buyer is required";
  if (cfg.horizon < 1) return "horizon: must be at least 1";
  if (cfg.k < Ratio{} || cfg.k > Ratio::from_int(1)) return "k: must lie in [0, 1]";
  if (cfg.beta <= Ratio::from_int(1)) return "beta: must be greater than 1";
  if (cfg.p_max <= Price{}) return "p_max: must be positive";
  if (auto top = initial_curve.max_price(); top && cfg.p_max <= *top) {
    return "p_max: must exceed the largest ask price (" + top->str() + ")";
  }
  const auto floor = cfg.beta * cfg.p_max;
  if (cfg.balancing_price.widen<2 * kBaseScale>() <= floor) {
    return "psi: balancing price must exceed beta * p_max = " + floor.str() +
           " (premise of the equilibrium result)";
  }
  return {};
}

struct GameState {
  /// 1-based round; horizon + 1 is the terminal settlement pseudo-round.
  int round = 1;
  std::vector<Quantity> requirements;
  SupplyCurve curve;

  Quantity total_requirement() const {
    Quantity s;
    for (auto q : requirements) s += q;
    return s;
  }
};

using Rng = std::mt19937_64;

/// Markov policy for one buyer. Deterministic policies ignore the stream.
/// A nullopt (or zero-quantity bid) means the buyer sits the round out.
using Policy = std::function<std::optional<Bid>(const GameState&, BuyerId, const GameConfig&, Rng&)>;
using PolicyProfile = std::vector<Policy>;

struct Transition {
  GameState next;
  ClearingOutcome outcome;
  std::vector<Money> costs;
};

inline void validate_bids(const GameState& state, std::span<const Bid> bids, const GameConfig& cfg) {
  check_one_bid_per_buyer(bids);
  for (const auto& b : bids) {
    if (b.buyer >= state.requirements.size()) {
      throw RejectedInput("bid from unknown buyer " + std::to_string(b.buyer));
    }
    if (b.price < Price{} || b.price > cfg.p_max) {
      throw RejectedInput("buyer " + std::to_string(b.buyer) + " bid price " + b.price.str() +
                          " outside [0, " + cfg.p_max.str() + "]");
    }
    if (b.quantity < Quantity{} || b.quantity > state.requirements[b.buyer]) {
      throw RejectedInput("buyer " + std::to_string(b.buyer) + " bid quantity " + b.quantity.str() +
                          " exceeds outstanding requirement " + state.requirements[b.buyer].str());
    }
  }
}

/// One auction round: clear, charge every filled buyer the MCP, and roll the
/// unfilled asks and requirements forward.
inline Transition transition(const GameState& state, std::span<const Bid> bids, const GameConfig& cfg) {
  if (state.round < 1 || state.round > cfg.horizon) {
    throw std::logic_error("transition called at round " + std::to_string(state.round) +
                           " outside 1.." + std::to_string(cfg.horizon));
  }
  validate_bids(state, bids, cfg);
  Transition t;
  t.outcome = clear_auction(state.curve, bids, cfg.k);
  t.costs.assign(state.requirements.size(), Money{});
  t.next.round = state.round + 1;
  t.next.requirements = state.requirements;
  for (const auto& [buyer, fill] : t.outcome.fills) {
    t.next.requirements[buyer] -= fill;
    t.costs[buyer] = to_money(*t.outcome.mcp, fill);
  }
  t.next.curve = rollover_supply(t.outcome);
  return t;
}

/// Settlement after the last auction: Psi times each buyer's leftover.
inline std::vector<Money> terminal_costs(const GameState& state, const GameConfig& cfg) {
  std::vector<Money> costs;
  costs.reserve(state.requirements.size());
  for (auto q : state.requirements) costs.push_back(to_money(cfg.balancing_price, q));
  return costs;
}

struct Step {
  GameState state;
  std::vector<Bid> bids;
  ClearingOutcome outcome;
  std::vector<Money> costs;
};

struct Trajectory {
  std::vector<Step> steps;
  GameState terminal;
  std::vector<Money> terminal_costs;

  Money total_cost(BuyerId b) const {
    Money sum = terminal_costs.at(b);
    for (const auto& s : steps) sum += s.costs.at(b);
    return sum;
  }

  std::vector<Money> total_costs() const {
    std::vector<Money> out;
    for (BuyerId b = 0; b < terminal_costs.size(); ++b) out.push_back(total_cost(b));
    return out;
  }
};

/// Plays the profile from `initial` through the horizon and settles.
inline Trajectory rollout(const GameState& initial, const PolicyProfile& profile, const GameConfig& cfg,
                          std::uint64_t seed = 0) {
  if (profile.size() != initial.requirements.size()) {
    throw RejectedInput("policy profile has " + std::to_string(profile.size()) + " policies for " +
                        std::to_string(initial.requirements.size()) + " buyers");
  }
  Rng rng(seed);
  Trajectory traj;
  GameState state = initial;
  while (state.round <= cfg.horizon) {
    std::vector<Bid> bids;
    for (BuyerId b = 0; b < profile.size(); ++b) {
      if (auto bid = profile[b](state, b, cfg, rng)) {
        bid->buyer = b;
        bids.push_back(*bid);
      }
    }
    Transition t;
    try {
      t = transition(state, bids, cfg);
    } catch (const RejectedInput& e) {
      throw RejectedInput("round " + std::to_string(state.round) + ": " + e.what());
    }
    traj.steps.push_back({state, std::move(bids), std::move(t.outcome), std::move(t.costs)});
    state = std::move(t.next);
  }
  traj.terminal_costs = terminal_costs(state, cfg);
  traj.terminal = std::move(state);
  return traj;
}

inline std::vector<Money> policy_value(const GameState& initial, const PolicyProfile& profile,
                                       const GameConfig& cfg, std::uint64_t seed = 0) {
  return rollout(initial, profile, cfg, seed).total_costs();
}

/// Monte-Carlo mean of the value over `trajectories` rollouts seeded
/// seed, seed + 1, ...
inline std::vector<double> mean_policy_value(const GameState& initial, const PolicyProfile& profile,
                                             const GameConfig& cfg, std::uint64_t seed,
                                             std::size_t trajectories) {
  if (trajectories == 0) throw std::invalid_argument("mean_policy_value: need at least one trajectory");
  std::vector<double> mean(initial.requirements.size(), 0.0);
  for (std::size_t t = 0; t < trajectories; ++t) {
    const auto v = policy_value(initial, profile, cfg, seed + t);
    for (std::size_t b = 0; b < v.size(); ++b) mean[b] += v[b].to_double();
  }
  for (auto& m : mean) m /= static_cast<double>(trajectories);
  return mean;
}

/// One row per buyer per round, plus a settlement row at horizon + 1.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "round,buyer,bid_price,bid_qty,mcp,fill,cost\n";
  for (const auto& s : traj.steps) {
    for (BuyerId b = 0; b < s.state.requirements.size(); ++b) {
      std::string price, qty;
      for (const auto& bid : s.bids) {
        if (bid.buyer == b) {
          price = bid.price.str();
          qty = bid.quantity.str();
        }
      }
      os << s.state.round << ',' << b << ',' << price << ',' << qty << ','
         << (s.outcome.mcp ? s.outcome.mcp->str() : std::string{}) << ',' << s.outcome.fill_for(b).str()
         << ',' << s.costs[b].str() << '\n';
    }
  }
  for (BuyerId b = 0; b < traj.terminal_costs.size(); ++b) {
    os << traj.terminal.round << ',' << b << ",,,," << traj.terminal.requirements[b].str() << ','
       << traj.terminal_costs[b].str() << '\n';
  }
}

}  // namespace pda
