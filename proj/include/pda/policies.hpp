#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pda/clearing.hpp"
#include "pda/game.hpp"

namespace pda {

enum class Regime {
  /// Enough rounds remain: the largest buyer waits and sets the price at p_{v^phi}.
  kEnoughRounds,
  /// Rounds are scarce: buyer psi sets the price at p_{z}.
  kScarceRounds,
};

/// Per-round equilibrium indices. Ask indices are 1-based ranks into the
/// current curve; `v` is indexed by buyer id and is 0 for satisfied buyers.
struct RoundIndices {
  std::size_t u = 0;
  std::vector<std::size_t> v;
  long z = 0;
  BuyerId phi = 0;
  BuyerId psi = 0;
  /// Buyers with positive requirement, largest requirement first.
  std::vector<BuyerId> order;
  Regime regime = Regime::kEnoughRounds;
  bool requirement_ties = false;

  BuyerId marginal_buyer() const { return regime == Regime::kEnoughRounds ? phi : psi; }
  /// Rank of the ask whose price the marginal buyer bids.
  std::size_t price_rank() const {
    return regime == Regime::kEnoughRounds ? v[phi] : static_cast<std::size_t>(z);
  }
};

/// Smallest rank j with `pred(prefix_j)`; 0 if none.
template <typename Pred>
std::size_t first_prefix_rank(const SupplyCurve& curve, Pred pred) {
  Quantity prefix;
  for (std::size_t j = 1; j <= curve.size(); ++j) {
    prefix += curve.at_rank(j).quantity;
    if (pred(prefix)) return j;
  }
  return 0;
}

/// Returns nullopt when every buyer is satisfied. Throws std::domain_error if
/// outstanding demand exceeds the remaining supply.
inline std::optional<RoundIndices> compute_indices(const GameState& state, const GameConfig& cfg) {
  RoundIndices idx;
  for (BuyerId b = 0; b < state.requirements.size(); ++b) {
    if (state.requirements[b] > Quantity{}) idx.order.push_back(b);
  }
  if (idx.order.empty()) return std::nullopt;

  const Quantity demand = state.total_requirement();
  const Quantity supply = aggregate_supply(state.curve);
  if (demand > supply) {
    throw std::domain_error("inadequate supply at round " + std::to_string(state.round) + ": demand " +
                            demand.str() + " exceeds supply " + supply.str());
  }

  const auto& req = state.requirements;
  std::stable_sort(idx.order.begin(), idx.order.end(), [&](BuyerId a, BuyerId b) { return req[a] > req[b]; });
  for (std::size_t i = 1; i < idx.order.size(); ++i) {
    if (req[idx.order[i]] == req[idx.order[i - 1]]) idx.requirement_ties = true;
  }

  idx.u = first_prefix_rank(state.curve, [&](Quantity p) { return demand <= p; });
  idx.v.assign(req.size(), 0);
  for (BuyerId b : idx.order) {
    const Quantity others = demand - req[b];
    idx.v[b] = first_prefix_rank(state.curve, [&](Quantity p) { return others < p; });
  }

  const long rounds_after = cfg.horizon - state.round;
  idx.z = static_cast<long>(idx.u) - rounds_after;
  idx.phi = idx.order.front();
  idx.psi = idx.phi;
  for (std::size_t i = idx.order.size(); i-- > 0;) {
    if (static_cast<long>(idx.v[idx.order[i]]) <= idx.z) {
      idx.psi = idx.order[i];
      break;
    }
  }

  const long gap = static_cast<long>(idx.u) - static_cast<long>(idx.v[idx.phi]);
  idx.regime = rounds_after >= gap ? Regime::kEnoughRounds : Regime::kScarceRounds;
  if (idx.regime == Regime::kScarceRounds) {
    if (idx.z <= static_cast<long>(idx.v[idx.phi]) || idx.z > static_cast<long>(idx.u)) {
      throw std::logic_error("scarce-round index z = " + std::to_string(idx.z) + " outside (v^phi, u]");
    }
  }
  return idx;
}

/// Equilibrium bid for `buyer`: satisfied buyers bid (0, 0); the marginal
/// buyer bids its full requirement at the price-setting ask; everyone else
/// bids its full requirement at p_max.
inline Bid mpne_bid(const GameState& state, BuyerId buyer, const GameConfig& cfg) {
  Bid bid{buyer, Price{}, Quantity{}};
  if (state.requirements.at(buyer).is_zero()) return bid;
  const auto idx = compute_indices(state, cfg);
  bid.quantity = state.requirements[buyer];
  bid.price = buyer == idx->marginal_buyer() ? state.curve.at_rank(idx->price_rank()).price : cfg.p_max;
  return bid;
}

inline Policy mpne_policy() {
  return [](const GameState& s, BuyerId b, const GameConfig& cfg, Rng&) -> std::optional<Bid> {
    return mpne_bid(s, b, cfg);
  };
}

/// Zero-intelligence bid: full outstanding quantity at a price drawn
/// uniformly from the tick grid on [0, p_max].
inline Bid zi_bid(const GameState& state, BuyerId buyer, const GameConfig& cfg, Rng& rng) {
  Bid bid{buyer, Price{}, Quantity{}};
  if (state.requirements.at(buyer).is_zero()) return bid;
  std::uniform_int_distribution<std::int64_t> ticks(0, cfg.p_max.raw());
  bid.price = Price::from_raw(ticks(rng));
  bid.quantity = state.requirements[buyer];
  return bid;
}

inline Policy zi_policy() {
  return [](const GameState& s, BuyerId b, const GameConfig& cfg, Rng& rng) -> std::optional<Bid> {
    return zi_bid(s, b, cfg, rng);
  };
}

/// Shifts `base`'s bid for `buyer` at the listed rounds by (dp, dq), clamped
/// to [0, p_max] x [0, outstanding requirement].
inline Policy deviation_policy(Policy base, BuyerId buyer, std::set<int> rounds, Price dp, Quantity dq) {
  return [base = std::move(base), buyer, rounds = std::move(rounds), dp, dq](
             const GameState& s, BuyerId b, const GameConfig& cfg, Rng& rng) -> std::optional<Bid> {
    auto bid = base(s, b, cfg, rng);
    if (b != buyer || !rounds.contains(s.round)) return bid;
    Bid out = bid.value_or(Bid{b, Price{}, Quantity{}});
    out.price = std::clamp(out.price + dp, Price{}, cfg.p_max);
    out.quantity = std::clamp(out.quantity + dq, Quantity{}, s.requirements.at(b));
    return out;
  };
}

/// Replaces `buyer`'s bid with a fixed one at the given rounds.
inline Policy scripted_policy(Policy base, BuyerId buyer, std::map<int, Bid> script) {
  return [base = std::move(base), buyer, script = std::move(script)](
             const GameState& s, BuyerId b, const GameConfig& cfg, Rng& rng) -> std::optional<Bid> {
    if (b == buyer) {
      if (auto it = script.find(s.round); it != script.end()) {
        Bid out = it->second;
        out.buyer = b;
        return out;
      }
    }
    return base(s, b, cfg, rng);
  };
}

inline PolicyProfile uniform_profile(std::size_t n, const Policy& p) { return PolicyProfile(n, p); }

}  // namespace pda
