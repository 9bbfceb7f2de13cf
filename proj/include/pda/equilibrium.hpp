#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pda/clearing.hpp"
#include "pda/game.hpp"
#include "pda/policies.hpp"

namespace pda {

/// Clearing outcome implied by the equilibrium table when every buyer plays
/// the equilibrium bid. Computed from the indices alone, never by matching.
struct ClearingPrediction {
  Regime regime = Regime::kEnoughRounds;
  BuyerId marginal = 0;
  ClearingPrice mcp;
  Quantity total;
  std::vector<Quantity> fills;
};

inline std::optional<ClearingPrediction> lemma1_predict(const GameState& state, const GameConfig& cfg) {
  const auto idx = compute_indices(state, cfg);
  if (!idx) return std::nullopt;
  ClearingPrediction p;
  p.regime = idx->regime;
  p.marginal = idx->marginal_buyer();
  const std::size_t rank = idx->price_rank();
  p.mcp = state.curve.at_rank(rank).price.widen<ClearingPrice::kScale>();
  p.total = std::min(state.curve.prefix_quantity(rank), state.total_requirement());
  p.fills = state.requirements;
  Quantity others;
  for (BuyerId b = 0; b < p.fills.size(); ++b) {
    if (b != p.marginal) others += p.fills[b];
  }
  p.fills[p.marginal] = p.total - others;
  return p;
}

/// Removes `amount` units from the cheap end of the curve.
inline SupplyCurve consume_front(const SupplyCurve& curve, Quantity amount) {
  std::vector<Ask> rest;
  for (const auto& a : curve.asks()) {
    if (amount >= a.quantity) {
      amount -= a.quantity;
      continue;
    }
    rest.push_back({a.price, a.quantity - amount});
    amount = Quantity{};
  }
  return SupplyCurve(std::move(rest));
}

/// Equilibrium value of `buyer` from `state`: a non-marginal buyer pays the
/// round's clearing price on its whole requirement; the marginal buyer pays
/// it on its residual fill and then, alone in the market, the predicted
/// clearing price times the predicted cleared quantity in each later round.
inline Money closed_form_value(const GameState& state, BuyerId buyer, const GameConfig& cfg) {
  if (state.requirements.at(buyer).is_zero() || state.round > cfg.horizon) {
    return to_money(cfg.balancing_price, state.requirements.at(buyer));
  }
  auto pred = lemma1_predict(state, cfg);
  if (buyer != pred->marginal) return to_money(pred->mcp, state.requirements[buyer]);

  Money value = to_money(pred->mcp, pred->fills[buyer]);
  GameState s{state.round + 1, pred->fills, consume_front(state.curve, pred->total)};
  for (BuyerId b = 0; b < s.requirements.size(); ++b) s.requirements[b] = state.requirements[b] - pred->fills[b];

  while (s.round <= cfg.horizon && s.requirements[buyer] > Quantity{}) {
    pred = lemma1_predict(s, cfg);
    value += to_money(pred->mcp, pred->total);
    for (BuyerId b = 0; b < s.requirements.size(); ++b) s.requirements[b] -= pred->fills[b];
    s.curve = consume_front(s.curve, pred->total);
    ++s.round;
  }
  return value + to_money(cfg.balancing_price, s.requirements[buyer]);
}

struct MonotonicityCheck {
  bool ok = true;
  std::optional<int> violation_round;
};

/// MCPs of trading rounds must never decrease.
inline MonotonicityCheck check_mcp_monotone(const Trajectory& traj) {
  std::optional<ClearingPrice> prev;
  for (const auto& s : traj.steps) {
    if (!s.outcome.mcp) continue;
    if (prev && *s.outcome.mcp < *prev) return {false, s.state.round};
    prev = s.outcome.mcp;
  }
  return {};
}

struct BidGrid {
  std::vector<Price> prices;
  std::vector<Quantity> quantities;

  std::size_t size() const { return prices.size() * quantities.size(); }
  bool contains(const Bid& b) const {
    return std::find(prices.begin(), prices.end(), b.price) != prices.end() &&
           std::find(quantities.begin(), quantities.end(), b.quantity) != quantities.end();
  }
};

struct GridSpec {
  /// Quantity points are i / quantity_steps of the requirement, i = 0..steps.
  int quantity_steps = 4;
  bool midpoints = true;
};

template <typename T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

/// Deviation grid around the equilibrium bid: 0, every ask price and the
/// midpoints between neighbours, the equilibrium price points and p_max.
inline BidGrid full_grid(const GameState& state, BuyerId buyer, const GameConfig& cfg, const GridSpec& spec = {}) {
  BidGrid g;
  g.prices = {Price{}, cfg.p_max};
  const auto& asks = state.curve.asks();
  for (std::size_t m = 0; m < asks.size(); ++m) {
    g.prices.push_back(asks[m].price);
    if (spec.midpoints && m + 1 < asks.size()) g.prices.push_back(midpoint_floor(asks[m].price, asks[m + 1].price));
  }
  if (auto idx = compute_indices(state, cfg)) {
    g.prices.push_back(state.curve.at_rank(idx->price_rank()).price);
    if (idx->z >= 1 && static_cast<std::size_t>(idx->z) <= asks.size()) {
      g.prices.push_back(state.curve.at_rank(static_cast<std::size_t>(idx->z)).price);
    }
    for (BuyerId b : idx->order) g.prices.push_back(state.curve.at_rank(idx->v[b]).price);
  }
  sort_unique(g.prices);

  const Quantity q = state.requirements.at(buyer);
  const int steps = std::max(1, spec.quantity_steps);
  for (int i = 0; i <= steps; ++i) g.quantities.push_back(fraction_floor(q, i, steps));
  sort_unique(g.quantities);
  return g;
}

/// At most 5 prices x 3 quantities for the exhaustive multi-round search.
inline BidGrid compact_grid(const GameState& state, BuyerId buyer, const GameConfig& cfg) {
  BidGrid g;
  const Bid prescribed = mpne_bid(state, buyer, cfg);
  g.prices = {Price{}, prescribed.price, cfg.p_max};
  if (!state.curve.empty()) g.prices.push_back(state.curve.at_rank(1).price);
  if (auto idx = compute_indices(state, cfg)) g.prices.push_back(state.curve.at_rank(idx->price_rank()).price);
  sort_unique(g.prices);
  if (g.prices.size() < 5) {
    // an ask just below the prescribed price, when one exists
    std::optional<Price> below;
    for (const auto& a : state.curve.asks()) {
      if (a.price < prescribed.price) below = a.price;
    }
    if (below) g.prices.push_back(*below);
    sort_unique(g.prices);
  }
  const Quantity q = state.requirements.at(buyer);
  g.quantities = {Quantity{}, fraction_floor(q, 1, 2), q};
  sort_unique(g.quantities);
  return g;
}

using GridBuilder = std::function<BidGrid(const GameState&, BuyerId, const GameConfig&)>;

inline GridBuilder full_grid_builder(GridSpec spec = {}) {
  return [spec](const GameState& s, BuyerId b, const GameConfig& cfg) { return full_grid(s, b, cfg, spec); };
}

struct DeviationReport {
  BuyerId buyer = 0;
  /// Round of the (first) deviating bid.
  int round = 0;
  Bid deviation;
  Money v_dev;
  Money v_mpne;
  Money margin;
  /// Units the deviator still had to buy at the balancing price.
  Quantity dev_residual;
  /// Multi-round mode: every deviator bid, "h:price@qty;..."
  std::string path;
};

struct SearchResult {
  std::vector<DeviationReport> reports;

  const DeviationReport* worst() const {
    const DeviationReport* w = nullptr;
    for (const auto& r : reports) {
      if (!w || r.margin < w->margin) w = &r;
    }
    return w;
  }
  Money min_margin() const { return worst() ? worst()->margin : Money{}; }
  bool nash_holds() const { return min_margin() >= Money{}; }
};

inline Money cost_from(const Trajectory& traj, BuyerId b, std::size_t first_step) {
  Money sum = traj.terminal_costs.at(b);
  for (std::size_t i = first_step; i < traj.steps.size(); ++i) sum += traj.steps[i].costs.at(b);
  return sum;
}

/// One-shot deviations: at every round of the equilibrium path, replace
/// `buyer`'s bid with each grid point, let everyone resume the equilibrium,
/// and compare values from that round on.
inline SearchResult best_response_search(const GameState& initial, BuyerId buyer, const GameConfig& cfg,
                                         const GridBuilder& grid_for = full_grid_builder()) {
  const PolicyProfile mpne = uniform_profile(initial.requirements.size(), mpne_policy());
  const Trajectory path = rollout(initial, mpne, cfg);
  SearchResult result;
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    const GameState& state = path.steps[i].state;
    const BidGrid grid = grid_for(state, buyer, cfg);
    const Bid prescribed = mpne_bid(state, buyer, cfg);
    if (!grid.contains(prescribed)) {
      throw RejectedInput("deviation grid at round " + std::to_string(state.round) +
                          " does not contain the equilibrium bid " + prescribed.price.str() + "@" +
                          prescribed.quantity.str());
    }
    const Money v_mpne = cost_from(path, buyer, i);
    for (const Price p : grid.prices) {
      for (const Quantity q : grid.quantities) {
        const Bid dev{buyer, p, q};
        PolicyProfile profile = mpne;
        profile[buyer] = scripted_policy(mpne_policy(), buyer, {{state.round, dev}});
        const Trajectory t = rollout(state, profile, cfg);
        DeviationReport r;
        r.buyer = buyer;
        r.round = state.round;
        r.deviation = dev;
        r.v_dev = t.total_cost(buyer);
        r.v_mpne = v_mpne;
        r.margin = r.v_dev - r.v_mpne;
        r.dev_residual = t.terminal.requirements[buyer];
        result.reports.push_back(std::move(r));
      }
    }
  }
  return result;
}

inline constexpr int kExhaustiveMaxRounds = 3;
inline constexpr std::size_t kExhaustiveMaxGrid = 15;

/// Every sequence of grid bids for `buyer` over the remaining rounds, with
/// the other buyers reacting through the equilibrium policy.
inline SearchResult exhaustive_search(const GameState& initial, BuyerId buyer, const GameConfig& cfg,
                                      const GridBuilder& grid_for = compact_grid) {
  if (cfg.horizon - initial.round + 1 > kExhaustiveMaxRounds) {
    throw std::domain_error("exhaustive search supports at most " + std::to_string(kExhaustiveMaxRounds) +
                            " remaining rounds");
  }
  const PolicyProfile mpne = uniform_profile(initial.requirements.size(), mpne_policy());
  const Money v_mpne = rollout(initial, mpne, cfg).total_cost(buyer);
  SearchResult result;

  struct Frame {
    std::optional<int> first_round;
    Bid first_bid;
    std::string path;
  };

  std::function<void(const GameState&, Money, const Frame&)> descend = [&](const GameState& s, Money acc,
                                                                           const Frame& f) {
    if (s.round > cfg.horizon) {
      DeviationReport r;
      r.buyer = buyer;
      r.round = f.first_round.value_or(initial.round);
      r.deviation = f.first_round ? f.first_bid : mpne_bid(initial, buyer, cfg);
      r.v_dev = acc + to_money(cfg.balancing_price, s.requirements[buyer]);
      r.v_mpne = v_mpne;
      r.margin = r.v_dev - v_mpne;
      r.dev_residual = s.requirements[buyer];
      r.path = f.path;
      result.reports.push_back(std::move(r));
      return;
    }
    const BidGrid grid = grid_for(s, buyer, cfg);
    if (grid.size() > kExhaustiveMaxGrid) {
      throw std::domain_error("exhaustive search grid has " + std::to_string(grid.size()) + " points, limit " +
                              std::to_string(kExhaustiveMaxGrid));
    }
    const Bid prescribed = mpne_bid(s, buyer, cfg);
    if (!grid.contains(prescribed)) {
      throw RejectedInput("deviation grid at round " + std::to_string(s.round) +
                          " does not contain the equilibrium bid");
    }
    std::vector<Bid> others;
    for (BuyerId b = 0; b < s.requirements.size(); ++b) {
      if (b != buyer) others.push_back(mpne_bid(s, b, cfg));
    }
    for (const Price p : grid.prices) {
      for (const Quantity q : grid.quantities) {
        std::vector<Bid> bids = others;
        const Bid mine{buyer, p, q};
        bids.push_back(mine);
        const Transition t = transition(s, bids, cfg);
        Frame next = f;
        if (!next.first_round && !(mine == prescribed)) {
          next.first_round = s.round;
          next.first_bid = mine;
        }
        next.path += (f.path.empty() ? "" : ";") + std::to_string(s.round) + ":" + p.str() + "@" + q.str();
        descend(t.next, acc + t.costs[buyer], next);
      }
    }
  };
  descend(initial, Money{}, Frame{});
  return result;
}

inline void write_deviations_csv(std::ostream& os, const std::string& scenario_id,
                                 const std::vector<DeviationReport>& reports, bool header = true) {
  if (header) os << "scenario,buyer,round,dev_price,dev_qty,v_dev,v_mpne,margin\n";
  for (const auto& r : reports) {
    os << scenario_id << ',' << r.buyer << ',' << r.round << ',' << r.deviation.price.str() << ','
       << r.deviation.quantity.str() << ',' << r.v_dev.str() << ',' << r.v_mpne.str() << ',' << r.margin.str()
       << '\n';
  }
}

}  // namespace pda
