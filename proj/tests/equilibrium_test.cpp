#include <gtest/gtest.h>

#include <sstream>

#include "pda/equilibrium.hpp"
#include "pda/scenario.hpp"

using namespace pda;

namespace {

Quantity Q(const char* s) { return Quantity::parse(s); }
Price P(const char* s) { return Price::parse(s); }

Scenario baseline() { return load_scenario(std::string(PDA_SCENARIO_DIR) + "/baseline.yaml"); }

GameConfig config(std::size_t n, int horizon) {
  GameConfig cfg;
  cfg.n_buyers = n;
  cfg.horizon = horizon;
  cfg.p_max = P("10");
  cfg.balancing_price = P("20");
  cfg.beta = Ratio::parse("1.5");
  return cfg;
}

std::vector<Bid> mpne_bids(const GameState& s, const GameConfig& cfg) {
  std::vector<Bid> bids;
  for (BuyerId b = 0; b < s.requirements.size(); ++b) bids.push_back(mpne_bid(s, b, cfg));
  return bids;
}

void expect_prediction_matches_engine(const GameState& s, const GameConfig& cfg) {
  const auto pred = lemma1_predict(s, cfg);
  ASSERT_TRUE(pred);
  const auto out = clear_auction(s.curve, mpne_bids(s, cfg), cfg.k);
  EXPECT_EQ(*out.mcp, pred->mcp);
  EXPECT_EQ(out.total_cleared, pred->total);
  for (BuyerId b = 0; b < s.requirements.size(); ++b) EXPECT_EQ(out.fill_for(b), pred->fills[b]);
}

}  // namespace

TEST(Lemma1Predict, TwoBuyersEnoughRounds) {
  const GameState s{1, {Q("150"), Q("100")}, SupplyCurve({{P("1"), Q("100")}, {P("2"), Q("100")}, {P("3"), Q("100")}})};
  const auto cfg = config(2, 5);
  const auto pred = lemma1_predict(s, cfg);
  EXPECT_EQ(pred->regime, Regime::kEnoughRounds);
  EXPECT_EQ(pred->marginal, 0u);
  EXPECT_EQ(pred->mcp, ClearingPrice::parse("2"));
  EXPECT_EQ(pred->total, Q("200"));
  EXPECT_EQ(pred->fills, (std::vector<Quantity>{Q("100"), Q("100")}));
  expect_prediction_matches_engine(s, cfg);
}

TEST(Lemma1Predict, SingleBuyer) {
  const GameState s{1, {Q("7")}, SupplyCurve({{P("1"), Q("5")}, {P("3"), Q("5")}})};
  expect_prediction_matches_engine(s, config(1, 1));
  expect_prediction_matches_engine(s, config(1, 4));
}

TEST(Lemma1Predict, BaselineRounds) {
  const auto sc = baseline();
  for (int h : {1, 12, 23, 24}) expect_prediction_matches_engine({h, sc.requirements, sc.curve}, sc.cfg);
}

TEST(ClosedFormValue, SatisfiedBuyerIsZero) {
  const GameState s{1, {Q("0"), Q("4")}, SupplyCurve({{P("1"), Q("10")}})};
  EXPECT_EQ(closed_form_value(s, 0, config(2, 2)), Money{});
}

TEST(ClosedFormValue, NonMarginalBuyerPaysOneShot) {
  const auto sc = baseline();
  const GameState s{1, sc.requirements, sc.curve};
  const auto idx = compute_indices(s, sc.cfg);
  const Price p_v = s.curve.at_rank(idx->v[idx->phi]).price;
  EXPECT_EQ(closed_form_value(s, 1, sc.cfg), to_money(p_v, sc.requirements[1]));
  EXPECT_EQ(closed_form_value(s, 2, sc.cfg), to_money(p_v, sc.requirements[2]));
}

TEST(ClosedFormValue, EqualsRolloutOnBaseline) {
  const auto sc = baseline();
  for (int h : {1, 20, 23, 24}) {
    const GameState s{h, sc.requirements, sc.curve};
    const auto v = policy_value(s, uniform_profile(3, mpne_policy()), sc.cfg);
    for (BuyerId b = 0; b < 3; ++b) EXPECT_EQ(closed_form_value(s, b, sc.cfg), v[b]) << "h=" << h << " b=" << b;
  }
}

TEST(CheckMcpMonotone, VacuousAndNegativeControl) {
  Trajectory t;
  EXPECT_TRUE(check_mcp_monotone(t).ok);
  Step a, b, c;
  a.state.round = 1;
  a.outcome.mcp = ClearingPrice::parse("3");
  t.steps.push_back(a);
  EXPECT_TRUE(check_mcp_monotone(t).ok);
  b.state.round = 2;  // no trade
  c.state.round = 3;
  c.outcome.mcp = ClearingPrice::parse("2.5");
  t.steps.push_back(b);
  t.steps.push_back(c);
  const auto r = check_mcp_monotone(t);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.violation_round, 3);
}

TEST(CheckMcpMonotone, BaselineEquilibriumPath) {
  const auto sc = baseline();
  EXPECT_TRUE(check_mcp_monotone(rollout(sc.initial_state(), uniform_profile(3, mpne_policy()), sc.cfg)).ok);
}

TEST(BidGrid, ContainsAnchorsAndEveryTableCell) {
  const auto sc = baseline();
  const GameState s{23, sc.requirements, sc.curve};
  const auto idx = compute_indices(s, sc.cfg);
  for (BuyerId b = 0; b < 3; ++b) {
    const auto g = full_grid(s, b, sc.cfg);
    const Bid star = mpne_bid(s, b, sc.cfg);
    EXPECT_TRUE(g.contains(star));
    bool lower_less = false, lower_equal = false, equal_less = false, higher_equal = false;
    for (auto p : g.prices) {
      for (auto q : g.quantities) {
        lower_less |= p < star.price && q < star.quantity;
        lower_equal |= p < star.price && q == star.quantity;
        equal_less |= p == star.price && q < star.quantity;
        higher_equal |= p > star.price && q == star.quantity;
      }
    }
    EXPECT_TRUE(lower_less && lower_equal && equal_less);
    // higher-priced cells exist unless the prescribed price is already p_max
    EXPECT_EQ(higher_equal, star.price < sc.cfg.p_max);
    EXPECT_NE(std::find(g.prices.begin(), g.prices.end(), s.curve.at_rank(static_cast<std::size_t>(idx->z)).price),
              g.prices.end());
  }
}

TEST(BestResponseSearch, IdentityPointHasZeroMargin) {
  const auto sc = baseline();
  const GameState s{22, sc.requirements, sc.curve};
  const auto res = best_response_search(s, 1, sc.cfg);
  const auto path = rollout(s, uniform_profile(3, mpne_policy()), sc.cfg);
  std::size_t identities = 0;
  for (const auto& r : res.reports) {
    const auto& step_state = path.steps[static_cast<std::size_t>(r.round - 22)].state;
    if (r.deviation == mpne_bid(step_state, 1, sc.cfg)) {
      ++identities;
      EXPECT_EQ(r.margin, Money{});
    }
  }
  EXPECT_EQ(identities, 3u);
}

TEST(BestResponseSearch, UpwardDeviationAtRoundOneCostsMore) {
  const auto sc = baseline();
  const GameState s{1, sc.requirements, sc.curve};
  const Bid star = mpne_bid(s, 0, sc.cfg);
  for (const auto& r : best_response_search(s, 0, sc.cfg).reports) {
    if (r.round == 1 && r.deviation.price > star.price && r.deviation.quantity == star.quantity) {
      EXPECT_GT(r.margin, Money{}) << r.deviation.price;
    }
  }
}

TEST(BestResponseSearch, LastRoundUnderbidBelowPzCostsMore) {
  const auto sc = baseline();
  const GameState s{24, sc.requirements, sc.curve};
  const auto idx = compute_indices(s, sc.cfg);
  ASSERT_EQ(idx->psi, 2u);
  const Price p_z = s.curve.at_rank(static_cast<std::size_t>(idx->z)).price;
  const Price p_v = s.curve.at_rank(idx->v[2]).price;
  std::size_t checked = 0;
  for (const auto& r : best_response_search(s, 2, sc.cfg).reports) {
    if (r.deviation.price > p_v && r.deviation.price < p_z && r.deviation.quantity == s.requirements[2]) {
      EXPECT_GT(r.margin, Money{});
      EXPECT_GT(r.dev_residual, Quantity{});
      ++checked;
    }
  }
  EXPECT_GT(checked, 0u);
}

TEST(BestResponseSearch, RejectsGridWithoutPrescribedBid) {
  const auto sc = baseline();
  GridBuilder bad = [](const GameState&, BuyerId, const GameConfig&) {
    return BidGrid{{Price{}}, {Quantity{}}};
  };
  EXPECT_THROW(best_response_search(sc.initial_state(), 0, sc.cfg, bad), RejectedInput);
}

TEST(ExhaustiveSearch, EnforcesLimitsAndIncludesEquilibriumPath) {
  const auto sc = baseline();
  EXPECT_THROW(exhaustive_search({1, sc.requirements, sc.curve}, 0, sc.cfg), std::domain_error);
  const GameState s{23, sc.requirements, sc.curve};
  const auto res = exhaustive_search(s, 2, sc.cfg);
  const auto g = compact_grid(s, 2, sc.cfg);
  EXPECT_LE(g.size(), kExhaustiveMaxGrid);
  EXPECT_GE(res.reports.size(), g.size());
  bool saw_zero = false;
  for (const auto& r : res.reports) saw_zero |= r.margin == Money{};
  EXPECT_TRUE(saw_zero);
}

TEST(DeviationsCsv, Schema) {
  std::ostringstream os;
  DeviationReport r;
  r.buyer = 1;
  r.round = 3;
  r.deviation = {1, P("2.5"), Q("4")};
  r.v_dev = Money::parse("12");
  r.v_mpne = Money::parse("10");
  r.margin = r.v_dev - r.v_mpne;
  write_deviations_csv(os, "s", {r});
  EXPECT_EQ(os.str(),
            "scenario,buyer,round,dev_price,dev_qty,v_dev,v_mpne,margin\n"
            "s,1,3,2.50,4.00,12.000000,10.000000,2.000000\n");
}
