#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pda/clearing.hpp"
#include "pda/scenario.hpp"

using namespace pda;

namespace {

Quantity Q(const char* s) { return Quantity::parse(s); }
Price P(const char* s) { return Price::parse(s); }

SupplyCurve three_step_curve() {
  return SupplyCurve({{P("1"), Q("10")}, {P("2"), Q("10")}, {P("3"), Q("10")}});
}

}  // namespace

TEST(AggregateSupply, SumsAskQuantities) {
  EXPECT_EQ(aggregate_supply(three_step_curve()), Q("30"));
  EXPECT_EQ(aggregate_supply(SupplyCurve{}), Quantity{});
}

TEST(AggregateSupply, BaselineCurveTotal) {
  const auto sc = load_scenario(std::string(PDA_SCENARIO_DIR) + "/baseline.yaml");
  EXPECT_EQ(sc.curve.size(), 31u);
  EXPECT_EQ(aggregate_supply(sc.curve), Q("1502.38"));
}

TEST(AggregateDemand, SumsBidQuantities) {
  const std::vector<Bid> bids{{0, P("100"), Q("232.18")}, {1, P("100"), Q("164.6")}, {2, P("50"), Q("90.7")}};
  EXPECT_EQ(aggregate_demand(bids), Q("487.48"));
  EXPECT_EQ(aggregate_demand(std::vector<Bid>{}), Quantity{});
  EXPECT_EQ(aggregate_demand(std::vector<Bid>{{0, P("1"), Q("5")}}), Q("5"));
}

TEST(AggregateDemand, RejectsDuplicateBuyers) {
  const std::vector<Bid> bids{{0, P("1"), Q("1")}, {0, P("2"), Q("1")}};
  EXPECT_THROW(aggregate_demand(bids), RejectedInput);
}

TEST(SupplyCurve, RejectsMalformedAsks) {
  EXPECT_THROW(SupplyCurve({{P("2"), Q("1")}, {P("1"), Q("1")}}), RejectedInput);
  EXPECT_THROW(SupplyCurve({{P("1"), Q("0")}}), RejectedInput);
  EXPECT_THROW(SupplyCurve({{P("-1"), Q("1")}}), RejectedInput);
}

TEST(ClearAuction, TwoBidsAcrossThreeAsks) {
  // A(5) takes ask 1 and half of ask 2; B(2.5) takes the other half of ask 2
  // and cannot reach ask 3 at 3.
  const std::vector<Bid> bids{{0, P("5"), Q("15")}, {1, P("2.5"), Q("5")}};
  const auto out = clear_auction(three_step_curve(), bids);
  ASSERT_TRUE(out.traded());
  EXPECT_EQ(*out.mcp, ClearingPrice::parse("2.25"));
  EXPECT_EQ(out.total_cleared, Q("20"));
  EXPECT_EQ(out.fill_for(0), Q("15"));
  EXPECT_EQ(out.fill_for(1), Q("5"));
  EXPECT_EQ(*out.last_cleared_ask_price, P("2"));
  EXPECT_EQ(*out.last_cleared_bid_price, P("2.5"));
  EXPECT_EQ(rollover_supply(out), SupplyCurve({{P("3"), Q("10")}}));
}

TEST(ClearAuction, NoCrossingMeansNoTrade) {
  const SupplyCurve curve({{P("10"), Q("100")}});
  const auto out = clear_auction(curve, std::vector<Bid>{{0, P("5"), Q("50")}});
  EXPECT_FALSE(out.traded());
  EXPECT_EQ(out.total_cleared, Quantity{});
  EXPECT_TRUE(out.fills.empty());
  EXPECT_EQ(rollover_supply(out), curve);
}

TEST(ClearAuction, SingleSegmentAverageRule) {
  const auto out = clear_auction(SupplyCurve({{P("10"), Q("100")}}), std::vector<Bid>{{0, P("20"), Q("50")}}, Ratio::parse("0.5"));
  EXPECT_EQ(*out.mcp, ClearingPrice::parse("15"));
  EXPECT_EQ(out.total_cleared, Q("50"));
  EXPECT_EQ(out.fill_for(0), Q("50"));
  EXPECT_EQ(out.rollover, SupplyCurve({{P("10"), Q("50")}}));
}

TEST(ClearAuction, GeneralFractionWeightsLastAsk) {
  const auto curve = SupplyCurve({{P("10"), Q("100")}});
  const std::vector<Bid> bids{{0, P("20"), Q("50")}};
  EXPECT_EQ(*clear_auction(curve, bids, Ratio::parse("1")).mcp, ClearingPrice::parse("10"));
  EXPECT_EQ(*clear_auction(curve, bids, Ratio::parse("0")).mcp, ClearingPrice::parse("20"));
  EXPECT_EQ(*clear_auction(curve, bids, Ratio::parse("0.25")).mcp, ClearingPrice::parse("17.5"));
  EXPECT_THROW(clear_auction(curve, bids, Ratio::parse("1.5")), RejectedInput);
}

TEST(ClearAuction, ExhaustedSupplyLeavesEmptyCurve) {
  const auto out = clear_auction(three_step_curve(), std::vector<Bid>{{0, P("9"), Q("40")}});
  EXPECT_EQ(out.total_cleared, Q("30"));
  EXPECT_TRUE(out.rollover.empty());
}

TEST(ClearAuction, ZeroQuantityBidsAreIgnored) {
  const std::vector<Bid> bids{{0, P("9"), Q("0")}, {1, P("0.5"), Q("3")}};
  const auto out = clear_auction(three_step_curve(), bids);
  EXPECT_FALSE(out.traded());
  EXPECT_TRUE(out.fills.empty());
}

TEST(ClearAuction, EqualPricedBidsLargerQuantityFirst) {
  const std::vector<Bid> bids{{0, P("1"), Q("4")}, {1, P("1"), Q("8")}, {2, P("1"), Q("8")}};
  const auto out = clear_auction(SupplyCurve({{P("1"), Q("10")}}), bids);
  EXPECT_EQ(out.fill_for(1), Q("8"));
  EXPECT_EQ(out.fill_for(2), Q("2"));
  EXPECT_EQ(out.fill_for(0), Quantity{});
}

TEST(ClearAuction, RejectsDuplicateAndNegativeBids) {
  EXPECT_THROW(clear_auction(three_step_curve(), std::vector<Bid>{{0, P("1"), Q("1")}, {0, P("1"), Q("1")}}),
               RejectedInput);
  EXPECT_THROW(clear_auction(three_step_curve(), std::vector<Bid>{{0, P("-1"), Q("1")}}), RejectedInput);
}

TEST(ClearAuction, UniformPriceVolumeIsNotPairwiseMatching) {
  // A high bid can take the cheap ask that a low bid needed; a uniform price
  // cannot serve both, although a pairwise matching could.
  const SupplyCurve curve({{P("1"), Q("10")}, {P("5"), Q("10")}});
  const std::vector<Bid> bids{{0, P("10"), Q("10")}, {1, P("1"), Q("10")}};
  EXPECT_EQ(clear_auction(curve, bids).total_cleared, Q("10"));
  EXPECT_EQ(oracle::max_uniform_price_volume(curve, bids), Q("10"));
  EXPECT_EQ(oracle::max_pairwise_matching(curve, bids), Q("20").raw());
}

TEST(ClearAuctionProperty, MatchesBruteForceAndConserves) {
  std::mt19937_64 rng(20240611);
  for (int trial = 0; trial < 3000; ++trial) {
    auto [curve, bids] = oracle::random_book(rng, 6, 4, 20);
    const auto out = clear_auction(curve, bids);
    ASSERT_EQ(out.total_cleared, oracle::max_uniform_price_volume(curve, bids)) << "trial " << trial;

    Quantity fills;
    for (const auto& [b, q] : out.fills) {
      fills += q;
      const auto it = std::find_if(bids.begin(), bids.end(), [&](const Bid& x) { return x.buyer == b; });
      ASSERT_LE(q, it->quantity);
    }
    ASSERT_EQ(fills, out.total_cleared);
    ASSERT_EQ(aggregate_supply(curve) - aggregate_supply(out.rollover), out.total_cleared);
    ASSERT_LE(out.total_cleared, std::min(aggregate_supply(curve), aggregate_demand(bids)));
    if (out.traded()) {
      const auto p_d = out.last_cleared_ask_price->widen<ClearingPrice::kScale>();
      const auto p_l = out.last_cleared_bid_price->widen<ClearingPrice::kScale>();
      ASSERT_LE(p_d, p_l);
      ASSERT_LE(p_d, *out.mcp);
      ASSERT_LE(*out.mcp, p_l);
      for (const auto& a : out.rollover.asks()) ASSERT_GE(a.price, *out.last_cleared_ask_price);
    } else {
      ASSERT_EQ(out.total_cleared, Quantity{});
      ASSERT_TRUE(out.fills.empty());
      ASSERT_EQ(out.rollover, curve);
    }
  }
}

TEST(ClearAuctionProperty, RaisingABidNeverShrinksItsFill) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 3000; ++trial) {
    auto [curve, bids] = oracle::random_book(rng, 6, 4, 20);
    if (bids.empty()) continue;
    const std::size_t i = rng() % bids.size();
    const auto before = clear_auction(curve, bids).fill_for(bids[i].buyer);
    bids[i].price += Price::from_int(1 + static_cast<int>(rng() % 5));
    const auto after = clear_auction(curve, bids).fill_for(bids[i].buyer);
    ASSERT_GE(after, before) << "trial " << trial;
  }
}
