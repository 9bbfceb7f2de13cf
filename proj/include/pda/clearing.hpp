#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pda/decimal.hpp"

namespace pda {

using BuyerId = std::size_t;

/// Thrown when callers hand the engine malformed bids, asks or states.
class RejectedInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Ask {
  Price price;
  Quantity quantity;

  friend bool operator==(const Ask&, const Ask&) = default;
};

struct Bid {
  BuyerId buyer = 0;
  Price price;
  Quantity quantity;

  friend bool operator==(const Bid&, const Bid&) = default;
};

/// Composite supply curve: asks in nondecreasing price order, each with a
/// strictly positive quantity.
class SupplyCurve {
 public:
  SupplyCurve() = default;
  explicit SupplyCurve(std::vector<Ask> asks) : asks_(std::move(asks)) {
    for (std::size_t m = 0; m < asks_.size(); ++m) {
      if (asks_[m].price < Price{}) {
        throw RejectedInput("ask " + std::to_string(m + 1) + " has a negative price");
      }
      if (asks_[m].quantity <= Quantity{}) {
        throw RejectedInput("ask " + std::to_string(m + 1) + " must have a positive quantity");
      }
      if (m > 0 && asks_[m].price < asks_[m - 1].price) {
        throw RejectedInput("ask prices must be nondecreasing (ask " + std::to_string(m + 1) + ")");
      }
    }
  }

  const std::vector<Ask>& asks() const { return asks_; }
  std::size_t size() const { return asks_.size(); }
  bool empty() const { return asks_.empty(); }

  /// 1-based access, matching the ask ranks used by the equilibrium indices.
  const Ask& at_rank(std::size_t rank) const {
    if (rank == 0 || rank > asks_.size()) {
      throw std::out_of_range("ask rank " + std::to_string(rank) + " outside curve of size " +
                              std::to_string(asks_.size()));
    }
    return asks_[rank - 1];
  }

  /// Quantity offered by the first `rank` asks.
  Quantity prefix_quantity(std::size_t rank) const {
    Quantity sum;
    for (std::size_t m = 0; m < rank && m < asks_.size(); ++m) sum += asks_[m].quantity;
    return sum;
  }

  std::optional<Price> max_price() const {
    if (asks_.empty()) return std::nullopt;
    return asks_.back().price;
  }

  friend bool operator==(const SupplyCurve&, const SupplyCurve&) = default;

 private:
  std::vector<Ask> asks_;
};

inline Quantity aggregate_supply(const SupplyCurve& curve) { return curve.prefix_quantity(curve.size()); }

inline void check_one_bid_per_buyer(std::span<const Bid> bids) {
  std::set<BuyerId> seen;
  for (const auto& b : bids) {
    if (!seen.insert(b.buyer).second) {
      throw RejectedInput("buyer " + std::to_string(b.buyer) + " placed more than one bid");
    }
  }
}

inline Quantity aggregate_demand(std::span<const Bid> bids) {
  check_one_bid_per_buyer(bids);
  Quantity sum;
  for (const auto& b : bids) sum += b.quantity;
  return sum;
}

struct ClearingOutcome {
  /// Absent when no bid crosses an ask.
  std::optional<ClearingPrice> mcp;
  Quantity total_cleared;
  /// Buyers with a strictly positive fill.
  std::map<BuyerId, Quantity> fills;
  std::optional<Price> last_cleared_ask_price;
  std::optional<Price> last_cleared_bid_price;
  SupplyCurve rollover;

  bool traded() const { return mcp.has_value(); }

  Quantity fill_for(BuyerId buyer) const {
    auto it = fills.find(buyer);
    return it == fills.end() ? Quantity{} : it->second;
  }
};

/// Bid priority: higher price, then larger quantity, then smaller buyer id.
inline bool bid_priority(const Bid& a, const Bid& b) {
  if (a.price != b.price) return a.price > b.price;
  if (a.quantity != b.quantity) return a.quantity > b.quantity;
  return a.buyer < b.buyer;
}

inline const Ratio kAverageClearingFraction = Ratio::parse("0.5");

/// Uniform-price k-double auction. Bids are walked in priority order against
/// asks in curve order while the bid price covers the ask price; the MCP is
/// k * p_d + (1 - k) * p_l over the last cleared ask and bid.
inline ClearingOutcome clear_auction(const SupplyCurve& curve, std::span<const Bid> bids,
                                     Ratio k = kAverageClearingFraction) {
  if (k < Ratio{} || k > Ratio::from_int(1)) {
    throw RejectedInput("clearing fraction k must lie in [0, 1], got " + k.str());
  }
  check_one_bid_per_buyer(bids);

  std::vector<Bid> book;
  book.reserve(bids.size());
  for (const auto& b : bids) {
    if (b.price < Price{}) throw RejectedInput("bid of buyer " + std::to_string(b.buyer) + " has a negative price");
    if (b.quantity < Quantity{}) {
      throw RejectedInput("bid of buyer " + std::to_string(b.buyer) + " has a negative quantity");
    }
    if (b.quantity > Quantity{}) book.push_back(b);
  }
  std::sort(book.begin(), book.end(), bid_priority);

  const auto& asks = curve.asks();
  ClearingOutcome out;
  std::size_t i = 0;
  std::size_t j = 0;
  Quantity bid_left = book.empty() ? Quantity{} : book[0].quantity;
  Quantity ask_left = asks.empty() ? Quantity{} : asks[0].quantity;
  std::optional<std::size_t> last_bid;
  std::optional<std::size_t> last_ask;

  while (i < book.size() && j < asks.size() && book[i].price >= asks[j].price) {
    const Quantity x = std::min(bid_left, ask_left);
    out.fills[book[i].buyer] += x;
    out.total_cleared += x;
    last_bid = i;
    last_ask = j;
    bid_left -= x;
    ask_left -= x;
    if (bid_left.is_zero() && ++i < book.size()) bid_left = book[i].quantity;
    if (ask_left.is_zero() && ++j < asks.size()) ask_left = asks[j].quantity;
  }

  if (!last_bid) {
    out.fills.clear();
    out.rollover = curve;
    return out;
  }

  const Price p_d = asks[*last_ask].price;
  const Price p_l = book[*last_bid].price;
  out.last_cleared_ask_price = p_d;
  out.last_cleared_bid_price = p_l;
  out.mcp = k * p_d + (Ratio::from_int(1) - k) * p_l;

  std::vector<Ask> rest;
  if (j < asks.size()) {
    rest.push_back({asks[j].price, ask_left});
    rest.insert(rest.end(), asks.begin() + static_cast<std::ptrdiff_t>(j) + 1, asks.end());
  }
  out.rollover = SupplyCurve(std::move(rest));
  return out;
}

inline SupplyCurve rollover_supply(const ClearingOutcome& outcome) { return outcome.rollover; }

}  // namespace pda
