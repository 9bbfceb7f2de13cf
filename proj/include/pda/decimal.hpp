#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

// Number of fractional digits carried by prices and quantities. Clearing
// prices carry twice this many digits and money three times, so every
// product in the simulator stays exact.
#ifndef PDA_DECIMAL_DIGITS
#define PDA_DECIMAL_DIGITS 2
#endif

namespace pda {

namespace detail {

constexpr std::int64_t pow10(int n) {
  std::int64_t r = 1;
  for (int i = 0; i < n; ++i) r *= 10;
  return r;
}

inline std::int64_t narrow_checked(__int128 v) {
  if (v > std::numeric_limits<std::int64_t>::max() ||
      v < std::numeric_limits<std::int64_t>::min()) {
    throw std::overflow_error("decimal overflow");
  }
  return static_cast<std::int64_t>(v);
}

}  // namespace detail

/// Fixed-point decimal with `Scale` fractional digits stored as an int64 count
/// of ticks. Addition and comparison require equal scales; multiplication adds
/// scales, so it never rounds.
template <int Scale>
class Decimal {
  static_assert(Scale >= 0 && Scale <= 15, "unsupported decimal scale");

 public:
  static constexpr int kScale = Scale;
  static constexpr std::int64_t kOne = detail::pow10(Scale);

  constexpr Decimal() = default;

  static constexpr Decimal from_raw(std::int64_t ticks) {
    Decimal d;
    d.raw_ = ticks;
    return d;
  }

  static Decimal from_int(std::int64_t units) {
    return from_raw(detail::narrow_checked(static_cast<__int128>(units) * kOne));
  }

  /// Parses plain decimal text ("12", "-0.5", "232.18"). Rejects exponents and
  /// more fractional digits than the scale can represent.
  static Decimal parse(std::string_view text) {
    auto fail = [&]() -> Decimal {
      throw std::invalid_argument("not a decimal with at most " +
                                  std::to_string(Scale) +
                                  " fractional digits: '" + std::string(text) + "'");
    };
    std::size_t i = 0;
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t end = text.size();
    while (end > i && text[end - 1] == ' ') --end;
    bool negative = false;
    if (i < end && (text[i] == '+' || text[i] == '-')) {
      negative = text[i] == '-';
      ++i;
    }
    if (i == end) return fail();
    __int128 whole = 0;
    __int128 frac = 0;
    int frac_digits = 0;
    bool seen_dot = false;
    bool seen_digit = false;
    for (; i < end; ++i) {
      const char c = text[i];
      if (c == '.') {
        if (seen_dot) return fail();
        seen_dot = true;
        continue;
      }
      if (c < '0' || c > '9') return fail();
      seen_digit = true;
      if (seen_dot) {
        if (c == '0' && frac_digits >= Scale) continue;  // trailing zeros are fine
        if (frac_digits >= Scale) return fail();
        frac = frac * 10 + (c - '0');
        ++frac_digits;
      } else {
        whole = whole * 10 + (c - '0');
        if (whole > std::numeric_limits<std::int64_t>::max()) return fail();
      }
    }
    if (!seen_digit) return fail();
    for (int k = frac_digits; k < Scale; ++k) frac *= 10;
    __int128 ticks = whole * kOne + frac;
    if (negative) ticks = -ticks;
    return from_raw(detail::narrow_checked(ticks));
  }

  constexpr std::int64_t raw() const { return raw_; }
  double to_double() const { return static_cast<double>(raw_) / static_cast<double>(kOne); }

  std::string str() const {
    const bool negative = raw_ < 0;
    const unsigned __int128 mag =
        negative ? static_cast<unsigned __int128>(-static_cast<__int128>(raw_))
                 : static_cast<unsigned __int128>(raw_);
    const auto whole = static_cast<std::uint64_t>(mag / kOne);
    auto frac = static_cast<std::uint64_t>(mag % kOne);
    std::string out = negative ? "-" : "";
    out += std::to_string(whole);
    if constexpr (Scale > 0) {
      std::string digits(Scale, '0');
      for (int k = Scale - 1; k >= 0; --k) {
        digits[static_cast<std::size_t>(k)] = static_cast<char>('0' + frac % 10);
        frac /= 10;
      }
      out += '.';
      out += digits;
    }
    return out;
  }

  /// Widens to a finer scale; always exact.
  template <int To>
  Decimal<To> widen() const {
    static_assert(To >= Scale, "widen() cannot drop digits");
    return Decimal<To>::from_raw(
        detail::narrow_checked(static_cast<__int128>(raw_) * detail::pow10(To - Scale)));
  }

  /// Narrows to a coarser scale, throwing if digits would be lost.
  template <int To>
  Decimal<To> narrow_exact() const {
    static_assert(To <= Scale);
    constexpr std::int64_t div = detail::pow10(Scale - To);
    if (raw_ % div != 0) throw std::domain_error("inexact decimal narrowing of " + str());
    return Decimal<To>::from_raw(raw_ / div);
  }

  constexpr bool is_zero() const { return raw_ == 0; }

  constexpr auto operator<=>(const Decimal&) const = default;

  Decimal& operator+=(Decimal o) {
    raw_ = detail::narrow_checked(static_cast<__int128>(raw_) + o.raw_);
    return *this;
  }
  Decimal& operator-=(Decimal o) {
    raw_ = detail::narrow_checked(static_cast<__int128>(raw_) - o.raw_);
    return *this;
  }
  friend Decimal operator+(Decimal a, Decimal b) { return a += b; }
  friend Decimal operator-(Decimal a, Decimal b) { return a -= b; }
  friend Decimal operator-(Decimal a) { return from_raw(-a.raw_); }

  friend std::ostream& operator<<(std::ostream& os, Decimal d) { return os << d.str(); }

 private:
  std::int64_t raw_ = 0;
};

template <int A, int B>
Decimal<A + B> operator*(Decimal<A> a, Decimal<B> b) {
  return Decimal<A + B>::from_raw(
      detail::narrow_checked(static_cast<__int128>(a.raw()) * b.raw()));
}

inline constexpr int kBaseScale = PDA_DECIMAL_DIGITS;

using Price = Decimal<kBaseScale>;
using Quantity = Decimal<kBaseScale>;
/// Dimensionless factor such as the clearing fraction k or the penalty ratio beta.
using Ratio = Decimal<kBaseScale>;
/// k * p_d + (1 - k) * p_l, exact.
using ClearingPrice = Decimal<2 * kBaseScale>;
/// ClearingPrice * Quantity, exact.
using Money = Decimal<3 * kBaseScale>;

inline Money to_money(ClearingPrice unit_price, Quantity q) { return unit_price * q; }
inline Money to_money(Price unit_price, Quantity q) {
  return (unit_price * q).template widen<Money::kScale>();
}

/// Largest tick value not above (a + b) / 2.
template <int S>
Decimal<S> midpoint_floor(Decimal<S> a, Decimal<S> b) {
  const __int128 sum = static_cast<__int128>(a.raw()) + b.raw();
  __int128 half = sum / 2;
  if (sum < 0 && sum % 2 != 0) half -= 1;
  return Decimal<S>::from_raw(detail::narrow_checked(half));
}

/// floor(q * num / den) at the same scale; den > 0.
template <int S>
Decimal<S> fraction_floor(Decimal<S> q, std::int64_t num, std::int64_t den) {
  if (den <= 0) throw std::invalid_argument("fraction_floor: denominator must be positive");
  const __int128 v = static_cast<__int128>(q.raw()) * num;
  __int128 r = v / den;
  if (v < 0 && v % den != 0) r -= 1;
  return Decimal<S>::from_raw(detail::narrow_checked(r));
}

}  // namespace pda
