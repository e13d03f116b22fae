#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include <boost/rational.hpp>
#include <nlohmann/json.hpp>

#include "eps/errors.hpp"

namespace eps {

// All scores are exact. Deltas have denominator 100, so tallies and their
// quotients stay well inside int64 for any desk-scale survey.
using Rational = boost::rational<std::int64_t>;

namespace detail {

inline bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

inline std::int64_t to_int64(std::string_view digits) {
  std::int64_t v = 0;
  for (char c : digits) {
    if (v > (INT64_MAX - (c - '0')) / 10) throw SchemaError("numeric literal too large");
    v = v * 10 + (c - '0');
  }
  return v;
}

// Splits "[+-]int[.frac]" into its parts; returns false on any other shape.
inline bool split_decimal(std::string_view text, bool& negative, std::string_view& whole,
                          std::string_view& frac) {
  negative = false;
  if (!text.empty() && (text.front() == '+' || text.front() == '-')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  auto dot = text.find('.');
  whole = text.substr(0, dot);
  frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (dot != std::string_view::npos && !all_digits(frac)) return false;
  if (!all_digits(whole) && !(whole.empty() && !frac.empty())) return false;  // ".5" is fine
  return true;
}

inline std::int64_t pow10(std::size_t n) {
  std::int64_t p = 1;
  for (std::size_t i = 0; i < n; ++i) p *= 10;
  return p;
}

}  // namespace detail

// Parses a decimal ("0.25", "-1", "+0.5") or a fraction ("1/3").
inline Rational parse_rational(std::string_view text) {
  auto slash = text.find('/');
  if (slash != std::string_view::npos) {
    auto num = text.substr(0, slash);
    auto den = text.substr(slash + 1);
    bool neg = !num.empty() && num.front() == '-';
    if (!num.empty() && (num.front() == '-' || num.front() == '+')) num.remove_prefix(1);
    if (!detail::all_digits(num) || !detail::all_digits(den))
      throw SchemaError("malformed fraction '" + std::string(text) + "'");
    auto d = detail::to_int64(den);
    if (d == 0) throw SchemaError("zero denominator in '" + std::string(text) + "'");
    auto n = detail::to_int64(num);
    return Rational(neg ? -n : n, d);
  }
  bool negative = false;
  std::string_view whole, frac;
  if (!detail::split_decimal(text, negative, whole, frac) || frac.size() > 18)
    throw SchemaError("malformed decimal '" + std::string(text) + "'");
  auto scale = detail::pow10(frac.size());
  Rational r(detail::to_int64(whole));
  if (!frac.empty()) r += Rational(detail::to_int64(frac), scale);
  return negative ? -r : r;
}

// Parses an impact delta: at most two decimal digits, within [-1, +1].
inline Rational parse_delta(std::string_view text) {
  bool negative = false;
  std::string_view whole, frac;
  if (!detail::split_decimal(text, negative, whole, frac))
    throw SchemaError("malformed delta '" + std::string(text) + "'");
  if (frac.size() > 2)
    throw SchemaError("delta '" + std::string(text) +
                      "' has more than two decimal digits");
  if (whole.size() > 6) throw DeltaOutOfRange("delta '" + std::string(text) + "' outside [-1, 1]");
  Rational r(detail::to_int64(whole) * 100 +
                 (frac.empty() ? 0 : detail::to_int64(frac) * (frac.size() == 1 ? 10 : 1)),
             100);
  if (negative) r = -r;
  if (r > 1 || r < -1)
    throw DeltaOutOfRange("delta '" + std::string(text) + "' outside [-1, 1]");
  return r;
}

// Exact decimal rendering. Terminating fractions render plainly ("0.5",
// "-0.2", "1"); repeating ones put the period in parentheses ("0.(3)").
inline std::string to_decimal_string(const Rational& r) {
  std::int64_t num = r.numerator();
  std::int64_t den = r.denominator();
  std::string out;
  if (num < 0) {
    out += '-';
    num = -num;
  }
  out += std::to_string(num / den);
  std::int64_t rem = num % den;
  if (rem == 0) return out;
  out += '.';
  std::string digits;
  std::map<std::int64_t, std::size_t> seen;
  while (rem != 0 && !seen.count(rem)) {
    seen[rem] = digits.size();
    rem *= 10;
    digits += static_cast<char>('0' + rem / den);
    rem %= den;
  }
  if (rem == 0) return out + digits;
  auto start = seen[rem];
  return out + digits.substr(0, start) + "(" + digits.substr(start) + ")";
}

inline nlohmann::json rational_to_json(const Rational& r) {
  return {{"decimal", to_decimal_string(r)},
          {"num", r.numerator()},
          {"den", r.denominator()}};
}

inline Rational rational_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("num") || !j.contains("den") ||
      !j["num"].is_number_integer() || !j["den"].is_number_integer())
    throw SchemaError("expected {num, den} rational object");
  auto den = j["den"].get<std::int64_t>();
  if (den == 0) throw SchemaError("zero denominator");
  return Rational(j["num"].get<std::int64_t>(), den);
}

inline Rational clamp_unit(const Rational& r) {
  if (r < 0) return Rational(0);
  if (r > 1) return Rational(1);
  return r;
}

}  // namespace eps
