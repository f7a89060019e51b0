#include "onnx2smt/rational.hpp"

#include <bit>
#include <cctype>
#include <cstdint>

#include "onnx2smt/error.hpp"

namespace onnx2smt {

namespace {

// value = (-1)^sign * mantissa * 2^exponent
Rational scaled_integer(bool negative, std::uint64_t mantissa, long exponent) {
  mpz_class num;
  mpz_import(num.get_mpz_t(), 1, 1, sizeof(mantissa), 0, 0, &mantissa);
  Rational q;
  if (exponent >= 0) {
    mpz_mul_2exp(num.get_mpz_t(), num.get_mpz_t(), static_cast<mp_bitcnt_t>(exponent));
    q = Rational(num);
  } else {
    mpz_class den;
    mpz_setbit(den.get_mpz_t(), static_cast<mp_bitcnt_t>(-exponent));
    q = Rational(num, den);
    q.canonicalize();
  }
  if (negative) q = -q;
  return q;
}

}  // namespace

Rational float32_to_rational(float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  const bool negative = (bits >> 31) != 0;
  const auto biased = static_cast<long>((bits >> 23) & 0xFFu);
  std::uint64_t mantissa = bits & 0x7FFFFFu;
  if (biased == 0xFF) {
    throw Error(ErrorKind::NonFiniteWeight, "NaN or infinity in float32 tensor data");
  }
  if (biased == 0) return scaled_integer(negative, mantissa, -149);
  mantissa |= 0x800000u;
  return scaled_integer(negative, mantissa, biased - 150);
}

Rational float64_to_rational(double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  const bool negative = (bits >> 63) != 0;
  const auto biased = static_cast<long>((bits >> 52) & 0x7FFu);
  std::uint64_t mantissa = bits & 0xFFFFFFFFFFFFFull;
  if (biased == 0x7FF) {
    throw Error(ErrorKind::NonFiniteWeight, "NaN or infinity in float64 tensor data");
  }
  if (biased == 0) return scaled_integer(negative, mantissa, -1074);
  mantissa |= 1ull << 52;
  return scaled_integer(negative, mantissa, biased - 1075);
}

bool is_dyadic(const Rational& q) {
  const mpz_class& den = q.get_den();
  return mpz_popcount(den.get_mpz_t()) == 1;
}

Rational parse_rational(const std::string& text) {
  auto fail = [&] { return Error(ErrorKind::InvalidSpec, "not a rational number: '" + text + "'"); };
  std::string s;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  }
  if (s.empty()) throw fail();

  if (auto slash = s.find('/'); slash != std::string::npos) {
    Rational num = parse_rational(s.substr(0, slash));
    Rational den = parse_rational(s.substr(slash + 1));
    if (den == 0) throw fail();
    Rational q = num / den;
    q.canonicalize();
    return q;
  }

  bool negative = false;
  std::size_t pos = 0;
  if (s[pos] == '+' || s[pos] == '-') {
    negative = s[pos] == '-';
    ++pos;
  }
  std::string digits;
  long exponent = 0;
  bool seen_digit = false;
  bool seen_point = false;
  for (; pos < s.size(); ++pos) {
    const char c = s[pos];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
      seen_digit = true;
      if (seen_point) --exponent;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else if (c == 'e' || c == 'E') {
      break;
    } else {
      throw fail();
    }
  }
  if (!seen_digit) throw fail();
  if (pos < s.size()) {
    const std::string tail = s.substr(pos + 1);
    if (tail.empty()) throw fail();
    std::size_t used = 0;
    long e = 0;
    try {
      e = std::stol(tail, &used);
    } catch (const std::exception&) {
      throw fail();
    }
    if (used != tail.size()) throw fail();
    exponent += e;
  }

  mpz_class num(digits, 10);
  mpz_class scale;
  mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(exponent < 0 ? -exponent : exponent));
  Rational q = exponent < 0 ? Rational(num, scale) : Rational(num * scale);
  q.canonicalize();
  return negative ? Rational(-q) : q;
}

std::string format_literal(const Rational& q, LiteralStyle style) {
  const bool negative = sgn(q) < 0;
  const mpz_class num = abs(q.get_num());
  const mpz_class& den = q.get_den();
  const std::string suffix = style == LiteralStyle::StrictDecimal ? ".0" : "";
  const std::string n = num.get_str() + suffix;

  if (style == LiteralStyle::Fig5Compat) {
    const std::string signed_num = (negative ? "-" : "") + num.get_str();
    if (den == 1) return negative ? "(- " + n + ")" : n;
    return "(/ " + signed_num + " " + den.get_str() + ")";
  }

  std::string magnitude = den == 1 ? n : "(/ " + n + " " + den.get_str() + suffix + ")";
  if (negative) return "(- " + magnitude + ")";
  return magnitude;
}

}  // namespace onnx2smt
