#pragma once

#include <gmpxx.h>

#include <string>

namespace onnx2smt {

/// Arbitrary-precision rational, always kept in canonical form
/// (positive denominator, lowest terms).
using Rational = mpq_class;

/// Exact value of a finite binary32 float. The result is dyadic: its
/// denominator is a power of two. Throws NonFiniteWeight on NaN/inf.
Rational float32_to_rational(float f);

/// Same for binary64; denominators go up to 2^1074.
Rational float64_to_rational(double d);

bool is_dyadic(const Rational& q);

/// Parses "3", "-3", "1/2", "-7/4", "0.25", "-1.5e-3". Throws InvalidSpec.
Rational parse_rational(const std::string& text);

enum class LiteralStyle {
  /// Strict SMT-LIB 2.6: `5`, `(- 5)`, `(/ 1 2)`, `(- (/ 1 2))`.
  Strict,
  /// Negative numerator inside the division, as printed by the original
  /// ONNX2SMT tool: `(/ -5585077 33554432)`.
  Fig5Compat,
  /// Strict, but with decimal numerals (`5.0`, `(/ 1.0 2.0)`) so that the
  /// literal is Real-sorted in mixed integer/real logics.
  StrictDecimal,
};

std::string format_literal(const Rational& q, LiteralStyle style = LiteralStyle::Strict);

}  // namespace onnx2smt
