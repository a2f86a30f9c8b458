#pragma once

#include <cmath>
#include <limits>
#include <numbers>

namespace odefit {

/// Forward-mode dual number: a value and one directional derivative.
///
/// The value component is computed with exactly the same floating-point
/// operations as the plain `double` path, so `Dual::value` is bit-identical
/// to a scalar evaluation of the same expression.
struct Dual {
  double value = 0.0;
  double derivative = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double v, double d = 0.0) : value(v), derivative(d) {}
};

inline Dual operator+(Dual a, Dual b) { return {a.value + b.value, a.derivative + b.derivative}; }
inline Dual operator-(Dual a, Dual b) { return {a.value - b.value, a.derivative - b.derivative}; }
inline Dual operator-(Dual a) { return {-a.value, -a.derivative}; }
inline Dual operator*(Dual a, Dual b) {
  return {a.value * b.value, a.derivative * b.value + a.value * b.derivative};
}
inline Dual operator/(Dual a, Dual b) {
  const double v = a.value / b.value;
  return {v, (a.derivative - v * b.derivative) / b.value};
}

// Elementary functions, overloaded for double and Dual so the expression
// evaluator can be written once as a template.
namespace math {

inline double sign(double x) {
  if (std::isnan(x)) return x;
  return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
}

inline double abs(double x) { return std::fabs(x); }
inline double exp(double x) { return std::exp(x); }
inline double ln(double x) { return std::log(x); }
inline double log10(double x) { return std::log10(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double tanh(double x) { return std::tanh(x); }
inline double pow(double a, double b) { return std::pow(a, b); }

// d|x|/dx = sign(x), with sign(0) = 0.
inline Dual abs(Dual x) { return {std::fabs(x.value), sign(x.value) * x.derivative}; }
// sign is piecewise constant: derivative zero everywhere.
inline Dual sign(Dual x) { return {sign(x.value), 0.0}; }
inline Dual exp(Dual x) {
  const double v = std::exp(x.value);
  return {v, v * x.derivative};
}
inline Dual ln(Dual x) { return {std::log(x.value), x.derivative / x.value}; }
inline Dual log10(Dual x) {
  return {std::log10(x.value), x.derivative / (x.value * std::numbers::ln10)};
}
inline Dual sqrt(Dual x) {
  const double v = std::sqrt(x.value);
  return {v, x.derivative / (2.0 * v)};
}
inline Dual sin(Dual x) { return {std::sin(x.value), std::cos(x.value) * x.derivative}; }
inline Dual cos(Dual x) { return {std::cos(x.value), -std::sin(x.value) * x.derivative}; }
inline Dual tanh(Dual x) {
  const double v = std::tanh(x.value);
  return {v, (1.0 - v * v) * x.derivative};
}

// Each partial is only formed when its seed is non-zero, so a constant
// exponent never touches ln(base) (negative bases stay well defined for
// integer exponents) and 0 * inf never leaks a NaN into a zero derivative.
inline Dual pow(Dual a, Dual b) {
  const double v = std::pow(a.value, b.value);
  double d = 0.0;
  if (a.derivative != 0.0) d += b.value * std::pow(a.value, b.value - 1.0) * a.derivative;
  if (b.derivative != 0.0) d += v * std::log(a.value) * b.derivative;
  return {v, d};
}

}  // namespace math
}  // namespace odefit
