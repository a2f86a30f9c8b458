#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "odefit/deck.hpp"

namespace odefit {

struct ParamBound {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  ParamScale scale = ParamScale::linear;  // resolved: linear or log10
};

/// Maps external parameter values onto the optimizer's unit box. Linear
/// dimensions are affine; log10 dimensions are affine in log10(value).
/// Zero-width dimensions pin the value to the bound.
class ParamSpace {
 public:
  ParamSpace() = default;

  explicit ParamSpace(std::vector<ParamBound> bounds) : bounds_(std::move(bounds)) {
    for (auto& b : bounds_) {
      if (b.scale == ParamScale::automatic) b.scale = resolved_scale(ParamDecl{b.name, b.lower, b.upper, b.scale});
      if (b.scale == ParamScale::log10 && !(b.lower > 0.0 && b.upper > 0.0))
        throw std::invalid_argument("log10 scale needs positive bounds for '" + b.name + "'");
    }
  }

  static ParamSpace from_deck(const ProblemDeck& deck) {
    std::vector<ParamBound> b;
    for (const auto& p : deck.parameters) b.push_back({p.name, p.lower, p.upper, resolved_scale(p)});
    return ParamSpace(std::move(b));
  }

  std::size_t size() const { return bounds_.size(); }
  const ParamBound& operator[](std::size_t i) const { return bounds_[i]; }
  const std::vector<ParamBound>& bounds() const { return bounds_; }

  double to_external(std::size_t i, double u) const {
    const auto& b = bounds_[i];
    if (b.lower == b.upper) return b.lower;
    if (b.scale == ParamScale::log10) {
      const double a = std::log10(b.lower);
      const double c = std::log10(b.upper);
      return std::pow(10.0, a + u * (c - a));
    }
    return b.lower + u * (b.upper - b.lower);
  }

  double to_internal(std::size_t i, double theta) const {
    const auto& b = bounds_[i];
    if (b.lower == b.upper) return 0.5;
    if (b.scale == ParamScale::log10) {
      const double a = std::log10(b.lower);
      const double c = std::log10(b.upper);
      return (std::log10(theta) - a) / (c - a);
    }
    return (theta - b.lower) / (b.upper - b.lower);
  }

  /// d(theta_i)/d(u_i) at internal point u.
  double slope(std::size_t i, double u) const {
    const auto& b = bounds_[i];
    if (b.lower == b.upper) return 0.0;
    if (b.scale == ParamScale::log10) {
      const double a = std::log10(b.lower);
      const double c = std::log10(b.upper);
      return to_external(i, u) * std::numbers::ln10 * (c - a);
    }
    return b.upper - b.lower;
  }

  std::vector<double> to_external(std::span<const double> u) const {
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = to_external(i, u[i]);
    return out;
  }

  std::vector<double> to_internal(std::span<const double> theta) const {
    std::vector<double> out(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) out[i] = to_internal(i, theta[i]);
    return out;
  }

  bool contains(std::span<const double> theta) const {
    for (std::size_t i = 0; i < theta.size(); ++i)
      if (!(theta[i] >= bounds_[i].lower && theta[i] <= bounds_[i].upper)) return false;
    return true;
  }

 private:
  std::vector<ParamBound> bounds_;
};

}  // namespace odefit
