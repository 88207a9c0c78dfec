#ifndef MILKIT_SRC_LOG_MATH_HPP
#define MILKIT_SRC_LOG_MATH_HPP

#include <cmath>

namespace milkit::detail {

/// log(1 - exp(-d)) for d >= 0; -inf at d = 0.
inline double log1mexp(double d) {
  return d <= 0.6931471805599453 ? std::log(-std::expm1(-d)) : std::log1p(-std::exp(-d));
}

/// log(1 + exp(x))
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace milkit::detail

#endif  // MILKIT_SRC_LOG_MATH_HPP
