#pragma once

#include <array>
#include <string>

namespace optrec {

enum class KernelFamily { min_plus_one, polynomial, gaussian };

/// Positive-definite kernel on an interval. Built-ins:
///   min_plus_one: K(x, y) = 1 + min(x, y) on [0, 1]
///   polynomial:   K(x, y) = (1 + x y)^k
///   gaussian:     K(x, y) = exp(-(x - y)^2 / (2 sigma^2))
struct Kernel {
  KernelFamily family = KernelFamily::min_plus_one;
  double param = 0.0;  // polynomial: degree k; gaussian: width sigma

  double eval(double x, double y) const;

  /// Whether constant functions lie in the associated space. Dependence
  /// constraints with constant right-hand sides are only exactly
  /// representable when they do.
  bool contains_constants() const;

  std::array<double, 2> natural_domain() const;
  std::string name() const;

  static Kernel min_plus_one();
  static Kernel polynomial(int k);
  static Kernel gaussian(double sigma);
};

}  // namespace optrec
