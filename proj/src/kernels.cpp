#include "optrec/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace optrec {

double Kernel::eval(double x, double y) const {
  switch (family) {
    case KernelFamily::min_plus_one:
      return 1.0 + std::min(x, y);
    case KernelFamily::polynomial:
      return std::pow(1.0 + x * y, param);
    case KernelFamily::gaussian: {
      const double d = (x - y) / param;
      return std::exp(-0.5 * d * d);
    }
  }
  throw std::logic_error("unknown kernel family");
}

bool Kernel::contains_constants() const {
  // min_plus_one: K(., 0) is the constant 1. polynomial: K(., 0) likewise.
  // The Gaussian space contains no nonzero constant function.
  return family != KernelFamily::gaussian;
}

std::array<double, 2> Kernel::natural_domain() const {
  switch (family) {
    case KernelFamily::min_plus_one:
      return {0.0, 1.0};
    case KernelFamily::polynomial:
      return {-1.0, 1.0};
    case KernelFamily::gaussian:
      return {-1.0, 1.0};
  }
  throw std::logic_error("unknown kernel family");
}

std::string Kernel::name() const {
  switch (family) {
    case KernelFamily::min_plus_one:
      return "min_plus_one";
    case KernelFamily::polynomial:
      return "polynomial";
    case KernelFamily::gaussian:
      return "gaussian";
  }
  throw std::logic_error("unknown kernel family");
}

Kernel Kernel::min_plus_one() { return Kernel{KernelFamily::min_plus_one, 0.0}; }

Kernel Kernel::polynomial(int k) {
  if (k < 1) throw std::invalid_argument("polynomial kernel degree must be >= 1");
  return Kernel{KernelFamily::polynomial, static_cast<double>(k)};
}

Kernel Kernel::gaussian(double sigma) {
  if (!(sigma > 0)) throw std::invalid_argument("gaussian kernel width must be positive");
  return Kernel{KernelFamily::gaussian, sigma};
}

}  // namespace optrec
