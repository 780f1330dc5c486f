#include "optrec/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace optrec {

namespace {

bool finite(double v) { return std::isfinite(v); }

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::string where(int n) {
  std::ostringstream os;
  os << "model set " << n;
  return os.str();
}

}  // namespace

int CosinePoly::degree() const {
  int d = static_cast<int>(coeffs.size()) - 1;
  while (d > 0 && coeffs[static_cast<size_t>(d)] == 0.0) --d;
  return std::max(d, 0);
}

double CosinePoly::eval(double theta) const {
  double v = 0.0;
  for (size_t k = 0; k < coeffs.size(); ++k) v += coeffs[k] * std::cos(static_cast<double>(k) * theta);
  return v;
}

CosinePoly CosinePoly::constant(double value) { return CosinePoly{{value}}; }

Eigen::VectorXd apply_map(const AffineRecoveryMap& map, const ObservationMatrix& y) {
  const int n = map.components();
  if (n == 0) throw std::invalid_argument("apply_map: empty map");
  if (y.rows() != map.coeffs[0].rows() || y.cols() != map.coeffs[0].cols())
    throw std::invalid_argument("apply_map: observation shape does not match map");
  Eigen::VectorXd out(n);
  for (int j = 0; j < n; ++j)
    out[j] = (map.coeffs[static_cast<size_t>(j)].array() * y.array()).sum() + map.offsets[j];
  return out;
}

double empirical_error(const AffineRecoveryMap& map, const std::vector<PointSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("empirical_error: no samples");
  double worst = 0.0;
  for (const auto& s : samples) {
    const Eigen::VectorXd pred = apply_map(map, s.observations);
    if (s.truth.size() != pred.size())
      throw std::invalid_argument("empirical_error: sample truth has wrong length");
    worst = std::max(worst, (pred - s.truth).cwiseAbs().maxCoeff());
  }
  return worst;
}

double certificate_ratio(double lower, double upper) {
  constexpr double kZero = 1e-9;
  if (lower > kZero) return upper / lower;
  if (upper > kZero) return std::numeric_limits<double>::infinity();
  return 1.0;
}

namespace {

// Rank check for a set of basis functions. For kernel combinations the Gram
// matrix decides; for cosine polynomials the coefficient matrix does.
bool basis_independent(const std::vector<BasisFunction>& basis, Setting setting,
                       const std::optional<Kernel>& kernel) {
  const int k = static_cast<int>(basis.size());
  if (k == 0) return true;
  if (setting == Setting::rkhs) {
    if (!kernel) return true;  // reported separately
    Eigen::MatrixXd gram(k, k);
    for (int i = 0; i < k; ++i) {
      const auto& fi = std::get<AnchoredFunction>(basis[static_cast<size_t>(i)]);
      for (int j = 0; j < k; ++j) {
        const auto& fj = std::get<AnchoredFunction>(basis[static_cast<size_t>(j)]);
        double v = 0.0;
        for (size_t a = 0; a < fi.anchors.size(); ++a)
          for (size_t b = 0; b < fj.anchors.size(); ++b)
            v += fi.weights[a] * fj.weights[b] * kernel->eval(fi.anchors[a], fj.anchors[b]);
        gram(i, j) = v;
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    const double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
    return es.eigenvalues().minCoeff() > 1e-10 * std::max(lmax, 1e-300);
  }
  int maxlen = 0;
  for (const auto& b : basis)
    maxlen = std::max(maxlen, static_cast<int>(std::get<CosinePoly>(b).coeffs.size()));
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(maxlen, k);
  for (int j = 0; j < k; ++j) {
    const auto& p = std::get<CosinePoly>(basis[static_cast<size_t>(j)]);
    for (size_t i = 0; i < p.coeffs.size(); ++i) m(static_cast<Eigen::Index>(i), j) = p.coeffs[i];
  }
  return m.colPivHouseholderQr().rank() == k;
}

bool matches_setting(const BasisFunction& f, Setting setting) {
  return setting == Setting::rkhs ? std::holds_alternative<AnchoredFunction>(f)
                                  : std::holds_alternative<CosinePoly>(f);
}

bool function_finite(const BasisFunction& f) {
  if (const auto* a = std::get_if<AnchoredFunction>(&f))
    return all_finite(a->anchors) && all_finite(a->weights) && a->anchors.size() == a->weights.size() &&
           !a->anchors.empty();
  const auto& c = std::get<CosinePoly>(f);
  return all_finite(c.coeffs) && !c.coeffs.empty();
}

}  // namespace

ValidationResult validate_problem(const RecoveryProblem& problem) {
  ValidationResult res;
  auto err = [&res](const std::string& m) { res.errors.push_back(m); };
  auto warn = [&res](const std::string& m) { res.warnings.push_back(m); };

  const int n_comp = problem.num_components;
  if (n_comp < 1) err("num_components must be at least 1");
  if (static_cast<int>(problem.model_sets.size()) != n_comp)
    err("model_sets size must equal num_components");

  const double lo = problem.domain[0], hi = problem.domain[1];
  if (!finite(lo) || !finite(hi) || !(lo < hi)) err("domain must be a nonempty interval");

  if (problem.setting == Setting::cosine) {
    if (std::abs(lo) > 1e-12 || std::abs(hi - std::acos(-1.0)) > 1e-9)
      err("cosine setting requires domain [0, pi]");
    if (problem.kernel) err("cosine setting does not take a kernel");
  } else {
    if (!problem.kernel) err("rkhs setting requires a kernel");
    if (problem.kernel && problem.kernel->family == KernelFamily::min_plus_one && lo < 0)
      err("min_plus_one kernel requires a domain within [0, inf)");
  }

  const auto in_domain = [&](double x) { return x >= lo - 1e-12 && x <= hi + 1e-12; };
  if (problem.points.count() < 1) err("at least one observation point is required");
  if (!finite(problem.points.new_point) || !in_domain(problem.points.new_point))
    err("new point must lie in the domain");
  for (size_t m = 0; m < problem.points.old_points.size(); ++m) {
    const double x = problem.points.old_points[m];
    if (!finite(x) || !in_domain(x)) {
      std::ostringstream os;
      os << "old point " << m << " must lie in the domain";
      err(os.str());
    }
  }
  {
    auto pts = problem.points.old_points;
    std::sort(pts.begin(), pts.end());
    if (std::adjacent_find(pts.begin(), pts.end()) != pts.end()) err("old points must be pairwise distinct");
  }

  for (int n = 0; n < static_cast<int>(problem.model_sets.size()); ++n) {
    const auto& ms = problem.model_sets[static_cast<size_t>(n)];
    if (!finite(ms.epsilon) || ms.epsilon < 0) err(where(n) + ": epsilon must be >= 0");
    if (ms.nonneg && problem.setting == Setting::rkhs)
      err(where(n) + ": nonnegativity cones are only supported in the cosine setting");
    bool funcs_ok = true;
    for (const auto& b : ms.basis) {
      if (!matches_setting(b, problem.setting)) {
        err(where(n) + ": basis function does not match the problem setting");
        funcs_ok = false;
      } else if (!function_finite(b)) {
        err(where(n) + ": basis function is malformed");
        funcs_ok = false;
      }
    }
    if (funcs_ok && !basis_independent(ms.basis, problem.setting, problem.kernel))
      err(where(n) + ": basis functions are not linearly independent");
  }

  const auto& dep = problem.dependence;
  const int n_dep = dep.count();
  if (dep.coefficients.rows() != n_dep || (n_dep > 0 && dep.coefficients.cols() != n_comp))
    err("dependence matrix shape must be L x num_components");
  for (int l = 0; l < std::min<int>(n_dep, static_cast<int>(dep.coefficients.rows())); ++l) {
    if (dep.coefficients.cols() == n_comp && dep.coefficients.row(l).cwiseAbs().maxCoeff() == 0.0) {
      std::ostringstream os;
      os << "dependence relation " << l << " has an all-zero coefficient row";
      err(os.str());
    }
  }
  for (int l = 0; l < n_dep; ++l) {
    const auto& b = dep.rhs[static_cast<size_t>(l)];
    if (!matches_setting(b, problem.setting)) {
      std::ostringstream os;
      os << "dependence right-hand side " << l << " does not match the problem setting";
      err(os.str());
    } else if (!function_finite(b)) {
      std::ostringstream os;
      os << "dependence right-hand side " << l << " is malformed";
      err(os.str());
    }
  }
  if (n_dep > 0 && problem.setting == Setting::rkhs && problem.kernel &&
      !problem.kernel->contains_constants())
    warn("dependence constraints under a kernel without constant functions: "
         "constant right-hand sides are not exactly representable");

  if (problem.setting == Setting::rkhs && problem.kernel) {
    bool warned = false;
    for (int n = 0; n < static_cast<int>(problem.model_sets.size()) && !warned; ++n)
      for (const auto& b : problem.model_sets[static_cast<size_t>(n)].basis)
        if (const auto* a = std::get_if<AnchoredFunction>(&b))
          for (double t : a->anchors)
            if (finite(t) && !in_domain(t) && !warned) {
              warn(where(n) + ": basis anchor outside the domain");
              warned = true;
            }
  }

  return res;
}

}  // namespace optrec
