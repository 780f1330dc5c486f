#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "optrec/kernels.hpp"

namespace optrec {

/// Which function-space instantiation a problem lives in.
///
/// rkhs:   functions in a reproducing-kernel Hilbert space over an interval,
///         approximability measured in the RKHS norm.
/// cosine: continuous functions on [0, pi], approximability measured in the
///         sup norm, with optional pointwise nonnegativity.
enum class Setting { rkhs, cosine };

/// Function given as a finite kernel combination  x -> sum_k weights[k] * K(x, anchors[k]).
/// Only meaningful together with the kernel of the surrounding problem.
struct AnchoredFunction {
  std::vector<double> anchors;
  std::vector<double> weights;
};

/// Cosine polynomial  theta -> sum_k coeffs[k] * cos(k * theta)  on [0, pi].
struct CosinePoly {
  std::vector<double> coeffs;

  /// Highest index with a nonzero coefficient (exact zeros are trimmed).
  int degree() const;
  double eval(double theta) const;
  static CosinePoly constant(double value);
};

/// A basis function is either a kernel combination (rkhs setting) or a
/// cosine polynomial (cosine setting). Problems must be homogeneous.
using BasisFunction = std::variant<AnchoredFunction, CosinePoly>;

/// Evaluation sites: the prediction point and the observation points.
/// Old points must be pairwise distinct; the new point may collocate with
/// an old point (the recovery problem is then exactly solvable).
struct PointConfig {
  double new_point = 0.0;
  std::vector<double> old_points;

  int count() const { return static_cast<int>(old_points.size()); }
};

/// Linear dependence constraints  sum_n A(l, n) f_n = b_l  between components.
struct DependenceSpec {
  Eigen::MatrixXd coefficients;     // L x N, may be 0 x N
  std::vector<BasisFunction> rhs;   // length L

  int count() const { return static_cast<int>(rhs.size()); }
};

/// Per-component model set: distance to span(basis) at most epsilon,
/// intersected with the nonnegativity cone when nonneg is set.
/// Nonnegativity is only representable in the cosine setting.
struct ModelSetSpec {
  std::vector<BasisFunction> basis;
  double epsilon = 0.0;
  bool nonneg = false;
};

/// Full problem statement: predict f(new_point) for a multivalued f whose
/// components are observed at the old points and constrained by the model
/// sets and the dependence relations.
struct RecoveryProblem {
  Setting setting = Setting::rkhs;
  int num_components = 0;             // N
  std::array<double, 2> domain{0.0, 1.0};
  PointConfig points;
  std::vector<ModelSetSpec> model_sets;   // length N
  DependenceSpec dependence;
  std::optional<Kernel> kernel;       // rkhs setting only

  int num_observations() const { return points.count(); }
};

/// Observations y(m, n) = f_n(old_points[m]); rows index points, columns components.
using ObservationMatrix = Eigen::MatrixXd;

/// Affine prediction map. Component j of the prediction is
///   sum_{m,n} y(m, n) * coeffs[j](m, n) + offsets[j].
/// values[j] records the certified worst-case error of component j as
/// reported by the construction that produced the map.
struct AffineRecoveryMap {
  std::vector<Eigen::MatrixXd> coeffs;  // N matrices, each M x N
  Eigen::VectorXd offsets;              // length N
  Eigen::VectorXd values;               // length N

  int components() const { return static_cast<int>(coeffs.size()); }
  int observations() const { return coeffs.empty() ? 0 : static_cast<int>(coeffs[0].rows()); }
};

/// Applies the map to one observation matrix.
Eigen::VectorXd apply_map(const AffineRecoveryMap& map, const ObservationMatrix& y);

/// One model-set member evaluated at the problem points: observations plus
/// the ground-truth value vector at the new point.
struct PointSample {
  ObservationMatrix observations;  // M x N
  Eigen::VectorXd truth;           // length N
};

/// Worst observed prediction error, max over samples and components.
/// Throws std::invalid_argument on an empty sample list.
double empirical_error(const AffineRecoveryMap& map, const std::vector<PointSample>& samples);

/// Two-sided certificate for a map: lower bound on the best achievable
/// worst-case error and upper bound on the worst-case error of the map
/// that was produced alongside it.
struct Certificate {
  struct ComponentBounds {
    double e_lb = 0.0;      // component lower bound (relaxation value)
    double ub_plus = 0.0;   // grid bound on  sup (f_j(x0) - prediction)
    double ub_minus = 0.0;  // grid bound on  sup (prediction - f_j(x0))
  };

  double lower = 0.0;
  double upper = 0.0;
  double ratio = 1.0;   // upper/lower; +inf when lower is 0 and upper is not; 1 when both 0
  int level_r = 0;
  int grid_s = 0;
  std::vector<ComponentBounds> per_component;
};

/// Ratio with exact-zero semantics at numerical scale (values below 1e-9
/// are treated as zero).
double certificate_ratio(double lower, double upper);

struct ValidationResult {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const { return errors.empty(); }
};

/// Structural and semantic validation. Returns all violations found, plus
/// warnings for legal but suspicious inputs (e.g. dependence constraints
/// under a kernel with no constant functions).
ValidationResult validate_problem(const RecoveryProblem& problem);

}  // namespace optrec
