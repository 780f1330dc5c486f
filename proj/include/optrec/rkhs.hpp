#pragma once

#include <vector>

#include <Eigen/Dense>

#include "optrec/conic.hpp"
#include "optrec/types.hpp"

namespace optrec::rkhs {

/// Finite-dimensional subspace in which the whole recovery problem can be
/// posed without loss: the span of the dependence right-hand sides, the
/// kernel sections at the prediction and observation points, and the
/// model-set bases. Functions are handled as coordinate vectors over `span`;
/// norms and point evaluations reduce to the Gram matrix.
struct ReducedSpace {
  Kernel kernel = Kernel::min_plus_one();
  std::vector<AnchoredFunction> span;
  Eigen::MatrixXd gram;       // pairwise inner products of the span entries
  Eigen::MatrixXd gram_sqrt;  // rank x dim factor with gram = gram_sqrt' * gram_sqrt

  int num_rhs = 0;  // leading span entries: dependence right-hand sides
  int num_old = 0;
  std::vector<int> vbasis_offset;  // per component, start of its basis block
  std::vector<int> vbasis_dim;

  int dim() const { return static_cast<int>(span.size()); }
  int rank() const { return static_cast<int>(gram_sqrt.rows()); }
  int idx_rhs(int l) const { return l; }
  int idx_new() const { return num_rhs; }
  int idx_old(int m) const { return num_rhs + 1 + m; }
  int idx_vbasis(int n, int k) const { return vbasis_offset[static_cast<size_t>(n)] + k; }

  /// Inner product of two coordinate vectors.
  double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  /// Point evaluation of the function with the given coordinates.
  double eval(const Eigen::VectorXd& coords, double x) const;
  /// Collapses a coordinate vector into a single kernel combination.
  AnchoredFunction combine(const Eigen::VectorXd& coords) const;
};

/// Builds the reduced space; extra_sections appends further kernel sections
/// K(., x) to the span. Enlarging the span must not change any computed
/// quantity, which makes the parameter a useful invariance probe.
ReducedSpace build_reduced_space(const RecoveryProblem& prob,
                                 const std::vector<double>& extra_sections = {});

/// Result of the per-component construction: observation weights, offset,
/// and the certified worst-case error of the resulting affine prediction.
struct ComponentSolve {
  Eigen::MatrixXd coeff;  // M x N, aligned with ObservationMatrix
  double offset = 0.0;
  double error = 0.0;
  conic::SolveStatus status = conic::SolveStatus::max_iters;
  int iterations = 0;
};

/// Builds the optimal affine prediction for component j by solving a
/// second-order cone program over the reduced space.
ComponentSolve solve_component(const RecoveryProblem& prob, const ReducedSpace& space, int j,
                               const conic::SolveOptions& options = {});

/// Full map: every component solved, values[] holding per-component errors.
AffineRecoveryMap solve_recovery(const RecoveryProblem& prob,
                                 const conic::SolveOptions& options = {});

/// Independent lower bound on any map's worst-case error for component j:
/// the largest value at the prediction point over functions that vanish at
/// all observation points, satisfy the homogeneous dependence relations,
/// and lie in the model sets. Assembled directly from the primal
/// description, so agreement with solve_component is a nontrivial check.
double diameter_lower_bound(const RecoveryProblem& prob, const ReducedSpace& space, int j,
                            const conic::SolveOptions& options = {});

/// Checks whether component coordinate vectors lie in their model sets
/// (distance to the basis span at most epsilon + tol).
bool member_of_model_sets(const RecoveryProblem& prob, const ReducedSpace& space,
                          const std::vector<Eigen::VectorXd>& components, double tol);

/// Worst distance-above-epsilon over the components (0 when all inside).
double model_set_violation(const RecoveryProblem& prob, const ReducedSpace& space,
                           const std::vector<Eigen::VectorXd>& components);

}  // namespace optrec::rkhs
