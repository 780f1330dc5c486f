#pragma once

#include <vector>

#include <Eigen/Dense>

#include "optrec/conic.hpp"
#include "optrec/types.hpp"

namespace optrec::cosine {

/// Trigonometric moments of the Dirac measure at theta: entry k = cos(k*theta),
/// k = 0..level-1. Throws std::invalid_argument outside [0, pi].
Eigen::VectorXd point_moments(double theta, int level);

/// Symmetric Toeplitz section of a moment sequence: entry (i, k) = y_{|i-k|}.
/// Positive semidefiniteness is the (truncated) certificate that the sequence
/// comes from a nonnegative measure.
Eigen::MatrixXd toeplitz_section(const Eigen::VectorXd& y);

/// Default truncation level: 2 * (highest declared degree) + 4.
int default_level(const RecoveryProblem& prob);

/// Grid for the upper-bound programs: size uniform nodes over [0, pi] merged
/// with the problem points (which are kept exactly; uniform nodes closer than
/// 1e-12 to one are dropped). Sorted ascending. Requires size >= 2.
std::vector<double> certification_grid(const RecoveryProblem& prob, int size);

/// Truncated moment relaxation for component j at the given level: split
/// moment sequences for the dependence multipliers and the model-set
/// measures, map coefficients c and offset d, bound e; Toeplitz sections of
/// level x level enforce measure nonnegativity. Minimizing e lower-bounds
/// the worst-case error of the best affine map. Requires
/// level - 1 >= every declared basis and dependence degree.
conic::ConeProgram component_program(const RecoveryProblem& prob, int j, int level);

/// Map data for one component extracted from the relaxation optimum.
struct ComponentSolve {
  Eigen::MatrixXd coeff;  // M x N, aligned with ObservationMatrix
  double offset = 0.0;
  double value = 0.0;     // component lower bound; +inf when the relaxation is infeasible
  conic::SolveStatus status = conic::SolveStatus::max_iters;
  int iterations = 0;
};

/// Solves component_program(prob, j, level). When the prediction point
/// coincides exactly with an observation point the selector map is returned
/// directly with value 0 (the problem is exactly solvable there).
ComponentSolve solve_component(const RecoveryProblem& prob, int j, int level,
                               const conic::SolveOptions& options = {});

/// Lower bound at one truncation level together with the map it constructs.
struct LevelBound {
  double value = 0.0;      // max over components
  AffineRecoveryMap map;   // values[] hold the per-component lower bounds
  int level = 0;
};

/// Solves every component at the given level (0 picks default_level).
/// Throws std::runtime_error when a component solve fails to converge.
LevelBound lower_bound(const RecoveryProblem& prob, int level = 0,
                       const conic::SolveOptions& options = {});

/// Linear program bounding, for one component and one sign, the worst
/// signed deviation sigma * (f_j(x0) - sum_mn c(m,n) f_n(x^m)) over the
/// model set: atomic measures supported on the nodes dominate the point
/// functional at every node while staying orthogonal to the model-set
/// bases; any feasible value is a valid bound. Requires nodes to contain
/// every problem point exactly; sigma is +1 or -1.
conic::ConeProgram side_bound_program(const RecoveryProblem& prob, const Eigen::MatrixXd& coeff,
                                      const std::vector<double>& nodes, int j, int sigma);

/// Certified bound on the worst-case error of a fixed map over one grid.
struct GridBound {
  double value = 0.0;           // max over components; +inf when not feasible
  std::vector<double> ub_plus;  // per component: bound on sup (f_j(x0) - prediction)
  std::vector<double> ub_minus; // per component: bound on sup (prediction - f_j(x0))
  bool feasible = true;         // false: some program had no atomic certificate at this grid
  int grid = 0;
};

/// Evaluates the side bounds of the map on certification_grid(prob, grid_size)
/// and combines them with the map offsets. Refining the grid can only
/// tighten the result. Throws std::runtime_error when a program fails to
/// converge; an infeasible program is reported via feasible = false (a
/// larger grid may still certify).
GridBound upper_bound(const RecoveryProblem& prob, const AffineRecoveryMap& map, int grid_size,
                      const conic::SolveOptions& options = {});

/// Map with a two-sided certificate.
struct CertifiedMap {
  AffineRecoveryMap map;  // values[] hold the certified per-component upper bounds
  Certificate certificate;
};

/// End to end: lower_bound at the level (0 picks the default), then
/// upper_bound of the constructed map on the grid.
CertifiedMap certify(const RecoveryProblem& prob, int level = 0, int grid_size = 101,
                     const conic::SolveOptions& options = {});

}  // namespace optrec::cosine
