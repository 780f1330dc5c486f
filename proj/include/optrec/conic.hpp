#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace optrec::conic {

enum class BlockKind { nonneg, second_order, psd };

/// One cone constraint: coeff * x + offset must lie in the block's cone.
///
/// nonneg:       every slack entry >= 0.
/// second_order: slack[0] >= euclidean norm of the remaining entries.
/// psd:          slack is a symmetric matrix in packed form (lower triangle,
///               column major) with off-diagonal entries scaled by sqrt(2),
///               required to be positive semidefinite. The scaling makes the
///               packed dot product agree with the trace inner product.
struct ConeBlock {
  BlockKind kind = BlockKind::nonneg;
  Eigen::MatrixXd coeff;
  Eigen::VectorXd offset;
  int side = 0;  // psd only

  int dim() const { return static_cast<int>(offset.size()); }
};

/// minimize objective . x  subject to  eq_coeff x = eq_rhs  and every block
/// slack in its cone. Dense throughout; intended for problems up to a few
/// hundred variables and PSD sides up to a few dozen.
struct ConeProgram {
  int num_vars = 0;
  Eigen::VectorXd objective;
  Eigen::MatrixXd eq_coeff;  // may have zero rows
  Eigen::VectorXd eq_rhs;
  std::vector<ConeBlock> blocks;

  /// Throws std::invalid_argument on inconsistent dimensions or non-finite data.
  void check_well_formed() const;

  /// JSON dump of the full program for external cross-checking.
  std::string dump() const;
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iters };

const char* to_string(SolveStatus status);

/// On optimal: primal/dual pair for the program, objective values, and the
/// absolute duality gap. On infeasible/unbounded the dual respectively
/// primal fields hold the (scaled) certificate ray.
struct ConeSolution {
  SolveStatus status = SolveStatus::max_iters;
  Eigen::VectorXd primal;
  Eigen::VectorXd cone_dual;  // stacked block multipliers, program order
  Eigen::VectorXd eq_dual;
  double objective_value = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;
  int iterations = 0;
};

struct SolveOptions {
  double feastol = 1e-8;
  double abstol = 1e-8;
  double reltol = 1e-8;
  int max_iters = 200;
  bool verbose = false;
};

/// Primal-dual interior-point solve over the homogeneous self-dual
/// embedding with Nesterov-Todd scaling. Deterministic.
ConeSolution solve(const ConeProgram& program, const SolveOptions& options = {});

/// True iff the slack lies within tol of the cone (psd: smallest eigenvalue
/// of the unpacked matrix >= -tol).
bool check_membership(BlockKind kind, const Eigen::VectorXd& slack, double tol, int side = 0);

int svec_size(int side);
Eigen::VectorXd svec(const Eigen::MatrixXd& m);
Eigen::MatrixXd smat(const Eigen::VectorXd& v, int side);

}  // namespace optrec::conic
