#include "optrec/rkhs.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <variant>

#include <Eigen/Eigenvalues>

namespace optrec::rkhs {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double pair_inner(const Kernel& k, const AnchoredFunction& f, const AnchoredFunction& g) {
  double acc = 0.0;
  for (size_t i = 0; i < f.anchors.size(); ++i)
    for (size_t j = 0; j < g.anchors.size(); ++j)
      acc += f.weights[i] * g.weights[j] * k.eval(f.anchors[i], g.anchors[j]);
  return acc;
}

const AnchoredFunction& as_anchored(const BasisFunction& f) {
  const auto* a = std::get_if<AnchoredFunction>(&f);
  if (!a) throw std::invalid_argument("expected a kernel-combination function");
  return *a;
}

}  // namespace

double ReducedSpace::inner(const VectorXd& a, const VectorXd& b) const {
  return a.dot(gram * b);
}

double ReducedSpace::eval(const VectorXd& coords, double x) const {
  double acc = 0.0;
  for (int i = 0; i < dim(); ++i) {
    if (coords[i] == 0.0) continue;
    const auto& f = span[static_cast<size_t>(i)];
    double v = 0.0;
    for (size_t k = 0; k < f.anchors.size(); ++k) v += f.weights[k] * kernel.eval(x, f.anchors[k]);
    acc += coords[i] * v;
  }
  return acc;
}

AnchoredFunction ReducedSpace::combine(const VectorXd& coords) const {
  AnchoredFunction out;
  for (int i = 0; i < dim(); ++i) {
    if (coords[i] == 0.0) continue;
    const auto& f = span[static_cast<size_t>(i)];
    for (size_t k = 0; k < f.anchors.size(); ++k) {
      out.anchors.push_back(f.anchors[k]);
      out.weights.push_back(coords[i] * f.weights[k]);
    }
  }
  return out;
}

ReducedSpace build_reduced_space(const RecoveryProblem& prob,
                                 const std::vector<double>& extra_sections) {
  if (!prob.kernel) throw std::invalid_argument("reduced space needs a kernel");
  ReducedSpace sp;
  sp.kernel = *prob.kernel;
  sp.num_rhs = prob.dependence.count();
  sp.num_old = prob.points.count();

  for (int l = 0; l < sp.num_rhs; ++l)
    sp.span.push_back(as_anchored(prob.dependence.rhs[static_cast<size_t>(l)]));
  sp.span.push_back(AnchoredFunction{{prob.points.new_point}, {1.0}});
  for (double x : prob.points.old_points) sp.span.push_back(AnchoredFunction{{x}, {1.0}});
  for (const auto& ms : prob.model_sets) {
    sp.vbasis_offset.push_back(static_cast<int>(sp.span.size()));
    sp.vbasis_dim.push_back(static_cast<int>(ms.basis.size()));
    for (const auto& f : ms.basis) sp.span.push_back(as_anchored(f));
  }
  for (double x : extra_sections) sp.span.push_back(AnchoredFunction{{x}, {1.0}});

  const int s = sp.dim();
  sp.gram.resize(s, s);
  for (int i = 0; i < s; ++i)
    for (int j = i; j < s; ++j) {
      const double v =
          pair_inner(sp.kernel, sp.span[static_cast<size_t>(i)], sp.span[static_cast<size_t>(j)]);
      sp.gram(i, j) = v;
      sp.gram(j, i) = v;
    }

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sp.gram);
  const double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
  const double thr = 1e-10 * std::max(lmax, 1e-300);
  int rank = 0;
  for (int i = 0; i < s; ++i)
    if (es.eigenvalues()[i] > thr) ++rank;
  sp.gram_sqrt.resize(rank, s);
  int r = 0;
  for (int i = 0; i < s; ++i)
    if (es.eigenvalues()[i] > thr)
      sp.gram_sqrt.row(r++) = std::sqrt(es.eigenvalues()[i]) * es.eigenvectors().col(i).transpose();
  return sp;
}

ComponentSolve solve_component(const RecoveryProblem& prob, const ReducedSpace& space, int j,
                               const conic::SolveOptions& options) {
  const int nn = prob.num_components;
  const int m = prob.points.count();
  const int l = prob.dependence.count();
  const int rk = space.rank();
  if (j < 0 || j >= nn) throw std::invalid_argument("component index out of range");

  std::vector<int> eps_pos;  // components whose model set has positive width
  for (int n = 0; n < nn; ++n)
    if (prob.model_sets[static_cast<size_t>(n)].epsilon > 0.0) eps_pos.push_back(n);
  const int np = static_cast<int>(eps_pos.size());

  // Free Hilbert-space variables are kept in factored coordinates (their
  // image under the Gram square root); the span itself may be linearly
  // dependent, and using raw span coordinates would add null directions.
  const int ve = 0, vd = 1;
  auto vc = [&](int mm, int n) { return 2 + mm * nn + n; };
  auto vxi = [&](int sigma, int ll, int r) { return 2 + m * nn + sigma * l * rk + ll * rk + r; };
  auto vt = [&](int sigma, int p) { return 2 + m * nn + 2 * l * rk + sigma * np + p; };
  const int nvars = 2 + m * nn + 2 * l * rk + 2 * np;

  conic::ConeProgram cp;
  cp.num_vars = nvars;
  cp.objective = VectorXd::Zero(nvars);
  cp.objective[ve] = 1.0;

  {  // two budget rows: e + sign*d covers the signed certificate value
    conic::ConeBlock blk;
    blk.kind = conic::BlockKind::nonneg;
    blk.coeff = MatrixXd::Zero(2, nvars);
    blk.offset = VectorXd::Zero(2);
    for (int sigma = 0; sigma < 2; ++sigma) {
      const double sgn = sigma == 0 ? 1.0 : -1.0;
      blk.coeff(sigma, ve) = 1.0;
      blk.coeff(sigma, vd) = sgn;
      for (int ll = 0; ll < l; ++ll)
        for (int r = 0; r < rk; ++r)
          blk.coeff(sigma, vxi(sigma, ll, r)) = -sgn * space.gram_sqrt(r, space.idx_rhs(ll));
      for (int p = 0; p < np; ++p)
        blk.coeff(sigma, vt(sigma, p)) =
            -prob.model_sets[static_cast<size_t>(eps_pos[static_cast<size_t>(p)])].epsilon;
    }
    cp.blocks.push_back(std::move(blk));
  }

  // Residual function for component n under sign sigma, tested against the
  // factored coordinates q: delta_{jn} K(.,new) - sum_m c_{mn} K(.,old_m)
  // - sum_l A(l,n) u_l. Its norm feeds the cone rows; its inner products
  // with the component's basis functions must vanish for the certificate
  // value to be finite.
  auto residual_row = [&](const VectorXd& q, int sigma, int n, MatrixXd& coeff, int row,
                          double& offset) {
    offset = (j == n) ? q.dot(space.gram_sqrt.col(space.idx_new())) : 0.0;
    for (int mm = 0; mm < m; ++mm)
      coeff(row, vc(mm, n)) -= q.dot(space.gram_sqrt.col(space.idx_old(mm)));
    for (int ll = 0; ll < l; ++ll) {
      const double a = prob.dependence.coefficients(ll, n);
      if (a == 0.0) continue;
      for (int r = 0; r < rk; ++r) coeff(row, vxi(sigma, ll, r)) -= a * q[r];
    }
  };

  for (int sigma = 0; sigma < 2; ++sigma)
    for (int p = 0; p < np; ++p) {
      const int n = eps_pos[static_cast<size_t>(p)];
      conic::ConeBlock blk;
      blk.kind = conic::BlockKind::second_order;
      blk.coeff = MatrixXd::Zero(1 + rk, nvars);
      blk.offset = VectorXd::Zero(1 + rk);
      blk.coeff(0, vt(sigma, p)) = 1.0;
      for (int r = 0; r < rk; ++r) {
        double off = 0.0;
        residual_row(VectorXd::Unit(rk, r), sigma, n, blk.coeff, 1 + r, off);
        blk.offset[1 + r] = off;
      }
      cp.blocks.push_back(std::move(blk));
    }

  {  // orthogonality of each residual to the component's basis
    int nrows = 0;
    for (int n = 0; n < nn; ++n) nrows += space.vbasis_dim[static_cast<size_t>(n)];
    cp.eq_coeff = MatrixXd::Zero(2 * nrows, nvars);
    cp.eq_rhs = VectorXd::Zero(2 * nrows);
    int row = 0;
    for (int sigma = 0; sigma < 2; ++sigma)
      for (int n = 0; n < nn; ++n)
        for (int k = 0; k < space.vbasis_dim[static_cast<size_t>(n)]; ++k) {
          double off = 0.0;
          residual_row(VectorXd(space.gram_sqrt.col(space.idx_vbasis(n, k))), sigma, n,
                       cp.eq_coeff, row, off);
          cp.eq_rhs[row] = -off;
          ++row;
        }
  }

  conic::ConeSolution sol = conic::solve(cp, options);
  ComponentSolve out;
  out.status = sol.status;
  out.iterations = sol.iterations;
  out.coeff = MatrixXd::Zero(m, nn);
  if (sol.status == conic::SolveStatus::optimal) {
    out.error = std::max(0.0, sol.primal[ve]);
    out.offset = sol.primal[vd];
    for (int mm = 0; mm < m; ++mm)
      for (int n = 0; n < nn; ++n) out.coeff(mm, n) = sol.primal[vc(mm, n)];
  } else if (sol.status == conic::SolveStatus::infeasible) {
    // No finite certificate: no affine map has finite worst-case error here.
    out.error = std::numeric_limits<double>::infinity();
  }
  return out;
}

AffineRecoveryMap solve_recovery(const RecoveryProblem& prob, const conic::SolveOptions& options) {
  ValidationResult vr = validate_problem(prob);
  if (!vr.ok()) {
    std::string msg = "invalid problem:";
    for (const auto& e : vr.errors) msg += " " + e;
    throw std::invalid_argument(msg);
  }
  const ReducedSpace space = build_reduced_space(prob);
  AffineRecoveryMap map;
  map.offsets = VectorXd::Zero(prob.num_components);
  map.values = VectorXd::Zero(prob.num_components);
  for (int j = 0; j < prob.num_components; ++j) {
    ComponentSolve cs = solve_component(prob, space, j, options);
    if (cs.status != conic::SolveStatus::optimal)
      throw std::runtime_error(std::string("component solve failed: ") +
                               conic::to_string(cs.status));
    map.coeffs.push_back(cs.coeff);
    map.offsets[j] = cs.offset;
    map.values[j] = cs.error;
  }
  return map;
}

double diameter_lower_bound(const RecoveryProblem& prob, const ReducedSpace& space, int j,
                            const conic::SolveOptions& options) {
  const int nn = prob.num_components;
  const int m = prob.points.count();
  const int l = prob.dependence.count();
  const int rk = space.rank();

  std::vector<int> voff(static_cast<size_t>(nn), 0);
  int vtot = 0;
  for (int n = 0; n < nn; ++n) {
    voff[static_cast<size_t>(n)] = vtot;
    vtot += space.vbasis_dim[static_cast<size_t>(n)];
  }
  // Candidate components live in factored coordinates (see solve_component);
  // their span coefficients stay explicit only for the basis deviations.
  auto vh = [&](int n, int r) { return n * rk + r; };
  auto vv = [&](int n, int k) { return nn * rk + voff[static_cast<size_t>(n)] + k; };
  const int nvars = nn * rk + vtot;

  conic::ConeProgram cp;
  cp.num_vars = nvars;
  cp.objective = VectorXd::Zero(nvars);
  for (int r = 0; r < rk; ++r) cp.objective[vh(j, r)] = -space.gram_sqrt(r, space.idx_new());

  int ez = 0;  // rows pinning zero-width components into their spans
  for (int n = 0; n < nn; ++n)
    if (prob.model_sets[static_cast<size_t>(n)].epsilon <= 0.0) ++ez;
  cp.eq_coeff = MatrixXd::Zero(nn * m + l * rk + ez * rk, nvars);
  cp.eq_rhs = VectorXd::Zero(cp.eq_coeff.rows());
  int row = 0;
  for (int n = 0; n < nn; ++n)
    for (int mm = 0; mm < m; ++mm) {
      for (int r = 0; r < rk; ++r)
        cp.eq_coeff(row, vh(n, r)) = space.gram_sqrt(r, space.idx_old(mm));
      ++row;
    }
  for (int ll = 0; ll < l; ++ll)
    for (int r = 0; r < rk; ++r) {
      for (int n = 0; n < nn; ++n) {
        const double a = prob.dependence.coefficients(ll, n);
        if (a == 0.0) continue;
        cp.eq_coeff(row, vh(n, r)) += a;
      }
      ++row;
    }

  auto deviation_rows = [&](int n, MatrixXd& coeff, int base) {
    for (int r = 0; r < rk; ++r) {
      coeff(base + r, vh(n, r)) = 1.0;
      for (int k = 0; k < space.vbasis_dim[static_cast<size_t>(n)]; ++k)
        coeff(base + r, vv(n, k)) = -space.gram_sqrt(r, space.idx_vbasis(n, k));
    }
  };

  for (int n = 0; n < nn; ++n) {
    const double eps = prob.model_sets[static_cast<size_t>(n)].epsilon;
    if (eps <= 0.0) {
      deviation_rows(n, cp.eq_coeff, row);
      row += rk;
    } else {
      conic::ConeBlock blk;
      blk.kind = conic::BlockKind::second_order;
      blk.coeff = MatrixXd::Zero(1 + rk, nvars);
      blk.offset = VectorXd::Zero(1 + rk);
      blk.offset[0] = eps;
      deviation_rows(n, blk.coeff, 1);
      cp.blocks.push_back(std::move(blk));
    }
  }
  if (cp.blocks.empty()) {
    conic::ConeBlock blk;  // keep the program well formed when every width is zero
    blk.kind = conic::BlockKind::nonneg;
    blk.coeff = MatrixXd::Zero(1, nvars);
    blk.offset = VectorXd::Ones(1);
    cp.blocks.push_back(blk);
  }

  conic::ConeSolution sol = conic::solve(cp, options);
  if (sol.status == conic::SolveStatus::unbounded)
    return std::numeric_limits<double>::infinity();
  if (sol.status != conic::SolveStatus::optimal)
    throw std::runtime_error(std::string("diameter bound solve failed: ") +
                             conic::to_string(sol.status));
  return -sol.objective_value;
}

double model_set_violation(const RecoveryProblem& prob, const ReducedSpace& space,
                           const std::vector<VectorXd>& components) {
  if (static_cast<int>(components.size()) != prob.num_components)
    throw std::invalid_argument("component count mismatch");
  double worst = 0.0;
  for (int n = 0; n < prob.num_components; ++n) {
    const VectorXd& f = components[static_cast<size_t>(n)];
    if (f.size() != space.dim()) throw std::invalid_argument("coordinate length mismatch");
    const VectorXd phi_f = space.gram_sqrt * f;
    const int dv = space.vbasis_dim[static_cast<size_t>(n)];
    double dist;
    if (dv == 0) {
      dist = phi_f.norm();
    } else {
      MatrixXd basis(space.rank(), dv);
      for (int k = 0; k < dv; ++k) basis.col(k) = space.gram_sqrt.col(space.idx_vbasis(n, k));
      const VectorXd w = basis.colPivHouseholderQr().solve(phi_f);
      dist = (phi_f - basis * w).norm();
    }
    worst = std::max(worst, dist - prob.model_sets[static_cast<size_t>(n)].epsilon);
  }
  return std::max(0.0, worst);
}

bool member_of_model_sets(const RecoveryProblem& prob, const ReducedSpace& space,
                          const std::vector<VectorXd>& components, double tol) {
  return model_set_violation(prob, space, components) <= tol;
}

}  // namespace optrec::rkhs
