#include "optrec/cosine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace optrec::cosine {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kPi = 3.14159265358979323846;

const CosinePoly& as_cosine(const BasisFunction& f, const char* where) {
  const CosinePoly* p = std::get_if<CosinePoly>(&f);
  if (!p) throw std::invalid_argument(std::string(where) + ": expected a cosine polynomial");
  return *p;
}

void check_setting(const RecoveryProblem& prob, int j) {
  if (prob.setting != Setting::cosine)
    throw std::invalid_argument("cosine construction invoked on a non-cosine problem");
  if (j < 0 || j >= prob.num_components)
    throw std::invalid_argument("component index out of range");
  if (prob.model_sets.size() != static_cast<size_t>(prob.num_components))
    throw std::invalid_argument("model set count does not match component count");
}

int max_declared_degree(const RecoveryProblem& prob) {
  int deg = 0;
  for (const auto& ms : prob.model_sets)
    for (const auto& f : ms.basis) deg = std::max(deg, as_cosine(f, "model set basis").degree());
  for (const auto& f : prob.dependence.rhs)
    deg = std::max(deg, as_cosine(f, "dependence rhs").degree());
  return deg;
}

// Rows are packed symmetric coordinates: lift * y = svec(Toep(y)).
MatrixXd toeplitz_svec_lift(int level) {
  MatrixXd lift = MatrixXd::Zero(conic::svec_size(level), level);
  const double rt2 = std::sqrt(2.0);
  int pos = 0;
  for (int c = 0; c < level; ++c)
    for (int i = c; i < level; ++i, ++pos) lift(pos, i - c) = (i == c) ? 1.0 : rt2;
  return lift;
}

}  // namespace

VectorXd point_moments(double theta, int level) {
  if (level < 1) throw std::invalid_argument("point_moments: level must be >= 1");
  if (!(theta >= 0.0 && theta <= kPi))
    throw std::invalid_argument("point_moments: point outside [0, pi]");
  VectorXd y(level);
  for (int k = 0; k < level; ++k) y[k] = std::cos(k * theta);
  return y;
}

MatrixXd toeplitz_section(const VectorXd& y) {
  const int r = static_cast<int>(y.size());
  if (r < 1) throw std::invalid_argument("toeplitz_section: empty sequence");
  MatrixXd t(r, r);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < r; ++k) t(i, k) = y[std::abs(i - k)];
  return t;
}

int default_level(const RecoveryProblem& prob) { return 2 * max_declared_degree(prob) + 4; }

std::vector<double> certification_grid(const RecoveryProblem& prob, int size) {
  if (size < 2) throw std::invalid_argument("certification_grid: size must be >= 2");
  std::vector<double> anchors{prob.points.new_point};
  anchors.insert(anchors.end(), prob.points.old_points.begin(), prob.points.old_points.end());
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());

  std::vector<double> nodes = anchors;
  for (int i = 0; i < size; ++i) {
    const double t = kPi * i / (size - 1);
    bool close = false;
    for (double a : anchors) close = close || std::abs(t - a) <= 1e-12;
    if (!close) nodes.push_back(t);
  }
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

conic::ConeProgram component_program(const RecoveryProblem& prob, int j, int level) {
  check_setting(prob, j);
  const int r = level;
  if (r - 1 < max_declared_degree(prob))
    throw std::invalid_argument("component_program: level too small for the declared degrees");

  const int nn = prob.num_components;
  const int mm = prob.points.count();
  const int ll = prob.dependence.count();
  const MatrixXd& dep = prob.dependence.coefficients;

  // Split moment sequences: sign s2 (0: +, 1: -), part (0: added, 1: subtracted).
  auto vu = [&](int s2, int part, int l, int k) { return ((s2 * 2 + part) * ll + l) * r + k; };
  auto vv = [&](int s2, int part, int n, int k) {
    return 4 * ll * r + ((s2 * 2 + part) * nn + n) * r + k;
  };
  auto vc = [&](int m, int n) { return 4 * (ll + nn) * r + m * nn + n; };
  const int vd = 4 * (ll + nn) * r + mm * nn;
  const int ve = vd + 1;
  const int nvars = ve + 1;

  conic::ConeProgram cp;
  cp.num_vars = nvars;
  cp.objective = VectorXd::Zero(nvars);
  cp.objective[ve] = 1.0;

  const VectorXd ynew = point_moments(prob.points.new_point, r);
  std::vector<VectorXd> zold;
  zold.reserve(static_cast<size_t>(mm));
  for (int m = 0; m < mm; ++m) zold.push_back(point_moments(prob.points.old_points[static_cast<size_t>(m)], r));

  // Budget rows: e + sign*d covers the dependence term plus the model-set
  // total-variation charges.
  conic::ConeBlock budget;
  budget.kind = conic::BlockKind::nonneg;
  budget.coeff = MatrixXd::Zero(2, nvars);
  budget.offset = VectorXd::Zero(2);
  for (int s2 = 0; s2 < 2; ++s2) {
    const double sign = s2 == 0 ? 1.0 : -1.0;
    budget.coeff(s2, ve) = 1.0;
    budget.coeff(s2, vd) = sign;
    for (int l = 0; l < ll; ++l) {
      const CosinePoly& b = as_cosine(prob.dependence.rhs[static_cast<size_t>(l)], "dependence rhs");
      const size_t klim = std::min(b.coeffs.size(), static_cast<size_t>(b.degree()) + 1);
      for (size_t k = 0; k < klim; ++k) {
        budget.coeff(s2, vu(s2, 0, l, static_cast<int>(k))) = -sign * b.coeffs[k];
        budget.coeff(s2, vu(s2, 1, l, static_cast<int>(k))) = sign * b.coeffs[k];
      }
    }
    for (int n = 0; n < nn; ++n) {
      const double eps = prob.model_sets[static_cast<size_t>(n)].epsilon;
      budget.coeff(s2, vv(s2, 0, n, 0)) -= eps;
      budget.coeff(s2, vv(s2, 1, n, 0)) -= eps;
    }
  }
  cp.blocks.push_back(std::move(budget));

  // Model-set measures must annihilate their spans.
  int eq_rows = 0;
  for (const auto& ms : prob.model_sets) eq_rows += 2 * static_cast<int>(ms.basis.size());
  cp.eq_coeff = MatrixXd::Zero(eq_rows, nvars);
  cp.eq_rhs = VectorXd::Zero(eq_rows);
  int row = 0;
  for (int s2 = 0; s2 < 2; ++s2)
    for (int n = 0; n < nn; ++n)
      for (const auto& f : prob.model_sets[static_cast<size_t>(n)].basis) {
        const CosinePoly& p = as_cosine(f, "model set basis");
        const size_t klim = std::min(p.coeffs.size(), static_cast<size_t>(p.degree()) + 1);
        for (size_t k = 0; k < klim; ++k) {
          cp.eq_coeff(row, vv(s2, 0, n, static_cast<int>(k))) = p.coeffs[k];
          cp.eq_coeff(row, vv(s2, 1, n, static_cast<int>(k))) = -p.coeffs[k];
        }
        ++row;
      }

  const MatrixXd lift = toeplitz_svec_lift(r);
  const int slen = conic::svec_size(r);

  // Domination sections: the combined measure moments minus the signed point
  // functional stay completely positive at the truncation level.
  for (int s2 = 0; s2 < 2; ++s2) {
    const double sign = s2 == 0 ? 1.0 : -1.0;
    for (int n = 0; n < nn; ++n) {
      conic::ConeBlock blk;
      blk.kind = conic::BlockKind::psd;
      blk.side = r;
      blk.coeff = MatrixXd::Zero(slen, nvars);
      blk.offset = VectorXd::Zero(slen);
      for (int k = 0; k < r; ++k) {
        blk.coeff.col(vv(s2, 0, n, k)) += lift.col(k);
        blk.coeff.col(vv(s2, 1, n, k)) -= lift.col(k);
      }
      for (int l = 0; l < ll; ++l) {
        const double a = dep(l, n);
        if (a == 0.0) continue;
        for (int k = 0; k < r; ++k) {
          blk.coeff.col(vu(s2, 0, l, k)) += sign * a * lift.col(k);
          blk.coeff.col(vu(s2, 1, l, k)) -= sign * a * lift.col(k);
        }
      }
      for (int m = 0; m < mm; ++m) blk.coeff.col(vc(m, n)) = sign * (lift * zold[static_cast<size_t>(m)]);
      if (n == j) blk.offset = -sign * (lift * ynew);
      cp.blocks.push_back(std::move(blk));
    }
  }

  // Every split sequence is itself a truncated moment sequence.
  auto add_seq_block = [&](int first) {
    conic::ConeBlock blk;
    blk.kind = conic::BlockKind::psd;
    blk.side = r;
    blk.coeff = MatrixXd::Zero(slen, nvars);
    blk.coeff.middleCols(first, r) = lift;
    blk.offset = VectorXd::Zero(slen);
    cp.blocks.push_back(std::move(blk));
  };
  for (int s2 = 0; s2 < 2; ++s2)
    for (int part = 0; part < 2; ++part) {
      for (int l = 0; l < ll; ++l) add_seq_block(vu(s2, part, l, 0));
      for (int n = 0; n < nn; ++n) add_seq_block(vv(s2, part, n, 0));
    }

  return cp;
}

ComponentSolve solve_component(const RecoveryProblem& prob, int j, int level,
                               const conic::SolveOptions& options) {
  check_setting(prob, j);
  const int nn = prob.num_components;
  const int mm = prob.points.count();

  ComponentSolve out;
  out.coeff = MatrixXd::Zero(mm, nn);

  // Collocation: the value is read off an observation, exactly.
  for (int m = 0; m < mm; ++m)
    if (prob.points.old_points[static_cast<size_t>(m)] == prob.points.new_point) {
      out.coeff(m, j) = 1.0;
      out.status = conic::SolveStatus::optimal;
      return out;
    }

  const conic::ConeProgram cp = component_program(prob, j, level);
  const conic::ConeSolution sol = conic::solve(cp, options);
  out.status = sol.status;
  out.iterations = sol.iterations;

  auto vc = [&](int m, int n) {
    return 4 * (prob.dependence.count() + nn) * level + m * nn + n;
  };
  const int vd = 4 * (prob.dependence.count() + nn) * level + mm * nn;

  if (sol.status == conic::SolveStatus::optimal) {
    for (int m = 0; m < mm; ++m)
      for (int n = 0; n < nn; ++n) out.coeff(m, n) = sol.primal[vc(m, n)];
    out.offset = sol.primal[vd];
    out.value = std::max(0.0, sol.objective_value);
  } else if (sol.status == conic::SolveStatus::infeasible) {
    // No finite certificate at any truncation: the observations leave a
    // model-set direction completely free.
    out.value = std::numeric_limits<double>::infinity();
  }
  return out;
}

LevelBound lower_bound(const RecoveryProblem& prob, int level, const conic::SolveOptions& options) {
  check_setting(prob, 0);
  LevelBound out;
  out.level = level > 0 ? level : default_level(prob);

  const int nn = prob.num_components;
  out.map.offsets = VectorXd::Zero(nn);
  out.map.values = VectorXd::Zero(nn);
  for (int j = 0; j < nn; ++j) {
    ComponentSolve cs = solve_component(prob, j, out.level, options);
    if (cs.status != conic::SolveStatus::optimal &&
        cs.status != conic::SolveStatus::infeasible)
      throw std::runtime_error(std::string("component relaxation failed: ") +
                               conic::to_string(cs.status));
    out.map.coeffs.push_back(cs.coeff);
    out.map.offsets[j] = cs.offset;
    out.map.values[j] = cs.value;
    out.value = std::max(out.value, cs.value);
  }
  return out;
}

conic::ConeProgram side_bound_program(const RecoveryProblem& prob, const MatrixXd& coeff,
                                      const std::vector<double>& nodes, int j, int sigma) {
  check_setting(prob, j);
  if (sigma != 1 && sigma != -1)
    throw std::invalid_argument("side_bound_program: sigma must be +1 or -1");
  const int nn = prob.num_components;
  const int mm = prob.points.count();
  const int ll = prob.dependence.count();
  if (coeff.rows() != mm || coeff.cols() != nn)
    throw std::invalid_argument("side_bound_program: coefficient shape mismatch");

  const int ss = static_cast<int>(nodes.size());
  auto node_index = [&](double x) {
    for (int i = 0; i < ss; ++i)
      if (nodes[static_cast<size_t>(i)] == x) return i;
    throw std::invalid_argument("side_bound_program: grid is missing a problem point");
  };
  const double sg = sigma;

  // Atom weights, all split into added/subtracted parts.
  auto mu = [&](int part, int l, int i) { return (part * ll + l) * ss + i; };
  auto nu = [&](int part, int n, int i) { return 2 * ll * ss + (part * nn + n) * ss + i; };
  const int nvars = 2 * (ll + nn) * ss;

  conic::ConeProgram cp;
  cp.num_vars = nvars;
  cp.objective = VectorXd::Zero(nvars);
  for (int l = 0; l < ll; ++l) {
    const CosinePoly& b = as_cosine(prob.dependence.rhs[static_cast<size_t>(l)], "dependence rhs");
    for (int i = 0; i < ss; ++i) {
      const double bi = b.eval(nodes[static_cast<size_t>(i)]);
      cp.objective[mu(0, l, i)] = sg * bi;
      cp.objective[mu(1, l, i)] = -sg * bi;
    }
  }
  for (int n = 0; n < nn; ++n) {
    const double eps = prob.model_sets[static_cast<size_t>(n)].epsilon;
    for (int i = 0; i < ss; ++i) {
      cp.objective[nu(0, n, i)] = eps;
      cp.objective[nu(1, n, i)] = eps;
    }
  }

  int eq_rows = 0;
  for (const auto& ms : prob.model_sets) eq_rows += static_cast<int>(ms.basis.size());
  cp.eq_coeff = MatrixXd::Zero(eq_rows, nvars);
  cp.eq_rhs = VectorXd::Zero(eq_rows);
  int row = 0;
  for (int n = 0; n < nn; ++n)
    for (const auto& f : prob.model_sets[static_cast<size_t>(n)].basis) {
      const CosinePoly& p = as_cosine(f, "model set basis");
      for (int i = 0; i < ss; ++i) {
        const double pi = p.eval(nodes[static_cast<size_t>(i)]);
        cp.eq_coeff(row, nu(0, n, i)) = pi;
        cp.eq_coeff(row, nu(1, n, i)) = -pi;
      }
      ++row;
    }

  // Signed point functional to dominate, accumulated per node (collocated
  // points share a node).
  MatrixXd target = MatrixXd::Zero(nn, ss);
  target(j, node_index(prob.points.new_point)) += sg;
  for (int m = 0; m < mm; ++m) {
    const int i = node_index(prob.points.old_points[static_cast<size_t>(m)]);
    for (int n = 0; n < nn; ++n) target(n, i) -= sg * coeff(m, n);
  }

  conic::ConeBlock dom;
  dom.kind = conic::BlockKind::nonneg;
  dom.coeff = MatrixXd::Zero(nn * ss, nvars);
  dom.offset = VectorXd::Zero(nn * ss);
  const MatrixXd& dep = prob.dependence.coefficients;
  for (int n = 0; n < nn; ++n)
    for (int i = 0; i < ss; ++i) {
      const int drow = n * ss + i;
      dom.coeff(drow, nu(0, n, i)) = 1.0;
      dom.coeff(drow, nu(1, n, i)) = -1.0;
      for (int l = 0; l < ll; ++l) {
        dom.coeff(drow, mu(0, l, i)) = sg * dep(l, n);
        dom.coeff(drow, mu(1, l, i)) = -sg * dep(l, n);
      }
      dom.offset[drow] = -target(n, i);
    }

  conic::ConeBlock pos;
  pos.kind = conic::BlockKind::nonneg;
  pos.coeff = MatrixXd::Identity(nvars, nvars);
  pos.offset = VectorXd::Zero(nvars);

  cp.blocks.push_back(std::move(pos));
  cp.blocks.push_back(std::move(dom));
  return cp;
}

GridBound upper_bound(const RecoveryProblem& prob, const AffineRecoveryMap& map, int grid_size,
                      const conic::SolveOptions& options) {
  check_setting(prob, 0);
  const int nn = prob.num_components;
  if (map.components() != nn || map.observations() != prob.points.count() ||
      map.offsets.size() != nn)
    throw std::invalid_argument("upper_bound: map shape does not match the problem");

  const std::vector<double> nodes = certification_grid(prob, grid_size);

  GridBound out;
  out.grid = grid_size;
  out.ub_plus.resize(static_cast<size_t>(nn), 0.0);
  out.ub_minus.resize(static_cast<size_t>(nn), 0.0);
  for (int j = 0; j < nn; ++j) {
    double side[2] = {0.0, 0.0};
    for (int s2 = 0; s2 < 2; ++s2) {
      const int sigma = s2 == 0 ? 1 : -1;
      const conic::ConeProgram cp =
          side_bound_program(prob, map.coeffs[static_cast<size_t>(j)], nodes, j, sigma);
      // The point functional vanished entirely (exactly reproduced from the
      // observations): zero measures certify a zero bound.
      if (cp.blocks[1].offset.isZero(0.0)) continue;
      const conic::ConeSolution sol = conic::solve(cp, options);
      if (sol.status == conic::SolveStatus::optimal) {
        side[s2] = sol.objective_value;
      } else if (sol.status == conic::SolveStatus::infeasible ||
                 sol.status == conic::SolveStatus::unbounded) {
        // No atomic certificate on this grid; a finer one may still work.
        out.feasible = false;
      } else {
        throw std::runtime_error(std::string("grid bound solve failed: ") +
                                 conic::to_string(sol.status));
      }
    }
    out.ub_plus[static_cast<size_t>(j)] = side[0] - map.offsets[j];
    out.ub_minus[static_cast<size_t>(j)] = side[1] + map.offsets[j];
    out.value = std::max({out.value, out.ub_plus[static_cast<size_t>(j)],
                          out.ub_minus[static_cast<size_t>(j)]});
  }
  if (!out.feasible) out.value = std::numeric_limits<double>::infinity();
  return out;
}

CertifiedMap certify(const RecoveryProblem& prob, int level, int grid_size,
                     const conic::SolveOptions& options) {
  LevelBound lb = lower_bound(prob, level, options);
  const GridBound gb = upper_bound(prob, lb.map, grid_size, options);

  CertifiedMap out;
  out.certificate.lower = lb.value;
  out.certificate.upper = gb.value;
  out.certificate.ratio = certificate_ratio(lb.value, gb.value);
  out.certificate.level_r = lb.level;
  out.certificate.grid_s = grid_size;
  out.certificate.per_component.resize(static_cast<size_t>(prob.num_components));
  out.map = std::move(lb.map);
  for (int j = 0; j < prob.num_components; ++j) {
    auto& pc = out.certificate.per_component[static_cast<size_t>(j)];
    pc.e_lb = out.map.values[j];
    pc.ub_plus = gb.ub_plus[static_cast<size_t>(j)];
    pc.ub_minus = gb.ub_minus[static_cast<size_t>(j)];
    out.map.values[j] = std::max(pc.ub_plus, pc.ub_minus);
  }
  return out;
}

}  // namespace optrec::cosine
