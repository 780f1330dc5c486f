#include "optrec/conic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

namespace optrec::conic {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInf = std::numeric_limits<double>::infinity();

using Eigen::MatrixXd;
using Eigen::VectorXd;

}  // namespace

int svec_size(int side) { return side * (side + 1) / 2; }

Eigen::VectorXd svec(const Eigen::MatrixXd& m) {
  const int p = static_cast<int>(m.rows());
  VectorXd v(svec_size(p));
  int idx = 0;
  for (int j = 0; j < p; ++j)
    for (int i = j; i < p; ++i) {
      v[idx++] = (i == j) ? m(i, j) : kSqrt2 * 0.5 * (m(i, j) + m(j, i));
    }
  return v;
}

Eigen::MatrixXd smat(const Eigen::VectorXd& v, int side) {
  if (v.size() != svec_size(side)) throw std::invalid_argument("smat: packed length does not match side");
  MatrixXd m(side, side);
  int idx = 0;
  for (int j = 0; j < side; ++j)
    for (int i = j; i < side; ++i) {
      const double val = (i == j) ? v[idx] : v[idx] / kSqrt2;
      m(i, j) = val;
      m(j, i) = val;
      ++idx;
    }
  return m;
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iters: return "max_iters";
  }
  return "?";
}

bool check_membership(BlockKind kind, const Eigen::VectorXd& slack, double tol, int side) {
  switch (kind) {
    case BlockKind::nonneg:
      return slack.size() == 0 || slack.minCoeff() >= -tol;
    case BlockKind::second_order: {
      if (slack.size() < 1) return false;
      const double tail = slack.size() > 1 ? slack.tail(slack.size() - 1).norm() : 0.0;
      return slack[0] >= tail - tol;
    }
    case BlockKind::psd: {
      if (side < 1 || slack.size() != svec_size(side)) return false;
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(smat(slack, side), Eigen::EigenvaluesOnly);
      return es.eigenvalues().minCoeff() >= -tol;
    }
  }
  return false;
}

void ConeProgram::check_well_formed() const {
  if (num_vars < 1) throw std::invalid_argument("cone program: num_vars must be >= 1");
  if (objective.size() != num_vars) throw std::invalid_argument("cone program: objective length mismatch");
  if (!objective.allFinite()) throw std::invalid_argument("cone program: non-finite objective");
  if (eq_coeff.rows() != eq_rhs.size()) throw std::invalid_argument("cone program: equality row mismatch");
  if (eq_coeff.rows() > 0 && eq_coeff.cols() != num_vars)
    throw std::invalid_argument("cone program: equality column mismatch");
  if (eq_coeff.size() > 0 && !eq_coeff.allFinite()) throw std::invalid_argument("cone program: non-finite equalities");
  if (eq_rhs.size() > 0 && !eq_rhs.allFinite()) throw std::invalid_argument("cone program: non-finite equality rhs");
  if (blocks.empty()) throw std::invalid_argument("cone program: at least one cone block is required");
  for (const auto& b : blocks) {
    if (b.coeff.rows() != b.offset.size() || b.coeff.cols() != num_vars)
      throw std::invalid_argument("cone program: block shape mismatch");
    if (!b.coeff.allFinite() || !b.offset.allFinite())
      throw std::invalid_argument("cone program: non-finite block data");
    switch (b.kind) {
      case BlockKind::nonneg:
        if (b.dim() < 1) throw std::invalid_argument("cone program: empty nonneg block");
        break;
      case BlockKind::second_order:
        if (b.dim() < 2) throw std::invalid_argument("cone program: second-order block needs dim >= 2");
        break;
      case BlockKind::psd:
        if (b.side < 1 || b.dim() != svec_size(b.side))
          throw std::invalid_argument("cone program: psd block length must be side*(side+1)/2");
        break;
    }
  }
}

std::string ConeProgram::dump() const {
  nlohmann::json j;
  j["num_vars"] = num_vars;
  j["objective"] = std::vector<double>(objective.data(), objective.data() + objective.size());
  nlohmann::json eq;
  eq["rows"] = eq_coeff.rows();
  std::vector<std::vector<double>> erows;
  for (Eigen::Index r = 0; r < eq_coeff.rows(); ++r) {
    std::vector<double> row(static_cast<size_t>(eq_coeff.cols()));
    for (Eigen::Index cidx = 0; cidx < eq_coeff.cols(); ++cidx) row[static_cast<size_t>(cidx)] = eq_coeff(r, cidx);
    erows.push_back(std::move(row));
  }
  eq["coeff"] = erows;
  eq["rhs"] = std::vector<double>(eq_rhs.data(), eq_rhs.data() + eq_rhs.size());
  j["equalities"] = eq;
  nlohmann::json blks = nlohmann::json::array();
  for (const auto& b : blocks) {
    nlohmann::json jb;
    jb["kind"] = b.kind == BlockKind::nonneg ? "nonneg" : (b.kind == BlockKind::second_order ? "second_order" : "psd");
    jb["dim"] = b.dim();
    if (b.kind == BlockKind::psd) jb["side"] = b.side;
    std::vector<std::vector<double>> rows;
    for (Eigen::Index r = 0; r < b.coeff.rows(); ++r) {
      std::vector<double> row(static_cast<size_t>(b.coeff.cols()));
      for (Eigen::Index cidx = 0; cidx < b.coeff.cols(); ++cidx) row[static_cast<size_t>(cidx)] = b.coeff(r, cidx);
      rows.push_back(std::move(row));
    }
    jb["coeff"] = rows;
    jb["offset"] = std::vector<double>(b.offset.data(), b.offset.data() + b.offset.size());
    blks.push_back(jb);
  }
  j["blocks"] = blks;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Solver internals. Internal standard form (all cone rows stacked, orthant
// first, then second-order, then psd):
//
//   minimize c'x  s.t.  A x = b,  G x + s = h,  s in K.
//
// A block with slack map x -> C x + q becomes G rows -C with h segment q.
// The homogeneous self-dual embedding in (x, y, z, s, tau, kappa) is driven
// to a solution or an infeasibility certificate by a Mehrotra-style
// predictor-corrector with Nesterov-Todd scaling.
// ---------------------------------------------------------------------------

namespace {

struct Layout {
  int l = 0;
  std::vector<int> soc_dims, soc_offsets;
  std::vector<int> psd_sides, psd_offsets;
  int total = 0;
  int degree = 0;
};

VectorXd cone_identity(const Layout& lay) {
  VectorXd e = VectorXd::Zero(lay.total);
  e.head(lay.l).setOnes();
  for (size_t i = 0; i < lay.soc_dims.size(); ++i) e[lay.soc_offsets[i]] = 1.0;
  for (size_t i = 0; i < lay.psd_sides.size(); ++i) {
    const int p = lay.psd_sides[i];
    int idx = lay.psd_offsets[i];
    for (int j = 0; j < p; ++j) {
      e[idx] = 1.0;
      idx += p - j;
    }
  }
  return e;
}

double cone_min_eig(const Layout& lay, const VectorXd& u) {
  double m = kInf;
  if (lay.l > 0) m = std::min(m, u.head(lay.l).minCoeff());
  for (size_t i = 0; i < lay.soc_dims.size(); ++i) {
    const int off = lay.soc_offsets[i], d = lay.soc_dims[i];
    m = std::min(m, u[off] - u.segment(off + 1, d - 1).norm());
  }
  for (size_t i = 0; i < lay.psd_sides.size(); ++i) {
    const int p = lay.psd_sides[i];
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(smat(u.segment(lay.psd_offsets[i], svec_size(p)), p),
                                               Eigen::EigenvaluesOnly);
    m = std::min(m, es.eigenvalues().minCoeff());
  }
  return m;
}

VectorXd jordan_prod(const Layout& lay, const VectorXd& a, const VectorXd& b) {
  VectorXd out(lay.total);
  out.head(lay.l) = a.head(lay.l).cwiseProduct(b.head(lay.l));
  for (size_t i = 0; i < lay.soc_dims.size(); ++i) {
    const int off = lay.soc_offsets[i], d = lay.soc_dims[i];
    out[off] = a.segment(off, d).dot(b.segment(off, d));
    out.segment(off + 1, d - 1) =
        a[off] * b.segment(off + 1, d - 1) + b[off] * a.segment(off + 1, d - 1);
  }
  for (size_t i = 0; i < lay.psd_sides.size(); ++i) {
    const int p = lay.psd_sides[i], off = lay.psd_offsets[i], len = svec_size(p);
    const MatrixXd ma = smat(a.segment(off, len), p);
    const MatrixXd mb = smat(b.segment(off, len), p);
    out.segment(off, len) = svec(0.5 * (ma * mb + mb * ma));
  }
  return out;
}

// Solves lambda o u = r in the Jordan algebra of each cone.
VectorXd jordan_div(const Layout& lay, const VectorXd& lambda, const VectorXd& r) {
  VectorXd out(lay.total);
  out.head(lay.l) = r.head(lay.l).cwiseQuotient(lambda.head(lay.l));
  for (size_t i = 0; i < lay.soc_dims.size(); ++i) {
    const int off = lay.soc_offsets[i], d = lay.soc_dims[i];
    const double l0 = lambda[off];
    const auto l1 = lambda.segment(off + 1, d - 1);
    const double r0 = r[off];
    const auto r1 = r.segment(off + 1, d - 1);
    const double det = l0 * l0 - l1.squaredNorm();
    const double u0 = (l0 * r0 - l1.dot(r1)) / det;
    out[off] = u0;
    out.segment(off + 1, d - 1) = (r1 - u0 * l1) / l0;
  }
  for (size_t i = 0; i < lay.psd_sides.size(); ++i) {
    const int p = lay.psd_sides[i], off = lay.psd_offsets[i], len = svec_size(p);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(smat(lambda.segment(off, len), p));
    const MatrixXd& q = es.eigenvectors();
    const VectorXd& w = es.eigenvalues();
    MatrixXd rr = q.transpose() * smat(r.segment(off, len), p) * q;
    for (int a = 0; a < p; ++a)
      for (int b = 0; b < p; ++b) rr(a, b) *= 2.0 / (w[a] + w[b]);
    out.segment(off, len) = svec(q * rr * q.transpose());
  }
  return out;
}

// sup { alpha >= 0 : lambda + alpha * d in cone }, for interior lambda.
double step_to_boundary(const Layout& lay, const VectorXd& lambda, const VectorXd& d) {
  double amax = kInf;
  for (int i = 0; i < lay.l; ++i)
    if (d[i] < 0) amax = std::min(amax, -lambda[i] / d[i]);
  for (size_t i = 0; i < lay.soc_dims.size(); ++i) {
    const int off = lay.soc_offsets[i], dim = lay.soc_dims[i];
    const double l0 = lambda[off], d0 = d[off];
    const auto l1 = lambda.segment(off + 1, dim - 1);
    const auto d1 = d.segment(off + 1, dim - 1);
    const double a2 = d0 * d0 - d1.squaredNorm();
    const double b2 = l0 * d0 - l1.dot(d1);
    const double c2 = l0 * l0 - l1.squaredNorm();
    if (a2 >= 0 && b2 >= 0) continue;
    const double disc = b2 * b2 - a2 * c2;
    if (a2 > 0 && disc < 0) continue;
    const double denom = -b2 + std::sqrt(std::max(disc, 0.0));
    if (denom > 0) amax = std::min(amax, c2 / denom);
  }
  for (size_t i = 0; i < lay.psd_sides.size(); ++i) {
    const int p = lay.psd_sides[i], off = lay.psd_offsets[i], len = svec_size(p);
    Eigen::SelfAdjointEigenSolver<MatrixXd> el(smat(lambda.segment(off, len), p));
    const VectorXd w = el.eigenvalues().cwiseMax(1e-300);
    const MatrixXd t = el.eigenvectors() * w.cwiseSqrt().cwiseInverse().asDiagonal() *
                       el.eigenvectors().transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> em(t * smat(d.segment(off, len), p) * t,
                                               Eigen::EigenvaluesOnly);
    const double mn = em.eigenvalues().minCoeff();
    if (mn < 0) amax = std::min(amax, -1.0 / mn);
  }
  return amax;
}

struct Scaling {
  VectorXd w_orth;  // sqrt(s_i / z_i)
  struct Soc {
    double eta = 1.0;
    VectorXd wbar;
  };
  std::vector<Soc> socs;
  struct Psd {
    MatrixXd r, rinv;
  };
  std::vector<Psd> psds;
  VectorXd lambda;
  bool identity = false;
};

enum class ScaleOp { w, wt, winv, winvt };

// Cholesky-like factor of a symmetric positive definite matrix; falls back
// to an eigenvalue factor with clamped spectrum near the boundary.
MatrixXd psd_factor(const MatrixXd& m) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  const double floor = std::max(es.eigenvalues().maxCoeff(), 1.0) * 1e-14;
  return es.eigenvectors() * es.eigenvalues().cwiseMax(floor).cwiseSqrt().asDiagonal();
}

Scaling identity_scaling(const Layout& lay) {
  Scaling sc;
  sc.identity = true;
  sc.w_orth = VectorXd::Ones(lay.l);
  for (size_t i = 0; i < lay.soc_dims.size(); ++i) {
    Scaling::Soc s;
    s.eta = 1.0;
    s.wbar = VectorXd::Zero(lay.soc_dims[i]);
    s.wbar[0] = 1.0;
    sc.socs.push_back(std::move(s));
  }
  for (size_t i = 0; i < lay.psd_sides.size(); ++i) {
    Scaling::Psd p;
    p.r = MatrixXd::Identity(lay.psd_sides[i], lay.psd_sides[i]);
    p.rinv = p.r;
    sc.psds.push_back(std::move(p));
  }
  sc.lambda = cone_identity(lay);
  return sc;
}

// Nesterov-Todd scaling point for (s, z): W^{-T} s = W z = lambda.
Scaling compute_scaling(const Layout& lay, const VectorXd& s, const VectorXd& z) {
  Scaling sc;
  sc.w_orth = (s.head(lay.l).cwiseQuotient(z.head(lay.l))).cwiseSqrt();
  sc.lambda = VectorXd::Zero(lay.total);
  sc.lambda.head(lay.l) = (s.head(lay.l).cwiseProduct(z.head(lay.l))).cwiseSqrt();
  for (size_t i = 0; i < lay.soc_dims.size(); ++i) {
    const int off = lay.soc_offsets[i], d = lay.soc_dims[i];
    const auto sseg = s.segment(off, d);
    const auto zseg = z.segment(off, d);
    const double snorm1 = sseg.tail(d - 1).norm();
    const double znorm1 = zseg.tail(d - 1).norm();
    const double rho_s = std::sqrt(std::max((sseg[0] - snorm1) * (sseg[0] + snorm1), 1e-300));
    const double rho_z = std::sqrt(std::max((zseg[0] - znorm1) * (zseg[0] + znorm1), 1e-300));
    VectorXd sbar = sseg / rho_s, zbar = zseg / rho_z;
    const double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
    VectorXd wpt = sbar;  // normalized scaling point, det(wpt) = 1
    wpt[0] += zbar[0];
    wpt.tail(d - 1) -= zbar.tail(d - 1);
    wpt /= 2.0 * gamma;
    Scaling::Soc sb;
    // Householder vector is the Jordan square root of the scaling point,
    // so that (2 wbar wbar' - J)^2 maps zbar to sbar.
    sb.wbar = wpt;
    sb.wbar[0] += 1.0;
    sb.wbar /= std::sqrt(2.0 * (wpt[0] + 1.0));
    sb.eta = std::sqrt(rho_s / rho_z);
    // lambda = W z = eta * (2 wbar (wbar' z) - J z)
    const double alpha = sb.wbar.dot(zseg);
    VectorXd lam = 2.0 * alpha * sb.wbar;
    lam[0] -= zseg[0];
    lam.tail(d - 1) += zseg.tail(d - 1);
    sc.lambda.segment(off, d) = sb.eta * lam;
    sc.socs.push_back(std::move(sb));
  }
  for (size_t i = 0; i < lay.psd_sides.size(); ++i) {
    const int p = lay.psd_sides[i], off = lay.psd_offsets[i], len = svec_size(p);
    const MatrixXd ls = psd_factor(smat(s.segment(off, len), p));
    const MatrixXd lz = psd_factor(smat(z.segment(off, len), p));
    Eigen::JacobiSVD<MatrixXd> svd(lz.transpose() * ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const VectorXd sig = svd.singularValues().cwiseMax(1e-300);
    const VectorXd isq = sig.cwiseSqrt().cwiseInverse();
    Scaling::Psd pb;
    pb.r = ls * svd.matrixV() * isq.asDiagonal();
    pb.rinv = isq.asDiagonal() * svd.matrixU().transpose() * lz.transpose();
    sc.psds.push_back(std::move(pb));
    sc.lambda.segment(off, len) = svec(MatrixXd(sig.asDiagonal()));
  }
  return sc;
}

VectorXd apply_scaling(const Layout& lay, const Scaling& sc, ScaleOp op, const VectorXd& u) {
  VectorXd out(lay.total);
  if (op == ScaleOp::w || op == ScaleOp::wt)
    out.head(lay.l) = u.head(lay.l).cwiseProduct(sc.w_orth);
  else
    out.head(lay.l) = u.head(lay.l).cwiseQuotient(sc.w_orth);
  for (size_t i = 0; i < lay.soc_dims.size(); ++i) {
    const int off = lay.soc_offsets[i], d = lay.soc_dims[i];
    const auto& sb = sc.socs[i];
    const auto useg = u.segment(off, d);
    if (op == ScaleOp::w || op == ScaleOp::wt) {
      // W u = eta (2 wbar (wbar' u) - J u)
      const double alpha = sb.wbar.dot(useg);
      VectorXd v = 2.0 * alpha * sb.wbar;
      v[0] -= useg[0];
      v.tail(d - 1) += useg.tail(d - 1);
      out.segment(off, d) = sb.eta * v;
    } else {
      // W^{-1} u = (1/eta) (2 (J wbar) (wbar' J u) - J u)
      VectorXd ju = useg;
      ju.tail(d - 1) = -ju.tail(d - 1);
      const double alpha = sb.wbar.dot(ju);
      VectorXd v = 2.0 * alpha * sb.wbar;
      v[0] -= ju[0];
      v.tail(d - 1) += ju.tail(d - 1);
      // v = H (J u); J v:
      v.tail(d - 1) = -v.tail(d - 1);
      out.segment(off, d) = v / sb.eta;
    }
  }
  for (size_t i = 0; i < lay.psd_sides.size(); ++i) {
    const int p = lay.psd_sides[i], off = lay.psd_offsets[i], len = svec_size(p);
    const auto& pb = sc.psds[i];
    const MatrixXd m = smat(u.segment(off, len), p);
    MatrixXd res;
    switch (op) {
      case ScaleOp::w: res = pb.r.transpose() * m * pb.r; break;
      case ScaleOp::wt: res = pb.r * m * pb.r.transpose(); break;
      case ScaleOp::winv: res = pb.rinv.transpose() * m * pb.rinv; break;
      case ScaleOp::winvt: res = pb.rinv * m * pb.rinv.transpose(); break;
    }
    out.segment(off, len) = svec(res);
  }
  return out;
}

struct Direction {
  VectorXd dx, dy, dz, ds;
  double dtau = 0.0, dkappa = 0.0;
  VectorXd ds_scaled, dz_scaled;
};

struct Internal {
  int n = 0, p = 0;
  VectorXd c, b, h;
  MatrixXd a, g;
  Layout lay;
  std::vector<int> block_internal_offset;  // aligned with program.blocks
  // Nonzero pattern of g, extracted once for orthant-only programs; their
  // cone rows touch few variables each and the normal matrix is cheap to
  // accumulate row by row.
  std::vector<std::vector<std::pair<int, double>>> g_rows;
};

// KKT system with the scaled cone term:
//   [ 0  A'  G'      ] [ux]   [bx]
//   [ A  0   0       ] [uy] = [by]
//   [ G  0   -W'W    ] [uz]   [bz]
//
// The cone block is eliminated first: H = G' (W'W)^{-1} G gets a Cholesky
// factor of size n and a small Schur complement over the equality rows.
// Elimination squares the conditioning of the scaling, so every solve is
// polished by iterative refinement against the full residual above; when
// refinement cannot reach tolerance (degenerate optimal faces make H
// singular), the solver falls back to a rank-revealing factorization of the
// full augmented matrix, whose min-norm solution stays exact on singular
// but consistent systems.
class KktSolver {
 public:
  KktSolver(const Internal& in, const Scaling& sc) : in_(in), sc_(sc) {
    if (!build_fast_path()) {
      fast_ = false;
      ensure_dense();
    }
  }

  bool solve3(const VectorXd& bx, const VectorXd& by, const VectorXd& bz, VectorXd& ux, VectorXd& uy,
              VectorXd& uz) const {
    double scale = 1.0 + bx.cwiseAbs().maxCoeff();
    if (in_.p) scale = std::max(scale, 1.0 + by.cwiseAbs().maxCoeff());
    scale = std::max(scale, 1.0 + bz.cwiseAbs().maxCoeff());

    double res = scale;
    if (fast_) res = refine(true, bx, by, bz, scale, ux, uy, uz);
    if (!fast_ || res > 1e-6 * scale) {
      ensure_dense();
      VectorXd cx, cy, cz;
      const double cres = refine(false, bx, by, bz, scale, cx, cy, cz);
      if (!fast_ || cres < res) {
        ux = cx;
        uy = cy;
        uz = cz;
      }
    }
    return ux.allFinite() && uy.allFinite() && uz.allFinite();
  }

 private:
  // Iterative refinement with a divergence guard: keeps the best iterate
  // seen, measured against the full augmented residual.
  double refine(bool use_fast, const VectorXd& bx, const VectorXd& by, const VectorXd& bz,
                double scale, VectorXd& outx, VectorXd& outy, VectorXd& outz) const {
    const int n = in_.n, p = in_.p, t = in_.lay.total;
    VectorXd ux = VectorXd::Zero(n), uy = VectorXd::Zero(p), uz = VectorXd::Zero(t);
    outx = ux;
    outy = uy;
    outz = uz;
    double best_res = scale;
    VectorXd rx = bx, ry = by, rz = bz;
    for (int round = 0; round < 6; ++round) {
      VectorXd dx, dy, dz;
      if (!solve_once(use_fast, rx, ry, rz, dx, dy, dz) || !dx.allFinite() || !dz.allFinite() ||
          (p && !dy.allFinite()))
        break;
      ux += dx;
      if (p) uy += dy;
      uz += dz;
      rx = bx - in_.g.transpose() * uz;
      if (p) {
        rx -= in_.a.transpose() * uy;
        ry = by - in_.a * ux;
      }
      rz = bz - in_.g * ux + apply_scaling(in_.lay, sc_, ScaleOp::wt,
                                           apply_scaling(in_.lay, sc_, ScaleOp::w, uz));
      double res = std::max(rx.cwiseAbs().maxCoeff(), rz.cwiseAbs().maxCoeff());
      if (p) res = std::max(res, ry.cwiseAbs().maxCoeff());
      if (res < best_res) {
        best_res = res;
        outx = ux;
        outy = uy;
        outz = uz;
      }
      if (res <= 1e-13 * scale || res > 2.0 * best_res) break;
    }
    return best_res;
  }

  bool build_fast_path() {
    const int n = in_.n, p = in_.p, t = in_.lay.total;
    const bool orthant_only = in_.lay.soc_dims.empty() && in_.lay.psd_sides.empty();
    MatrixXd hmat;
    if (orthant_only) {
      dinv2_ = sc_.w_orth.array().square().inverse();
      if (!dinv2_.allFinite()) return false;
      size_t scatter_cost = 0;
      for (const auto& row : in_.g_rows) scatter_cost += row.size() * row.size();
      if (in_.g_rows.size() == static_cast<size_t>(t) &&
          scatter_cost * 4 < static_cast<size_t>(t) * static_cast<size_t>(n)) {
        hmat = MatrixXd::Zero(n, n);
        for (int r = 0; r < t; ++r) {
          const double d = dinv2_[r];
          for (const auto& [i, vi] : in_.g_rows[static_cast<size_t>(r)])
            for (const auto& [j, vj] : in_.g_rows[static_cast<size_t>(r)]) hmat(i, j) += d * vi * vj;
        }
      } else {
        hmat.noalias() = in_.g.transpose() * (dinv2_.matrix().asDiagonal() * in_.g);
      }
    } else {
      MatrixXd zmat(t, n);
      for (int c = 0; c < n; ++c)
        zmat.col(c) = apply_scaling(in_.lay, sc_, ScaleOp::winv,
                                    apply_scaling(in_.lay, sc_, ScaleOp::winvt, in_.g.col(c)));
      if (!zmat.allFinite()) return false;
      hmat.noalias() = in_.g.transpose() * zmat;
    }
    llt_h_.compute(hmat);
    if (llt_h_.info() != Eigen::Success) return false;
    if (p > 0) {
      ainvh_ = llt_h_.solve(in_.a.transpose());
      llt_s_.compute(in_.a * ainvh_);
      if (llt_s_.info() != Eigen::Success) return false;
    }
    return true;
  }

  void ensure_dense() const {
    if (dense_built_) return;
    dense_built_ = true;
    const int n = in_.n, p = in_.p, t = in_.lay.total;
    m_ = MatrixXd::Zero(n + p + t, n + p + t);
    if (p > 0) {
      m_.block(0, n, n, p) = in_.a.transpose();
      m_.block(n, 0, p, n) = in_.a;
    }
    m_.block(0, n + p, n, t) = in_.g.transpose();
    m_.block(n + p, 0, t, n) = in_.g;
    // -W'W, assembled blockwise
    for (int i = 0; i < in_.lay.l; ++i)
      m_(n + p + i, n + p + i) = -sc_.w_orth[i] * sc_.w_orth[i];
    for (size_t k = 0; k < in_.lay.soc_dims.size(); ++k) {
      const int off = n + p + in_.lay.soc_offsets[k], d = in_.lay.soc_dims[k];
      const VectorXd& wb = sc_.socs[k].wbar;
      const double e2 = sc_.socs[k].eta * sc_.socs[k].eta;
      // (eta (2 wbar wbar' - J))^2 with J wbar-norm 1: expand directly
      MatrixXd blk = 4.0 * wb * wb.transpose() * wb.squaredNorm();
      MatrixXd jwb = wb;
      jwb.bottomRows(d - 1) = -jwb.bottomRows(d - 1);
      blk -= 2.0 * wb * jwb.transpose();
      blk -= 2.0 * jwb * wb.transpose();
      blk += MatrixXd::Identity(d, d);
      m_.block(off, off, d, d) = -e2 * blk;
    }
    for (size_t k = 0; k < in_.lay.psd_sides.size(); ++k) {
      const int side = in_.lay.psd_sides[k], len = svec_size(side);
      const int off = n + p + in_.lay.psd_offsets[k];
      const MatrixXd pmat = sc_.psds[k].r * sc_.psds[k].r.transpose();
      MatrixXd blk(len, len);
      VectorXd unit = VectorXd::Zero(len);
      for (int col = 0; col < len; ++col) {
        unit[col] = 1.0;
        blk.col(col) = svec(pmat * smat(unit, side) * pmat);
        unit[col] = 0.0;
      }
      m_.block(off, off, len, len) = -blk;
    }
    // Rank-revealing factorization: the matrix is singular whenever the
    // optimal map is not unique (the cone and equality rows then fail to
    // span the variable space), yet the Newton systems stay consistent, so
    // the min-norm solution is exact and picks a canonical representative.
    cod_.compute(m_);
  }

  bool solve_once(bool use_fast, const VectorXd& bx, const VectorXd& by, const VectorXd& bz,
                  VectorXd& ux, VectorXd& uy, VectorXd& uz) const {
    const int p = in_.p;
    if (use_fast) {
      const VectorXd wbz = apply_scaling(in_.lay, sc_, ScaleOp::winv,
                                         apply_scaling(in_.lay, sc_, ScaleOp::winvt, bz));
      const VectorXd rx = bx + in_.g.transpose() * wbz;
      ux = llt_h_.solve(rx);
      if (p > 0) {
        uy = llt_s_.solve(in_.a * ux - by);
        ux -= ainvh_ * uy;
      } else {
        uy = VectorXd::Zero(0);
      }
      uz = apply_scaling(in_.lay, sc_, ScaleOp::winv,
                         apply_scaling(in_.lay, sc_, ScaleOp::winvt, in_.g * ux - bz));
      return true;
    }
    const int n = in_.n, t = in_.lay.total;
    VectorXd rhs(n + p + t);
    rhs.head(n) = bx;
    if (p) rhs.segment(n, p) = by;
    rhs.tail(t) = bz;
    const VectorXd sol = cod_.solve(rhs);
    if (!sol.allFinite()) return false;
    ux = sol.head(n);
    uy = p ? VectorXd(sol.segment(n, p)) : VectorXd::Zero(0);
    uz = sol.tail(t);
    return true;
  }

  const Internal& in_;
  const Scaling& sc_;
  bool fast_ = true;
  Eigen::ArrayXd dinv2_;
  Eigen::LDLT<MatrixXd> llt_h_, llt_s_;
  MatrixXd ainvh_;
  mutable bool dense_built_ = false;
  mutable MatrixXd m_;
  mutable Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod_;
};

struct Residuals {
  VectorXd rx, ry, rz;
  double rtau = 0.0;
};

}  // namespace

ConeSolution solve(const ConeProgram& program, const SolveOptions& options) {
  program.check_well_formed();

  Internal in;
  in.n = program.num_vars;
  in.c = program.objective;

  // Equality presolve: reject inconsistent systems, drop dependent rows.
  {
    const MatrixXd& e = program.eq_coeff;
    const VectorXd& gv = program.eq_rhs;
    if (e.rows() > 0) {
      Eigen::ColPivHouseholderQR<MatrixXd> qr(e);
      qr.setThreshold(1e-10);
      const VectorXd xls = qr.solve(gv);
      if (((e * xls - gv).cwiseAbs().maxCoeff()) > 1e-9 * (1.0 + gv.cwiseAbs().maxCoeff())) {
        ConeSolution sol;
        sol.status = SolveStatus::infeasible;
        sol.objective_value = std::numeric_limits<double>::quiet_NaN();
        return sol;
      }
      Eigen::ColPivHouseholderQR<MatrixXd> qrt(e.transpose());
      qrt.setThreshold(1e-10);
      const int rank = static_cast<int>(qrt.rank());
      std::vector<int> keep(qrt.colsPermutation().indices().data(),
                            qrt.colsPermutation().indices().data() + rank);
      std::sort(keep.begin(), keep.end());
      in.p = rank;
      in.a.resize(rank, in.n);
      in.b.resize(rank);
      for (int r = 0; r < rank; ++r) {
        in.a.row(r) = e.row(keep[static_cast<size_t>(r)]);
        in.b[r] = gv[keep[static_cast<size_t>(r)]];
      }
    } else {
      in.p = 0;
      in.a.resize(0, in.n);
      in.b.resize(0);
    }
  }

  // Stack cone rows: orthant first, then second-order, then psd.
  {
    int total = 0;
    for (const auto& blk : program.blocks)
      if (blk.kind == BlockKind::nonneg) total += blk.dim();
    in.lay.l = total;
    for (const auto& blk : program.blocks)
      if (blk.kind == BlockKind::second_order) {
        in.lay.soc_offsets.push_back(total);
        in.lay.soc_dims.push_back(blk.dim());
        total += blk.dim();
      }
    for (const auto& blk : program.blocks)
      if (blk.kind == BlockKind::psd) {
        in.lay.psd_offsets.push_back(total);
        in.lay.psd_sides.push_back(blk.side);
        total += blk.dim();
      }
    in.lay.total = total;
    in.lay.degree = in.lay.l + static_cast<int>(in.lay.soc_dims.size());
    for (int side : in.lay.psd_sides) in.lay.degree += side;

    in.g.resize(total, in.n);
    in.h.resize(total);
    in.block_internal_offset.assign(program.blocks.size(), 0);
    int pos_orth = 0, pos_soc = in.lay.l, pos_psd = in.lay.l;
    for (int d : in.lay.soc_dims) pos_psd += d;
    for (size_t k = 0; k < program.blocks.size(); ++k) {
      const auto& blk = program.blocks[k];
      int& pos = blk.kind == BlockKind::nonneg ? pos_orth
                : blk.kind == BlockKind::second_order ? pos_soc
                                                      : pos_psd;
      in.block_internal_offset[k] = pos;
      in.g.middleRows(pos, blk.dim()) = -blk.coeff;
      in.h.segment(pos, blk.dim()) = blk.offset;
      pos += blk.dim();
    }
    if (in.lay.soc_dims.empty() && in.lay.psd_sides.empty()) {
      in.g_rows.resize(static_cast<size_t>(total));
      for (int r = 0; r < total; ++r)
        for (int col = 0; col < in.n; ++col)
          if (in.g(r, col) != 0.0) in.g_rows[static_cast<size_t>(r)].emplace_back(col, in.g(r, col));
    }
  }

  const Layout& lay = in.lay;
  const VectorXd e = cone_identity(lay);
  const double nb = 1.0 + (in.p ? in.b.norm() : 0.0);
  const double nh = 1.0 + in.h.norm();
  const double nc = 1.0 + in.c.norm();

  ConeSolution sol;
  sol.primal = VectorXd::Zero(in.n);
  sol.cone_dual = VectorXd::Zero(lay.total);
  sol.eq_dual = VectorXd::Zero(program.eq_coeff.rows());

  VectorXd x, y, s, z;
  double tau = 1.0, kappa = 1.0;

  {  // initial point from two least-norm solves with identity scaling
    const Scaling sc0 = identity_scaling(lay);
    const KktSolver kkt(in, sc0);
    VectorXd uy, uz;
    if (!kkt.solve3(VectorXd::Zero(in.n), in.b, in.h, x, uy, uz)) {
      sol.status = SolveStatus::max_iters;
      return sol;
    }
    s = -uz;
    const double smin = cone_min_eig(lay, s);
    if (smin <= 1e-8 * std::max(1.0, s.cwiseAbs().maxCoeff())) s += (1.0 - smin) * e;
    VectorXd x2;
    if (!kkt.solve3(-in.c, VectorXd::Zero(in.p), VectorXd::Zero(lay.total), x2, y, z)) {
      sol.status = SolveStatus::max_iters;
      return sol;
    }
    const double zmin = cone_min_eig(lay, z);
    if (zmin <= 1e-8 * std::max(1.0, z.cwiseAbs().maxCoeff())) z += (1.0 - zmin) * e;
  }

  auto dehomogenize = [&](SolveStatus status) {
    sol.status = status;
    sol.primal = x / tau;
    // cone_dual back in original block order
    {
      int orig = 0;
      VectorXd out(lay.total);
      for (size_t k = 0; k < program.blocks.size(); ++k) {
        const int dim = program.blocks[k].dim();
        out.segment(orig, dim) = z.segment(in.block_internal_offset[k], dim) / tau;
        orig += dim;
      }
      sol.cone_dual = out;
    }
    sol.eq_dual.setZero();
    // y corresponds to the kept equality rows; dropped rows get multiplier 0.
    // (Row selection is recomputed here to avoid carrying the index list out.)
    if (in.p > 0) {
      Eigen::ColPivHouseholderQR<MatrixXd> qrt(program.eq_coeff.transpose());
      qrt.setThreshold(1e-10);
      std::vector<int> keep(qrt.colsPermutation().indices().data(),
                            qrt.colsPermutation().indices().data() + in.p);
      std::sort(keep.begin(), keep.end());
      for (int r = 0; r < in.p; ++r) sol.eq_dual[keep[static_cast<size_t>(r)]] = y[r] / tau;
    }
    sol.objective_value = in.c.dot(x) / tau;
    sol.dual_objective = -(in.h.dot(z) + (in.p ? in.b.dot(y) : 0.0)) / tau;
    sol.gap = s.dot(z) / (tau * tau);
  };

  int stall = 0;
  for (int iter = 0; iter <= options.max_iters; ++iter) {
    sol.iterations = iter;

    Residuals res;
    res.rx = in.g.transpose() * z + in.c * tau;
    if (in.p) res.rx += in.a.transpose() * y;
    res.ry = in.p ? VectorXd(-in.a * x + in.b * tau) : VectorXd();
    res.rz = s + in.g * x - in.h * tau;
    res.rtau = kappa + in.c.dot(x) + (in.p ? in.b.dot(y) : 0.0) + in.h.dot(z);

    const double sz = s.dot(z);
    const double mu = (sz + tau * kappa) / (lay.degree + 1);

    const double pcost = in.c.dot(x) / tau;
    const double gap = sz / (tau * tau);
    const double relgap = gap / std::max(1.0, std::abs(pcost));
    const double pres =
        std::max((in.p ? res.ry.norm() : 0.0) / tau / nb, res.rz.norm() / tau / nh);
    const double dres = res.rx.norm() / tau / nc;

    if (options.verbose)
      std::printf("iter %3d  pcost % .6e  gap %.3e  pres %.3e  dres %.3e  tau %.3e  kappa %.3e\n",
                  iter, pcost, gap, pres, dres, tau, kappa);

    if (pres <= options.feastol && dres <= options.feastol &&
        (gap <= options.abstol || relgap <= options.reltol)) {
      dehomogenize(SolveStatus::optimal);
      return sol;
    }
    const double hzby = in.h.dot(z) + (in.p ? in.b.dot(y) : 0.0);
    if (hzby < 0) {
      VectorXd dres_vec = in.g.transpose() * z;
      if (in.p) dres_vec += in.a.transpose() * y;
      if (dres_vec.norm() / nc / (-hzby) <= options.feastol) {
        sol.status = SolveStatus::infeasible;
        sol.cone_dual.setZero();
        int orig = 0;
        for (size_t k = 0; k < program.blocks.size(); ++k) {
          const int dim = program.blocks[k].dim();
          sol.cone_dual.segment(orig, dim) = z.segment(in.block_internal_offset[k], dim) / (-hzby);
          orig += dim;
        }
        sol.objective_value = std::numeric_limits<double>::quiet_NaN();
        sol.dual_objective = std::numeric_limits<double>::quiet_NaN();
        return sol;
      }
    }
    const double cx = in.c.dot(x);
    if (cx < 0) {
      const double dinf =
          std::max((in.p ? (in.a * x).norm() : 0.0) / nb, (in.g * x + s).norm() / nh) / (-cx);
      if (dinf <= options.feastol) {
        sol.status = SolveStatus::unbounded;
        sol.primal = x / (-cx);
        sol.objective_value = -std::numeric_limits<double>::infinity();
        sol.dual_objective = std::numeric_limits<double>::quiet_NaN();
        return sol;
      }
    }
    if (iter == options.max_iters) break;

    const Scaling sc = compute_scaling(lay, s, z);
    const KktSolver kkt(in, sc);

    VectorXd x1, y1, z1;
    if (!kkt.solve3(-in.c, in.b, in.h, x1, y1, z1)) break;
    const double den =
        in.c.dot(x1) + (in.p ? in.b.dot(y1) : 0.0) + in.h.dot(z1) - kappa / tau;
    if (!std::isfinite(den) || std::abs(den) < 1e-300) break;

    const VectorXd lamlam = jordan_prod(lay, sc.lambda, sc.lambda);

    auto direction = [&](double sigma, const VectorXd& bs, double bkappa, Direction& dir) -> bool {
      const double f = 1.0 - sigma;
      const VectorXd q = jordan_div(lay, sc.lambda, bs);
      const VectorXd bz3 = -f * res.rz - apply_scaling(lay, sc, ScaleOp::wt, q);
      VectorXd x2, y2, z2;
      if (!kkt.solve3(-f * res.rx, in.p ? VectorXd(f * res.ry) : VectorXd(), bz3, x2, y2, z2))
        return false;
      dir.dtau = (-f * res.rtau - bkappa / tau -
                  (in.c.dot(x2) + (in.p ? in.b.dot(y2) : 0.0) + in.h.dot(z2))) /
                 den;
      dir.dx = x2 + dir.dtau * x1;
      dir.dy = in.p ? VectorXd(y2 + dir.dtau * y1) : VectorXd();
      dir.dz = z2 + dir.dtau * z1;
      dir.dz_scaled = apply_scaling(lay, sc, ScaleOp::w, dir.dz);
      dir.ds_scaled = q - dir.dz_scaled;
      dir.ds = apply_scaling(lay, sc, ScaleOp::wt, dir.ds_scaled);
      dir.dkappa = (bkappa - kappa * dir.dtau) / tau;
      return dir.dx.allFinite() && dir.dz.allFinite() && std::isfinite(dir.dtau);
    };

    auto max_step = [&](const Direction& dir) {
      double a = std::min(step_to_boundary(lay, sc.lambda, dir.ds_scaled),
                          step_to_boundary(lay, sc.lambda, dir.dz_scaled));
      if (dir.dtau < 0) a = std::min(a, -tau / dir.dtau);
      if (dir.dkappa < 0) a = std::min(a, -kappa / dir.dkappa);
      return a;
    };

    Direction aff;
    if (!direction(0.0, -lamlam, -tau * kappa, aff)) break;
    const double astep = std::min(1.0, max_step(aff));
    const double sigma = std::pow(1.0 - astep, 3.0);

    Direction dir;
    const VectorXd bs_comb =
        -lamlam + sigma * mu * e - jordan_prod(lay, aff.ds_scaled, aff.dz_scaled);
    const double bk_comb = -tau * kappa + sigma * mu - aff.dtau * aff.dkappa;
    if (!direction(sigma, bs_comb, bk_comb, dir)) break;

    const double amax = max_step(dir);
    const double step = std::min(1.0, 0.99 * amax);
    if (step < 1e-10) {
      if (++stall >= 2) break;
    } else {
      stall = 0;
    }

    x += step * dir.dx;
    if (in.p) y += step * dir.dy;
    z += step * dir.dz;
    s += step * dir.ds;
    tau += step * dir.dtau;
    kappa += step * dir.dkappa;
    if (!(tau > 0) || !(kappa > 0) || !x.allFinite()) break;
  }

  dehomogenize(SolveStatus::max_iters);
  return sol;
}

}  // namespace optrec::conic
