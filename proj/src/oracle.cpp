#include "optrec/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "optrec/cosine.hpp"
#include "optrec/rkhs.hpp"

namespace optrec::oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr int kCheckGridSize = 10000;
constexpr int kCoarseGridSize = 64;  // strided subset of the check grid
constexpr int kResidualDegree = 6;
constexpr std::int64_t kAttemptBudget = 1000000;

const CosinePoly& as_cosine(const BasisFunction& f, const char* where) {
  const CosinePoly* p = std::get_if<CosinePoly>(&f);
  if (!p) throw std::invalid_argument(std::string(where) + ": expected a cosine polynomial");
  return *p;
}

const AnchoredFunction& as_anchored(const BasisFunction& f, const char* where) {
  const AnchoredFunction* p = std::get_if<AnchoredFunction>(&f);
  if (!p) throw std::invalid_argument(std::string(where) + ": expected a kernel combination");
  return *p;
}

double eval_anchored(const Kernel& ker, const AnchoredFunction& f, double x) {
  double v = 0.0;
  for (size_t i = 0; i < f.anchors.size(); ++i) v += f.weights[i] * ker.eval(f.anchors[i], x);
  return v;
}

/// Distance of f to span(basis) in the kernel norm, computed over the joint
/// anchor set. Representation independent, so it audits samples without the
/// reduced space they were drawn in.
double anchored_distance(const Kernel& ker, const AnchoredFunction& f,
                         const std::vector<BasisFunction>& basis) {
  std::vector<double> anchors = f.anchors;
  std::vector<std::pair<int, const AnchoredFunction*>> starts;
  for (const auto& b : basis) {
    const AnchoredFunction& g = as_anchored(b, "model set basis");
    starts.emplace_back(static_cast<int>(anchors.size()), &g);
    anchors.insert(anchors.end(), g.anchors.begin(), g.anchors.end());
  }
  const int t = static_cast<int>(anchors.size());
  MatrixXd gram(t, t);
  for (int i = 0; i < t; ++i)
    for (int k = 0; k <= i; ++k) gram(i, k) = gram(k, i) = ker.eval(anchors[i], anchors[k]);
  VectorXd cf = VectorXd::Zero(t);
  for (size_t i = 0; i < f.anchors.size(); ++i) cf[static_cast<int>(i)] = f.weights[i];
  const int kn = static_cast<int>(basis.size());
  if (kn == 0) return std::sqrt(std::max(0.0, cf.dot(gram * cf)));
  MatrixXd b = MatrixXd::Zero(t, kn);
  for (int k = 0; k < kn; ++k) {
    const auto& [at, g] = starts[static_cast<size_t>(k)];
    for (size_t i = 0; i < g->weights.size(); ++i) b(at + static_cast<int>(i), k) = g->weights[i];
  }
  const VectorXd alpha = Eigen::LDLT<MatrixXd>(b.transpose() * gram * b)
                             .solve(b.transpose() * (gram * cf));
  const VectorXd res = cf - b * alpha;
  return std::sqrt(std::max(0.0, res.dot(gram * res)));
}

std::vector<double> problem_points(const RecoveryProblem& prob) {
  std::vector<double> pts{prob.points.new_point};
  pts.insert(pts.end(), prob.points.old_points.begin(), prob.points.old_points.end());
  return pts;
}

void require_valid(const RecoveryProblem& prob) {
  const ValidationResult v = validate_problem(prob);
  if (!v.ok()) throw std::invalid_argument("invalid problem: " + v.errors.front());
}

// ---------------------------------------------------------------------------
// cosine setting: components are coefficient vectors over a shared padding

/// Fine-grid checks shared by the sampler (precomputed trigonometric
/// matrices) and the public audit: residual sup-norm within the width,
/// nonnegativity where flagged, dependence rows at the problem points.
std::vector<std::string> cosine_violations(const RecoveryProblem& prob,
                                           const std::vector<VectorXd>& full,
                                           const std::vector<VectorXd>& resid,
                                           const MatrixXd& fine, const MatrixXd& point_vecs,
                                           const std::vector<VectorXd>& rhs_coeffs) {
  std::vector<std::string> bad;
  const int nn = prob.num_components;
  for (int n = 0; n < nn; ++n) {
    const ModelSetSpec& ms = prob.model_sets[static_cast<size_t>(n)];
    if ((fine * resid[static_cast<size_t>(n)]).cwiseAbs().maxCoeff() > ms.epsilon + 1e-6)
      bad.push_back("component " + std::to_string(n + 1) + " leaves its model set");
    if (ms.nonneg && (fine * full[static_cast<size_t>(n)]).minCoeff() < -1e-9)
      bad.push_back("component " + std::to_string(n + 1) + " is negative on the check grid");
  }
  const MatrixXd& dep = prob.dependence.coefficients;
  for (int l = 0; l < prob.dependence.count(); ++l)
    for (int p = 0; p < point_vecs.rows(); ++p) {
      double lhs = 0.0;
      for (int n = 0; n < nn; ++n)
        lhs += dep(l, n) * point_vecs.row(p).dot(full[static_cast<size_t>(n)]);
      if (std::abs(lhs - point_vecs.row(p).dot(rhs_coeffs[static_cast<size_t>(l)])) > 1e-9)
        bad.push_back("dependence row " + std::to_string(l + 1) +
                      " violated at a problem point");
    }
  return bad;
}

VectorXd padded_coeffs(const CosinePoly& p, int dim) {
  VectorXd c = VectorXd::Zero(dim);
  const size_t lim = std::min(p.coeffs.size(), static_cast<size_t>(dim));
  for (size_t k = 0; k < lim; ++k) c[static_cast<int>(k)] = p.coeffs[k];
  return c;
}

MatrixXd trig_rows(const std::vector<double>& xs, int dim) {
  MatrixXd m(static_cast<int>(xs.size()), dim);
  for (int i = 0; i < m.rows(); ++i)
    for (int k = 0; k < dim; ++k) m(i, k) = std::cos(k * xs[static_cast<size_t>(i)]);
  return m;
}

struct CosineSampler {
  const RecoveryProblem& prob;
  int nn, mm, ll, nfree = 0, dim = 0;
  std::vector<std::vector<VectorXd>> basis_coeffs;  // per component
  std::vector<VectorXd> rhs_coeffs;
  MatrixXd fine, coarse, point_vecs;
  std::vector<Eigen::ColPivHouseholderQR<MatrixXd>> split_qr;  // per component
  bool solve_last = false;
  Eigen::FullPivLU<MatrixXd> last_lu;

  explicit CosineSampler(const RecoveryProblem& p)
      : prob(p), nn(p.num_components), mm(p.points.count()), ll(p.dependence.count()) {
    int deg = kResidualDegree;
    for (const auto& ms : prob.model_sets)
      for (const auto& f : ms.basis) deg = std::max(deg, as_cosine(f, "model set basis").degree());
    for (const auto& f : prob.dependence.rhs)
      deg = std::max(deg, as_cosine(f, "dependence rhs").degree());
    dim = deg + 1;

    std::vector<double> grid(kCheckGridSize), sub(kCoarseGridSize);
    const double lo = prob.domain[0], hi = prob.domain[1];
    for (int i = 0; i < kCheckGridSize; ++i)
      grid[static_cast<size_t>(i)] = lo + (hi - lo) * i / (kCheckGridSize - 1);
    for (int i = 0; i < kCoarseGridSize; ++i)
      sub[static_cast<size_t>(i)] =
          grid[static_cast<size_t>(i * (kCheckGridSize - 1) / (kCoarseGridSize - 1))];
    fine = trig_rows(grid, dim);
    coarse = trig_rows(sub, dim);
    point_vecs = trig_rows(problem_points(prob), dim);

    basis_coeffs.resize(static_cast<size_t>(nn));
    for (int n = 0; n < nn; ++n) {
      MatrixXd cb(kCoarseGridSize, prob.model_sets[static_cast<size_t>(n)].basis.size());
      int k = 0;
      for (const auto& f : prob.model_sets[static_cast<size_t>(n)].basis) {
        basis_coeffs[static_cast<size_t>(n)].push_back(
            padded_coeffs(as_cosine(f, "model set basis"), dim));
        cb.col(k++) = coarse * basis_coeffs[static_cast<size_t>(n)].back();
      }
      split_qr.emplace_back(cb);
    }
    for (const auto& f : prob.dependence.rhs)
      rhs_coeffs.push_back(padded_coeffs(as_cosine(f, "dependence rhs"), dim));

    if (ll > 0 && ll <= nn) {
      last_lu.compute(prob.dependence.coefficients.rightCols(ll));
      solve_last = last_lu.isInvertible();
    }
    nfree = solve_last ? nn - ll : nn;
  }

  bool attempt(std::mt19937_64& rng, SampledFunction& out) const {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<VectorXd> full(static_cast<size_t>(nn)), resid(static_cast<size_t>(nn)),
        span(static_cast<size_t>(nn));
    for (int n = 0; n < nfree; ++n) {
      const auto& bc = basis_coeffs[static_cast<size_t>(n)];
      const int kn = static_cast<int>(bc.size());
      VectorXd c = VectorXd::Zero(dim);
      span[static_cast<size_t>(n)].resize(kn);
      for (int k = 0; k < kn; ++k) {
        const double a = unif(rng);
        span[static_cast<size_t>(n)][k] = a;
        c += a * bc[static_cast<size_t>(k)];
      }
      // coefficient l1 norm bounds the sup norm, keeping the draw cheap
      VectorXd g = VectorXd::Zero(dim);
      for (int k = 0; k <= kResidualDegree; ++k) g[k] = unif(rng);
      const double rad = unit(rng) * prob.model_sets[static_cast<size_t>(n)].epsilon;
      const double l1 = g.lpNorm<1>();
      g *= l1 > 0.0 ? rad / l1 : 0.0;
      resid[static_cast<size_t>(n)] = g;
      full[static_cast<size_t>(n)] = c + g;
    }
    if (solve_last) {
      const MatrixXd& dep = prob.dependence.coefficients;
      MatrixXd w(ll, dim);
      for (int l = 0; l < ll; ++l) {
        w.row(l) = rhs_coeffs[static_cast<size_t>(l)].transpose();
        for (int n = 0; n < nfree; ++n)
          w.row(l) -= dep(l, n) * full[static_cast<size_t>(n)].transpose();
      }
      const MatrixXd x = last_lu.solve(w);
      for (int i = 0; i < ll; ++i) {
        const int n = nfree + i;
        full[static_cast<size_t>(n)] = x.row(i).transpose();
        const auto& bc = basis_coeffs[static_cast<size_t>(n)];
        const int kn = static_cast<int>(bc.size());
        if (kn > 0) {
          // least-squares witness for the split; membership is then checked
          // against this witness, which can only under-report the set
          span[static_cast<size_t>(n)] =
              split_qr[static_cast<size_t>(n)].solve(coarse * full[static_cast<size_t>(n)]);
          VectorXd v = VectorXd::Zero(dim);
          for (int k = 0; k < kn; ++k)
            v += span[static_cast<size_t>(n)][k] * bc[static_cast<size_t>(k)];
          resid[static_cast<size_t>(n)] = full[static_cast<size_t>(n)] - v;
        } else {
          span[static_cast<size_t>(n)].resize(0);
          resid[static_cast<size_t>(n)] = full[static_cast<size_t>(n)];
        }
      }
    }

    // coarse prefilter: its nodes are check-grid nodes, so rejections are sound
    for (int n = 0; n < nn; ++n) {
      const ModelSetSpec& ms = prob.model_sets[static_cast<size_t>(n)];
      if ((coarse * resid[static_cast<size_t>(n)]).cwiseAbs().maxCoeff() > ms.epsilon + 1e-6)
        return false;
      if (ms.nonneg && (coarse * full[static_cast<size_t>(n)]).minCoeff() < -1e-9) return false;
    }
    if (!solve_last && ll > 0) {
      // free draws essentially never satisfy equality rows; still checked
      const MatrixXd& dep = prob.dependence.coefficients;
      for (int l = 0; l < ll; ++l)
        for (int p = 0; p < point_vecs.rows(); ++p) {
          double lhs = 0.0;
          for (int n = 0; n < nn; ++n)
            lhs += dep(l, n) * point_vecs.row(p).dot(full[static_cast<size_t>(n)]);
          if (std::abs(lhs - point_vecs.row(p).dot(rhs_coeffs[static_cast<size_t>(l)])) > 1e-9)
            return false;
        }
    }
    if (!cosine_violations(prob, full, resid, fine, point_vecs, rhs_coeffs).empty()) return false;

    out.components.resize(static_cast<size_t>(nn));
    out.observations.resize(mm, nn);
    out.truth.resize(nn);
    for (int n = 0; n < nn; ++n) {
      CosinePoly r;
      r.coeffs.assign(resid[static_cast<size_t>(n)].data(),
                      resid[static_cast<size_t>(n)].data() + dim);
      out.components[static_cast<size_t>(n)] = {span[static_cast<size_t>(n)], BasisFunction{r}};
      out.truth[n] = point_vecs.row(0).dot(full[static_cast<size_t>(n)]);
      for (int m = 0; m < mm; ++m)
        out.observations(m, n) = point_vecs.row(m + 1).dot(full[static_cast<size_t>(n)]);
    }
    return true;
  }
};

// ---------------------------------------------------------------------------
// kernel setting: components are coordinate vectors over the reduced space

struct RkhsSampler {
  const RecoveryProblem& prob;
  rkhs::ReducedSpace sp;
  int nn, mm, ll, nfree = 0, d = 0;
  std::vector<MatrixXd> bmat;                     // d x K_n coordinate columns
  std::vector<MatrixXd> btg;                      // K_n x d
  std::vector<Eigen::LDLT<MatrixXd>> bgb;         // of B' G B
  bool solve_last = false;
  Eigen::FullPivLU<MatrixXd> last_lu;
  std::vector<double> pts;

  explicit RkhsSampler(const RecoveryProblem& p)
      : prob(p), sp(rkhs::build_reduced_space(p)), nn(p.num_components), mm(p.points.count()),
        ll(p.dependence.count()), pts(problem_points(p)) {
    d = sp.dim();
    for (int n = 0; n < nn; ++n) {
      const int kn = static_cast<int>(prob.model_sets[static_cast<size_t>(n)].basis.size());
      MatrixXd b = MatrixXd::Zero(d, kn);
      for (int k = 0; k < kn; ++k) b(sp.idx_vbasis(n, k), k) = 1.0;
      bmat.push_back(b);
      btg.push_back(b.transpose() * sp.gram);
      bgb.emplace_back(btg.back() * b);
    }
    if (ll > 0 && ll <= nn) {
      last_lu.compute(prob.dependence.coefficients.rightCols(ll));
      solve_last = last_lu.isInvertible();
    }
    nfree = solve_last ? nn - ll : nn;
  }

  bool attempt(std::mt19937_64& rng, SampledFunction& out) const {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<VectorXd> full(static_cast<size_t>(nn)), resid(static_cast<size_t>(nn)),
        span(static_cast<size_t>(nn));
    for (int n = 0; n < nfree; ++n) {
      const int kn = static_cast<int>(bmat[static_cast<size_t>(n)].cols());
      span[static_cast<size_t>(n)].resize(kn);
      VectorXd c = VectorXd::Zero(d);
      for (int k = 0; k < kn; ++k) {
        const double a = unif(rng);
        span[static_cast<size_t>(n)][k] = a;
        c += a * bmat[static_cast<size_t>(n)].col(k);
      }
      VectorXd g(d);
      for (int i = 0; i < d; ++i) g[i] = gauss(rng);
      if (kn > 0)  // project out the span so the draw prices only distance
        g -= bmat[static_cast<size_t>(n)] *
             bgb[static_cast<size_t>(n)].solve(btg[static_cast<size_t>(n)] * g);
      const double nrm = std::sqrt(std::max(0.0, sp.inner(g, g)));
      const double rad = unit(rng) * prob.model_sets[static_cast<size_t>(n)].epsilon;
      g *= nrm > 1e-12 ? rad / nrm : 0.0;
      resid[static_cast<size_t>(n)] = g;
      full[static_cast<size_t>(n)] = c + g;
    }
    if (solve_last) {
      const MatrixXd& dep = prob.dependence.coefficients;
      MatrixXd w(ll, d);
      for (int l = 0; l < ll; ++l) {
        w.row(l) = VectorXd::Unit(d, sp.idx_rhs(l)).transpose();
        for (int n = 0; n < nfree; ++n)
          w.row(l) -= dep(l, n) * full[static_cast<size_t>(n)].transpose();
      }
      const MatrixXd x = last_lu.solve(w);
      for (int i = 0; i < ll; ++i) {
        const int n = nfree + i;
        full[static_cast<size_t>(n)] = x.row(i).transpose();
        const int kn = static_cast<int>(bmat[static_cast<size_t>(n)].cols());
        if (kn > 0) {
          span[static_cast<size_t>(n)] = bgb[static_cast<size_t>(n)].solve(
              btg[static_cast<size_t>(n)] * full[static_cast<size_t>(n)]);
          resid[static_cast<size_t>(n)] =
              full[static_cast<size_t>(n)] -
              bmat[static_cast<size_t>(n)] * span[static_cast<size_t>(n)];
        } else {
          span[static_cast<size_t>(n)].resize(0);
          resid[static_cast<size_t>(n)] = full[static_cast<size_t>(n)];
        }
      }
    }

    // cheap rejections first: distances in reduced coordinates, then the
    // dependence rows at the problem points
    if (rkhs::model_set_violation(prob, sp, full) > 1e-9) return false;
    const MatrixXd& dep = prob.dependence.coefficients;
    for (int l = 0; l < ll; ++l)
      for (double x : pts) {
        double lhs = 0.0;
        for (int n = 0; n < nn; ++n) lhs += dep(l, n) * sp.eval(full[static_cast<size_t>(n)], x);
        if (std::abs(lhs - sp.eval(VectorXd::Unit(d, sp.idx_rhs(l)), x)) > 1e-9) return false;
      }

    out.components.resize(static_cast<size_t>(nn));
    out.observations.resize(mm, nn);
    out.truth.resize(nn);
    for (int n = 0; n < nn; ++n) {
      out.components[static_cast<size_t>(n)] = {
          span[static_cast<size_t>(n)],
          BasisFunction{sp.combine(resid[static_cast<size_t>(n)])}};
      out.truth[n] = sp.eval(full[static_cast<size_t>(n)], pts[0]);
      for (int m = 0; m < mm; ++m)
        out.observations(m, n) =
            sp.eval(full[static_cast<size_t>(n)], pts[static_cast<size_t>(m) + 1]);
    }
    // final gate through the public audit so the postcondition is literal
    return membership_violations(prob, out).empty();
  }
};

template <class Attempt>
SampleSet run_sampler(int count, std::uint64_t seed, const Attempt& attempt) {
  SampleSet set;
  std::mt19937_64 rng(seed);
  while (static_cast<int>(set.samples.size()) < count) {
    ++set.attempts;
    SampledFunction cand;
    if (attempt(rng, cand)) set.samples.push_back(std::move(cand));
    if (set.attempts >= kAttemptBudget &&
        static_cast<std::int64_t>(set.samples.size()) * 1000 < set.attempts)
      throw std::runtime_error("model set too thin to sample");
  }
  return set;
}

}  // namespace

SampleSet sample_model_set(const RecoveryProblem& prob, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample_model_set: count must be >= 1");
  require_valid(prob);
  if (prob.setting == Setting::cosine) {
    const CosineSampler s(prob);
    return run_sampler(count, seed,
                       [&](std::mt19937_64& rng, SampledFunction& o) { return s.attempt(rng, o); });
  }
  const RkhsSampler s(prob);
  return run_sampler(count, seed,
                     [&](std::mt19937_64& rng, SampledFunction& o) { return s.attempt(rng, o); });
}

std::vector<std::string> membership_violations(const RecoveryProblem& prob,
                                               const SampledFunction& sample) {
  const int nn = prob.num_components;
  const int mm = prob.points.count();
  if (static_cast<int>(sample.components.size()) != nn) return {"component count mismatch"};
  if (sample.observations.rows() != mm || sample.observations.cols() != nn ||
      sample.truth.size() != nn)
    return {"evaluation shape mismatch"};
  for (int n = 0; n < nn; ++n)
    if (sample.components[static_cast<size_t>(n)].span_coeffs.size() !=
        static_cast<Eigen::Index>(prob.model_sets[static_cast<size_t>(n)].basis.size()))
      return {"span coefficient count mismatch"};

  std::vector<std::string> bad;
  const std::vector<double> pts = problem_points(prob);

  if (prob.setting == Setting::cosine) {
    int dim = kResidualDegree + 1;
    for (const auto& ms : prob.model_sets)
      for (const auto& f : ms.basis) dim = std::max(dim, as_cosine(f, "model set basis").degree() + 1);
    for (const auto& f : prob.dependence.rhs)
      dim = std::max(dim, as_cosine(f, "dependence rhs").degree() + 1);
    for (const auto& comp : sample.components)
      dim = std::max(dim, static_cast<int>(as_cosine(comp.residual, "residual").coeffs.size()));

    std::vector<VectorXd> full, resid;
    for (int n = 0; n < nn; ++n) {
      const auto& comp = sample.components[static_cast<size_t>(n)];
      VectorXd r = padded_coeffs(as_cosine(comp.residual, "residual"), dim);
      VectorXd c = r;
      int k = 0;
      for (const auto& f : prob.model_sets[static_cast<size_t>(n)].basis)
        c += comp.span_coeffs[k++] * padded_coeffs(as_cosine(f, "model set basis"), dim);
      resid.push_back(std::move(r));
      full.push_back(std::move(c));
    }
    std::vector<VectorXd> rhs;
    for (const auto& f : prob.dependence.rhs)
      rhs.push_back(padded_coeffs(as_cosine(f, "dependence rhs"), dim));

    std::vector<double> grid(kCheckGridSize);
    for (int i = 0; i < kCheckGridSize; ++i)
      grid[static_cast<size_t>(i)] =
          prob.domain[0] + (prob.domain[1] - prob.domain[0]) * i / (kCheckGridSize - 1);
    const MatrixXd point_vecs = trig_rows(pts, dim);
    bad = cosine_violations(prob, full, resid, trig_rows(grid, dim), point_vecs, rhs);

    for (int n = 0; n < nn; ++n) {
      if (std::abs(sample.truth[n] - point_vecs.row(0).dot(full[static_cast<size_t>(n)])) > 1e-9)
        bad.push_back("stored prediction value disagrees with the closed form");
      for (int m = 0; m < mm; ++m)
        if (std::abs(sample.observations(m, n) -
                     point_vecs.row(m + 1).dot(full[static_cast<size_t>(n)])) > 1e-9)
          bad.push_back("stored observation disagrees with the closed form");
    }
    return bad;
  }

  if (!prob.kernel) return {"kernel missing"};
  const Kernel& ker = *prob.kernel;
  std::vector<AnchoredFunction> fns;
  for (int n = 0; n < nn; ++n) {
    const auto& comp = sample.components[static_cast<size_t>(n)];
    AnchoredFunction fn = as_anchored(comp.residual, "residual");
    int k = 0;
    for (const auto& f : prob.model_sets[static_cast<size_t>(n)].basis) {
      const AnchoredFunction& g = as_anchored(f, "model set basis");
      const double a = comp.span_coeffs[k++];
      for (size_t i = 0; i < g.anchors.size(); ++i) {
        fn.anchors.push_back(g.anchors[i]);
        fn.weights.push_back(a * g.weights[i]);
      }
    }
    const double dist =
        anchored_distance(ker, fn, prob.model_sets[static_cast<size_t>(n)].basis);
    if (dist > prob.model_sets[static_cast<size_t>(n)].epsilon + 1e-9)
      bad.push_back("component " + std::to_string(n + 1) + " leaves its model set");
    fns.push_back(std::move(fn));
  }
  const MatrixXd& dep = prob.dependence.coefficients;
  for (int l = 0; l < prob.dependence.count(); ++l) {
    const AnchoredFunction& b =
        as_anchored(prob.dependence.rhs[static_cast<size_t>(l)], "dependence rhs");
    for (double x : pts) {
      double lhs = 0.0;
      for (int n = 0; n < nn; ++n) lhs += dep(l, n) * eval_anchored(ker, fns[static_cast<size_t>(n)], x);
      if (std::abs(lhs - eval_anchored(ker, b, x)) > 1e-9)
        bad.push_back("dependence row " + std::to_string(l + 1) + " violated at a problem point");
    }
  }
  for (int n = 0; n < nn; ++n) {
    if (std::abs(sample.truth[n] - eval_anchored(ker, fns[static_cast<size_t>(n)], pts[0])) > 1e-9)
      bad.push_back("stored prediction value disagrees with the closed form");
    for (int m = 0; m < mm; ++m)
      if (std::abs(sample.observations(m, n) -
                   eval_anchored(ker, fns[static_cast<size_t>(n)], pts[static_cast<size_t>(m) + 1])) >
          1e-9)
        bad.push_back("stored observation disagrees with the closed form");
  }
  return bad;
}

std::vector<PointSample> to_point_samples(const std::vector<SampledFunction>& samples) {
  std::vector<PointSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.observations, s.truth});
  return out;
}

AffineRecoveryMap independent_reference(const RecoveryProblem& prob) {
  if (prob.dependence.count() != 0)
    throw std::invalid_argument("independent_reference: problem has dependence rows");
  require_valid(prob);
  const int nn = prob.num_components;
  const int mm = prob.points.count();

  AffineRecoveryMap map;
  map.offsets = VectorXd::Zero(nn);
  map.values = VectorXd::Zero(nn);
  const int level = prob.setting == Setting::cosine ? cosine::default_level(prob) : 0;
  for (int n = 0; n < nn; ++n) {
    RecoveryProblem sub = prob;
    sub.num_components = 1;
    sub.model_sets = {prob.model_sets[static_cast<size_t>(n)]};
    sub.dependence = DependenceSpec{};
    const AffineRecoveryMap one = prob.setting == Setting::cosine
                                      ? cosine::lower_bound(sub, level).map
                                      : rkhs::solve_recovery(sub);
    MatrixXd coeff = MatrixXd::Zero(mm, nn);
    coeff.col(n) = one.coeffs[0].col(0);
    map.coeffs.push_back(std::move(coeff));
    map.offsets[n] = one.offsets[0];
    map.values[n] = one.values[0];
  }
  return map;
}

void write_sample_csv(std::ostream& out, const RecoveryProblem& prob, const SampleSet& set) {
  const int nn = prob.num_components;
  const int mm = prob.points.count();
  out << "sample";
  for (int n = 0; n < nn; ++n) out << ",truth_" << n + 1;
  for (int m = 0; m < mm; ++m)
    for (int n = 0; n < nn; ++n) out << ",obs_" << m + 1 << "_" << n + 1;
  out << "\n" << std::setprecision(17);
  for (size_t s = 0; s < set.samples.size(); ++s) {
    out << s;
    const SampledFunction& f = set.samples[s];
    for (int n = 0; n < nn; ++n) out << "," << f.truth[n];
    for (int m = 0; m < mm; ++m)
      for (int n = 0; n < nn; ++n) out << "," << f.observations(m, n);
    out << "\n";
  }
}

}  // namespace optrec::oracle
