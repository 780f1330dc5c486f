#include "optrec/cosine.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <doctest.h>
#include <Eigen/Eigenvalues>

#include "support/instances.hpp"

using namespace optrec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("moment vectors at landmark angles") {
  const VectorXd at0 = cosine::point_moments(0.0, 4);
  const VectorXd atpi = cosine::point_moments(M_PI, 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(at0[k] == doctest::Approx(1.0));
    CHECK(atpi[k] == doctest::Approx(k % 2 == 0 ? 1.0 : -1.0));
  }
  const VectorXd mid = cosine::point_moments(M_PI / 2.0, 5);
  CHECK(std::abs(mid[0] - 1.0) < 1e-12);
  CHECK(std::abs(mid[1]) < 1e-12);
  CHECK(std::abs(mid[2] + 1.0) < 1e-12);
  CHECK(std::abs(mid[3]) < 1e-12);
  CHECK(std::abs(mid[4] - 1.0) < 1e-12);

  CHECK_THROWS_AS(cosine::point_moments(-0.1, 3), std::invalid_argument);
  CHECK_THROWS_AS(cosine::point_moments(M_PI + 0.1, 3), std::invalid_argument);
  CHECK_THROWS_AS(cosine::point_moments(1.0, 0), std::invalid_argument);
}

TEST_CASE("toeplitz sections mirror the sequence") {
  VectorXd y(3);
  y << 1.0, 0.0, 0.0;
  CHECK((cosine::toeplitz_section(y) - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);

  VectorXd w(4);
  w << 1.0, 2.0, 3.0, 4.0;
  const MatrixXd t = cosine::toeplitz_section(w);
  CHECK(t(0, 3) == 4.0);
  CHECK(t(2, 1) == 2.0);
  CHECK(t(3, 3) == 1.0);
  CHECK((t - t.transpose()).cwiseAbs().maxCoeff() == 0.0);

  // |y_1| > y_0 cannot come from a measure
  VectorXd bad(3);
  bad << 1.0, 1.5, 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(cosine::toeplitz_section(bad));
  CHECK(es.eigenvalues().minCoeff() < -0.1);
}

TEST_CASE("point moment matrices stay positive at high level") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, M_PI);
  for (int trial = 0; trial < 100; ++trial) {
    const VectorXd y = cosine::point_moments(unif(rng), 16);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(cosine::toeplitz_section(y));
    CHECK(es.eigenvalues().minCoeff() >= -1e-8 * (1.0 + y[0]));
  }
}

TEST_CASE("default level tracks the declared degrees") {
  RecoveryProblem prob = testsupport::cosine_instance_d();
  CHECK(cosine::default_level(prob) == 4);
  CosinePoly cosx;
  cosx.coeffs = {0.0, 1.0};
  prob.model_sets[0].basis.push_back(BasisFunction{cosx});
  CHECK(cosine::default_level(prob) == 6);
}

TEST_CASE("certification grid keeps problem points exact") {
  RecoveryProblem prob = testsupport::cosine_instance_d();
  std::vector<double> nodes = cosine::certification_grid(prob, 51);
  CHECK(nodes.size() == 54);  // 51 uniform plus three problem points
  CHECK(std::is_sorted(nodes.begin(), nodes.end()));
  for (double x : {0.8, 1.5, 2.3})
    CHECK(std::find(nodes.begin(), nodes.end(), x) != nodes.end());

  // a problem point landing on the uniform grid is kept exactly once
  prob.points.new_point = M_PI * 25 / 50;
  nodes = cosine::certification_grid(prob, 51);
  CHECK(nodes.size() == 53);
  int hits = 0;
  for (double t : nodes)
    if (std::abs(t - prob.points.new_point) <= 1e-12) ++hits;
  CHECK(hits == 1);
  CHECK(std::find(nodes.begin(), nodes.end(), prob.points.new_point) != nodes.end());

  CHECK_THROWS_AS(cosine::certification_grid(prob, 1), std::invalid_argument);
}

TEST_CASE("component relaxation program has the expected shape") {
  const RecoveryProblem prob = testsupport::cosine_instance_d();
  const conic::ConeProgram cp = cosine::component_program(prob, 0, 8);
  CHECK_NOTHROW(cp.check_well_formed());

  // variable order: split dependence sequences (32), split model-set
  // sequences (64), readout coefficients (4), offset, objective value
  CHECK(cp.num_vars == 102);
  CHECK(cp.objective.cwiseAbs().sum() == 1.0);
  CHECK(cp.objective[101] == 1.0);

  REQUIRE(cp.blocks.size() == 17);
  CHECK(cp.blocks[0].kind == conic::BlockKind::nonneg);
  CHECK(cp.blocks[0].dim() == 2);
  for (size_t b = 1; b < cp.blocks.size(); ++b) {
    CHECK(cp.blocks[b].kind == conic::BlockKind::psd);
    CHECK(cp.blocks[b].side == 8);
  }

  const MatrixXd& bud = cp.blocks[0].coeff;
  CHECK(bud(0, 101) == 1.0);
  CHECK(bud(1, 101) == 1.0);
  CHECK(bud(0, 100) == 1.0);
  CHECK(bud(1, 100) == -1.0);
  CHECK(bud(0, 0) == -1.0);  // added part of the constant dependence rhs
  CHECK(bud(0, 8) == 1.0);   // subtracted part
  CHECK(bud.row(0).head(32).cwiseAbs().sum() == 2.0);
  CHECK(bud.row(0).segment(32, 64).sum() == doctest::Approx(-0.4));  // width charges
  CHECK(bud.row(0).segment(32, 64).minCoeff() == -0.1);
  CHECK(bud.row(0).segment(96, 4).isZero(0.0));
  CHECK(cp.blocks[0].offset.isZero(0.0));

  // orthogonality rows: one per sign, component, and basis element
  REQUIRE(cp.eq_coeff.rows() == 4);
  CHECK(cp.eq_rhs.isZero(0.0));
  CHECK(cp.eq_coeff(0, 32) == 1.0);
  CHECK(cp.eq_coeff(0, 48) == -1.0);
  CHECK(cp.eq_coeff.row(0).cwiseAbs().sum() == 2.0);

  // domination sections carry the prediction moments only for the solved
  // component; the first packed coordinate is the signed zeroth moment
  CHECK(cp.blocks[1].offset[0] == -1.0);
  CHECK(cp.blocks[2].offset.isZero(0.0));
  CHECK(cp.blocks[3].offset[0] == 1.0);
  CHECK(cp.blocks[4].offset.isZero(0.0));

  // split sequences enter through the packed toeplitz lift
  CHECK(cp.blocks[5].offset.isZero(0.0));
  CHECK(cp.blocks[5].coeff(0, 0) == 1.0);
  CHECK(cp.blocks[5].coeff(1, 1) == doctest::Approx(std::sqrt(2.0)));

  // truncation below a declared degree is refused
  RecoveryProblem deg1 = prob;
  CosinePoly cosx;
  cosx.coeffs = {0.0, 1.0};
  deg1.model_sets[0].basis.push_back(BasisFunction{cosx});
  CHECK_THROWS_AS(cosine::component_program(deg1, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(cosine::component_program(prob, 2, 8), std::invalid_argument);
  CHECK_THROWS_AS(cosine::component_program(testsupport::derived_rkhs_instance(), 0, 8),
                  std::invalid_argument);
}

TEST_CASE("side bound program shape on a coarse grid") {
  const RecoveryProblem prob = testsupport::cosine_instance_d();
  const std::vector<double> nodes = cosine::certification_grid(prob, 5);
  REQUIRE(nodes.size() == 8);
  const int ss = 8;

  const conic::ConeProgram cp =
      cosine::side_bound_program(prob, MatrixXd::Zero(2, 2), nodes, 0, 1);
  CHECK_NOTHROW(cp.check_well_formed());
  CHECK(cp.num_vars == 2 * 3 * ss);
  REQUIRE(cp.blocks.size() == 2);
  CHECK(cp.blocks[0].dim() == cp.num_vars);
  CHECK(cp.blocks[1].dim() == 2 * ss);
  CHECK(cp.eq_coeff.rows() == 2);
  CHECK(cp.eq_rhs.isZero(0.0));

  // under the zero map only the prediction node is charged
  CHECK(cp.blocks[1].offset.sum() == -1.0);
  CHECK(cp.blocks[1].offset.minCoeff() == -1.0);

  // dependence atoms priced by the rhs, model-set atoms by the widths
  CHECK(cp.objective.head(ss).sum() == doctest::Approx(8.0));
  CHECK(cp.objective.segment(ss, ss).sum() == doctest::Approx(-8.0));
  CHECK(cp.objective.tail(4 * ss).minCoeff() == 0.1);
  CHECK(cp.objective.tail(4 * ss).maxCoeff() == 0.1);
}

TEST_CASE("prediction at an observation point is read off exactly") {
  RecoveryProblem prob = testsupport::cosine_instance_d();
  prob.points.new_point = prob.points.old_points[0];

  const cosine::LevelBound lb = cosine::lower_bound(prob);
  CHECK(lb.value == 0.0);
  CHECK(lb.level == 4);
  REQUIRE(lb.map.components() == 2);
  CHECK(lb.map.coeffs[0](0, 0) == 1.0);
  CHECK(lb.map.coeffs[0](1, 0) == 0.0);
  CHECK(lb.map.coeffs[0](0, 1) == 0.0);
  CHECK(lb.map.coeffs[1](0, 1) == 1.0);
  CHECK(lb.map.offsets.isZero(0.0));

  // the relaxation agrees without the shortcut
  const conic::ConeSolution sol = conic::solve(cosine::component_program(prob, 0, 6));
  REQUIRE(sol.status == conic::SolveStatus::optimal);
  CHECK(std::abs(sol.objective_value) <= 1e-7);

  const cosine::CertifiedMap cm = cosine::certify(prob, 0, 51);
  CHECK(cm.certificate.lower == 0.0);
  CHECK(cm.certificate.upper == 0.0);
  CHECK(cm.certificate.ratio == 1.0);
}

TEST_CASE("level bounds tighten toward the hand-derived value") {
  // Certified two-sided value of this instance is 2*eps = 0.2 (the grid
  // certificate meets the relaxation), reached already at level 8.
  const RecoveryProblem prob = testsupport::cosine_instance_d();
  const cosine::LevelBound lb4 = cosine::lower_bound(prob, 4);
  const cosine::LevelBound lb6 = cosine::lower_bound(prob, 6);
  const cosine::LevelBound lb8 = cosine::lower_bound(prob, 8);

  CHECK(lb4.value <= lb6.value + 1e-8);
  CHECK(lb6.value <= lb8.value + 1e-8);
  CHECK(lb8.value == doctest::Approx(0.2).epsilon(1e-5));
  CHECK(std::abs(lb8.map.values[0] - lb8.map.values[1]) <= 1e-6);  // symmetric roles

  // frozen regression anchors
  CHECK(lb4.value == doctest::Approx(0.0927257).epsilon(1e-3));
  CHECK(lb6.value == doctest::Approx(0.1978223).epsilon(1e-3));
}

TEST_CASE("grid bounds dominate the level bound and tighten with resolution") {
  const RecoveryProblem prob = testsupport::cosine_instance_d();
  const cosine::LevelBound lb = cosine::lower_bound(prob, 8);
  const cosine::GridBound g51 = cosine::upper_bound(prob, lb.map, 51);
  const cosine::GridBound g101 = cosine::upper_bound(prob, lb.map, 101);
  REQUIRE(g51.feasible);
  REQUIRE(g101.feasible);

  CHECK(lb.value <= g51.value + 1e-6);
  CHECK(lb.value <= g101.value + 1e-6);
  CHECK(g101.value <= g51.value + 1e-8);  // the grids are nested
  CHECK(g51.value == doctest::Approx(0.2).epsilon(1e-4));
  CHECK(g51.ub_plus[0] == doctest::Approx(g51.ub_minus[0]).epsilon(1e-4));
}

TEST_CASE("certify assembles a matching sandwich") {
  const RecoveryProblem prob = testsupport::cosine_instance_d();
  const cosine::CertifiedMap cm = cosine::certify(prob, 8, 51);
  const Certificate& c = cm.certificate;
  CHECK(c.level_r == 8);
  CHECK(c.grid_s == 51);
  CHECK(c.lower == doctest::Approx(0.2).epsilon(1e-4));
  CHECK(c.upper == doctest::Approx(0.2).epsilon(1e-4));
  CHECK(c.ratio == doctest::Approx(1.0).epsilon(1e-3));
  REQUIRE(c.per_component.size() == 2);
  for (size_t j = 0; j < 2; ++j) {
    const auto& pc = c.per_component[j];
    CHECK(pc.e_lb <= c.upper + 1e-6);
    CHECK(cm.map.values[static_cast<int>(j)] == std::max(pc.ub_plus, pc.ub_minus));
  }

  // the certified error covers a model-set member: the constant pair
  ObservationMatrix y(2, 2);
  y << 0.4, 0.6, 0.4, 0.6;
  const VectorXd pred = apply_map(cm.map, y);
  CHECK(std::abs(pred[0] - 0.4) <= cm.map.values[0] + 1e-7);
  CHECK(std::abs(pred[1] - 0.6) <= cm.map.values[1] + 1e-7);
}

TEST_CASE("split atom masses stay complementary at a grid optimum") {
  const RecoveryProblem prob = testsupport::cosine_instance_d();
  const cosine::LevelBound lb = cosine::lower_bound(prob, 8);
  const std::vector<double> nodes = cosine::certification_grid(prob, 51);
  const int ss = static_cast<int>(nodes.size());

  conic::SolveOptions opts;
  opts.feastol = 1e-9;
  opts.abstol = 1e-9;
  opts.reltol = 1e-9;
  const conic::ConeProgram cp = cosine::side_bound_program(prob, lb.map.coeffs[0], nodes, 0, 1);
  const conic::ConeSolution sol = conic::solve(cp, opts);
  REQUIRE(sol.status == conic::SolveStatus::optimal);

  // the width cost is strictly positive, so one of each model-set split pair
  // vanishes and the two parts together realize the total variation
  const int ll = prob.dependence.count();
  auto nu = [&](int part, int n, int i) { return 2 * ll * ss + (part * 2 + n) * ss + i; };
  double tv = 0.0, mass = 0.0;
  for (int n = 0; n < 2; ++n)
    for (int i = 0; i < ss; ++i) {
      const double p = sol.primal[nu(0, n, i)];
      const double q = sol.primal[nu(1, n, i)];
      CHECK(std::min(p, q) <= 1e-7 * (1.0 + p + q));
      tv += std::abs(p - q);
      mass += p + q;
    }
  CHECK(std::abs(tv - mass) <= 1e-5 * (1.0 + mass));
}

TEST_CASE("zero widths with a constant span force exact prediction") {
  RecoveryProblem prob;
  prob.setting = Setting::cosine;
  prob.num_components = 1;
  prob.domain = {0.0, M_PI};
  prob.points.new_point = 2.0;
  prob.points.old_points = {1.0};
  ModelSetSpec ms;
  ms.epsilon = 0.0;
  ms.nonneg = true;
  ms.basis = {BasisFunction{CosinePoly::constant(1.0)}};
  prob.model_sets = {ms};

  const cosine::LevelBound lb = cosine::lower_bound(prob, 6);
  CHECK(lb.value <= 1e-6);
  CHECK(lb.map.coeffs[0](0, 0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(std::abs(lb.map.offsets[0]) <= 1e-6);

  const cosine::CertifiedMap cm = cosine::certify(prob, 6, 51);
  CHECK(cm.certificate.upper <= 2e-6);

  for (double c : {0.3, 1.7}) {
    ObservationMatrix y(1, 1);
    y(0, 0) = c;
    CHECK(apply_map(cm.map, y)[0] == doctest::Approx(c).epsilon(1e-5));
  }
}

TEST_CASE("random tied instances stay sandwiched") {
  std::mt19937_64 rng(2026);
  for (int trial = 0; trial < 3; ++trial) {
    const RecoveryProblem prob = testsupport::random_cosine_instance(rng);
    const cosine::LevelBound lb = cosine::lower_bound(prob, 6);
    const cosine::GridBound ub = cosine::upper_bound(prob, lb.map, 51);
    REQUIRE(ub.feasible);
    CHECK(lb.value >= 0.0);
    CHECK(lb.value <= ub.value + 1e-6);
  }
}

TEST_CASE("cosine interface guards") {
  const RecoveryProblem prob = testsupport::cosine_instance_d();
  const MatrixXd zero = MatrixXd::Zero(2, 2);

  CHECK_THROWS_AS(cosine::side_bound_program(prob, zero, {0.1, 0.5}, 0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      cosine::side_bound_program(prob, zero, cosine::certification_grid(prob, 11), 0, 2),
      std::invalid_argument);
  CHECK_THROWS_AS(cosine::side_bound_program(prob, MatrixXd::Zero(1, 2),
                                             cosine::certification_grid(prob, 11), 0, 1),
                  std::invalid_argument);

  AffineRecoveryMap bad;
  bad.coeffs = {zero};  // one component only
  bad.offsets = VectorXd::Zero(1);
  bad.values = VectorXd::Zero(1);
  CHECK_THROWS_AS(cosine::upper_bound(prob, bad, 51), std::invalid_argument);

  CHECK_THROWS_AS(cosine::solve_component(testsupport::derived_rkhs_instance(), 0, 8),
                  std::invalid_argument);
  CHECK_THROWS_AS(cosine::solve_component(prob, -1, 8), std::invalid_argument);
}
