#include "optrec/oracle.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "optrec/cosine.hpp"
#include "optrec/rkhs.hpp"
#include "support/instances.hpp"

using namespace optrec;
using testsupport::cosine_instance_d;
using testsupport::derived_rkhs_instance;
using testsupport::random_rkhs_instance;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

bool mentions(const std::vector<std::string>& msgs, const std::string& needle) {
  return std::any_of(msgs.begin(), msgs.end(), [&](const std::string& m) {
    return m.find(needle) != std::string::npos;
  });
}

}  // namespace

TEST_CASE("zero width samples collapse to the dependence relation") {
  RecoveryProblem prob = cosine_instance_d();
  prob.model_sets[0].epsilon = 0.0;
  prob.model_sets[1].epsilon = 0.0;
  // only constant pairs (t, 1 - t) with t in [0, 1] survive
  const oracle::SampleSet set = oracle::sample_model_set(prob, 200, 5);
  REQUIRE(set.samples.size() == 200);
  CHECK(set.attempts >= 200);
  CHECK(set.acceptance_rate() > 0.2);
  for (const auto& s : set.samples) {
    const double t = s.truth[0];
    CHECK(t >= -1e-9);
    CHECK(t <= 1.0 + 1e-9);
    CHECK(s.truth[0] + s.truth[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.components[0].span_coeffs.size() == 1);
    CHECK(s.components[0].span_coeffs[0] == t);
    CHECK(s.components[1].span_coeffs[0] == doctest::Approx(1.0 - t).epsilon(1e-12));
    for (int m = 0; m < 2; ++m)
      for (int n = 0; n < 2; ++n) CHECK(s.observations(m, n) == s.truth[n]);
  }
}

TEST_CASE("sampled functions verify against the model sets") {
  const RecoveryProblem prob = cosine_instance_d();
  const oracle::SampleSet set = oracle::sample_model_set(prob, 150, 3);
  REQUIRE(set.samples.size() == 150);
  CHECK(set.acceptance_rate() > 0.05);
  for (const auto& s : set.samples) {
    const auto bad = oracle::membership_violations(prob, s);
    CHECK(bad.empty());
    if (!bad.empty()) break;  // one detailed failure is enough
  }
  // dependence really holds pointwise, not just through the checker
  for (const auto& s : set.samples)
    for (int m = 0; m < 2; ++m)
      CHECK(s.observations(m, 0) + s.observations(m, 1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("tampered samples are flagged by the audit") {
  const RecoveryProblem prob = cosine_instance_d();
  const oracle::SampleSet set = oracle::sample_model_set(prob, 1, 9);
  const oracle::SampledFunction& good = set.samples[0];
  REQUIRE(oracle::membership_violations(prob, good).empty());

  oracle::SampledFunction s = good;
  s.truth[0] += 1e-3;
  CHECK(mentions(oracle::membership_violations(prob, s), "prediction"));

  s = good;
  s.observations(1, 0) -= 1e-3;
  CHECK(mentions(oracle::membership_violations(prob, s), "observation"));

  s = good;
  std::get<CosinePoly>(s.components[0].residual).coeffs[1] += 0.5;
  CHECK(mentions(oracle::membership_violations(prob, s), "leaves its model set"));

  s = good;
  s.components[0].span_coeffs[0] -= 2.0;
  CHECK(mentions(oracle::membership_violations(prob, s), "negative"));

  s = good;
  s.components.pop_back();
  CHECK(oracle::membership_violations(prob, s) ==
        std::vector<std::string>{"component count mismatch"});
}

TEST_CASE("empirical errors respect the certified bound") {
  const RecoveryProblem prob = cosine_instance_d();
  const cosine::LevelBound lb = cosine::lower_bound(prob, 8);
  const cosine::GridBound ub = cosine::upper_bound(prob, lb.map, 51);
  REQUIRE(ub.feasible);

  const oracle::SampleSet set = oracle::sample_model_set(prob, 2000, 7);
  const double emp = empirical_error(lb.map, oracle::to_point_samples(set.samples));
  CHECK(emp > 0.0);
  CHECK(emp <= ub.value + 1e-6);
}

TEST_CASE("kernel samples respect the optimal worst case error") {
  const RecoveryProblem prob = derived_rkhs_instance();
  const AffineRecoveryMap map = rkhs::solve_recovery(prob);
  const oracle::SampleSet set = oracle::sample_model_set(prob, 500, 11);
  REQUIRE(set.samples.size() == 500);
  CHECK(set.acceptance_rate() > 0.9);
  const double emp = empirical_error(map, oracle::to_point_samples(set.samples));
  CHECK(emp > 0.0);
  CHECK(emp <= map.values.maxCoeff() + 1e-6);
  for (const auto& s : set.samples) {
    const auto bad = oracle::membership_violations(prob, s);
    CHECK(bad.empty());
    if (!bad.empty()) break;
  }
}

TEST_CASE("sampling is deterministic per seed") {
  const RecoveryProblem prob = cosine_instance_d();
  const oracle::SampleSet a = oracle::sample_model_set(prob, 50, 42);
  const oracle::SampleSet b = oracle::sample_model_set(prob, 50, 42);
  REQUIRE(a.samples.size() == b.samples.size());
  CHECK(a.attempts == b.attempts);
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].observations == b.samples[i].observations);
    CHECK(a.samples[i].truth == b.samples[i].truth);
  }
  const oracle::SampleSet c = oracle::sample_model_set(prob, 50, 43);
  CHECK(a.samples[0].truth != c.samples[0].truth);
}

TEST_CASE("a thin model set raises instead of spinning") {
  // the dependence pins f_1 to a nonzero function while the width is zero,
  // so the feasible set is empty and every attempt rejects
  RecoveryProblem prob;
  prob.setting = Setting::rkhs;
  prob.num_components = 1;
  prob.domain = {0.0, 1.0};
  prob.kernel = Kernel::min_plus_one();
  prob.points.new_point = 0.5;
  prob.points.old_points = {0.25, 0.75};
  prob.model_sets.resize(1);
  prob.model_sets[0].epsilon = 0.0;
  AnchoredFunction b;
  b.anchors = {0.5};
  b.weights = {1.0};
  prob.dependence.coefficients = MatrixXd::Ones(1, 1);
  prob.dependence.rhs = {BasisFunction{b}};
  CHECK_THROWS_WITH_AS(oracle::sample_model_set(prob, 1, 1), "model set too thin to sample",
                       std::runtime_error);
}

TEST_CASE("independent reference reproduces decoupled solves") {
  std::mt19937_64 rng(2027);
  for (int trial = 0; trial < 2; ++trial) {
    const RecoveryProblem prob = random_rkhs_instance(rng, false);
    const AffineRecoveryMap full = rkhs::solve_recovery(prob);
    const AffineRecoveryMap ref = oracle::independent_reference(prob);
    REQUIRE(static_cast<int>(ref.coeffs.size()) == prob.num_components);
    for (int n = 0; n < prob.num_components; ++n) {
      for (int k = 0; k < prob.num_components; ++k)
        if (k != n) CHECK(ref.coeffs[static_cast<size_t>(n)].col(k).isZero(0.0));
      CHECK(std::abs(ref.values[n] - full.values[n]) <= 1e-6 * (1.0 + std::abs(full.values[n])));
    }
  }

  // same statement in the trigonometric setting at a matched level
  RecoveryProblem prob = cosine_instance_d();
  prob.dependence = DependenceSpec{};
  const AffineRecoveryMap full = cosine::lower_bound(prob, cosine::default_level(prob)).map;
  const AffineRecoveryMap ref = oracle::independent_reference(prob);
  for (int n = 0; n < 2; ++n) {
    CHECK(ref.coeffs[static_cast<size_t>(n)].col(1 - n).isZero(0.0));
    CHECK(std::abs(ref.values[n] - full.values[n]) <= 1e-6 * (1.0 + std::abs(full.values[n])));
  }

  CHECK_THROWS_AS(oracle::independent_reference(cosine_instance_d()), std::invalid_argument);
}

TEST_CASE("sample dumps are plain csv") {
  const RecoveryProblem prob = cosine_instance_d();
  const oracle::SampleSet set = oracle::sample_model_set(prob, 10, 21);
  std::ostringstream out;
  oracle::write_sample_csv(out, prob, set);
  std::istringstream in(out.str());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "sample,truth_1,truth_2,obs_1_1,obs_1_2,obs_2_1,obs_2_2");
  int rows = 0;
  while (std::getline(in, line)) {
    const size_t comma = line.find(',');
    CHECK(std::stoi(line.substr(0, comma)) == rows);
    ++rows;
  }
  CHECK(rows == 10);
  // values round-trip at full precision
  std::istringstream again(out.str());
  std::getline(again, line);
  std::getline(again, line);
  const size_t c1 = line.find(',');
  const size_t c2 = line.find(',', c1 + 1);
  CHECK(std::stod(line.substr(c1 + 1, c2 - c1 - 1)) == set.samples[0].truth[0]);
}

TEST_CASE("oracle interface guards") {
  const RecoveryProblem prob = cosine_instance_d();
  CHECK_THROWS_AS(oracle::sample_model_set(prob, 0, 1), std::invalid_argument);
  RecoveryProblem broken = prob;
  broken.num_components = 0;
  CHECK_THROWS_AS(oracle::sample_model_set(broken, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(oracle::independent_reference(broken), std::invalid_argument);

  const std::vector<PointSample> none;
  CHECK_THROWS_AS(empirical_error(cosine::lower_bound(prob, 4).map, none), std::invalid_argument);
}
