#include "optrec/conic.hpp"

#include <cmath>
#include <random>

#include <doctest.h>
#include <json.hpp>

using namespace optrec::conic;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ConeProgram single_var_lp() {
  // min x  s.t.  x - 1 >= 0
  ConeProgram p;
  p.num_vars = 1;
  p.objective = VectorXd::Ones(1);
  ConeBlock b;
  b.kind = BlockKind::nonneg;
  b.coeff = MatrixXd::Ones(1, 1);
  b.offset = VectorXd::Constant(1, -1.0);
  p.blocks.push_back(b);
  return p;
}

}  // namespace

TEST_CASE("orthant program attains its known minimum") {
  ConeSolution sol = solve(single_var_lp());
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.primal[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.objective_value == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(std::abs(sol.objective_value - sol.dual_objective) < 1e-6);
}

TEST_CASE("second-order program recovers the euclidean norm") {
  // min t  s.t.  (t, 1, 1) in the second-order cone, optimum sqrt(2)
  ConeProgram p;
  p.num_vars = 1;
  p.objective = VectorXd::Ones(1);
  ConeBlock b;
  b.kind = BlockKind::second_order;
  b.coeff = MatrixXd::Zero(3, 1);
  b.coeff(0, 0) = 1.0;
  b.offset = VectorXd::Zero(3);
  b.offset[1] = 1.0;
  b.offset[2] = 1.0;
  p.blocks.push_back(b);
  ConeSolution sol = solve(p);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.primal[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-7));
}

TEST_CASE("semidefinite program bounds the off-diagonal entry") {
  // min t  s.t.  [[t, 1], [1, t]] psd, optimum t = 1
  ConeProgram p;
  p.num_vars = 1;
  p.objective = VectorXd::Ones(1);
  ConeBlock b;
  b.kind = BlockKind::psd;
  b.side = 2;
  b.coeff = MatrixXd::Zero(3, 1);
  b.coeff(0, 0) = 1.0;
  b.coeff(2, 0) = 1.0;
  b.offset = VectorXd::Zero(3);
  b.offset[1] = std::sqrt(2.0);  // packed off-diagonal carries the sqrt(2) factor
  p.blocks.push_back(b);
  ConeSolution sol = solve(p);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.primal[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("equality constraints survive duplicated rows") {
  // min x1 + x2  s.t.  x1 + x2 = 1 stated twice, x >= 0
  ConeProgram p;
  p.num_vars = 2;
  p.objective = VectorXd::Ones(2);
  p.eq_coeff = MatrixXd::Ones(2, 2);
  p.eq_rhs = VectorXd::Ones(2);
  ConeBlock b;
  b.kind = BlockKind::nonneg;
  b.coeff = MatrixXd::Identity(2, 2);
  b.offset = VectorXd::Zero(2);
  p.blocks.push_back(b);
  ConeSolution sol = solve(p);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.objective_value == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.eq_dual.size() == 2);
}

TEST_CASE("inconsistent equalities are rejected before iterating") {
  ConeProgram p = single_var_lp();
  p.eq_coeff = MatrixXd::Ones(2, 1);
  p.eq_rhs = VectorXd::Ones(2);
  p.eq_rhs[1] = 2.0;  // x = 1 and x = 2
  ConeSolution sol = solve(p);
  CHECK(sol.status == SolveStatus::infeasible);
}

TEST_CASE("conflicting cone rows yield an infeasibility certificate") {
  // x - 1 >= 0 and -x >= 0 cannot hold together
  ConeProgram p = single_var_lp();
  ConeBlock b;
  b.kind = BlockKind::nonneg;
  b.coeff = -MatrixXd::Ones(1, 1);
  b.offset = VectorXd::Zero(1);
  p.blocks.push_back(b);
  ConeSolution sol = solve(p);
  CHECK(sol.status == SolveStatus::infeasible);
}

TEST_CASE("descent direction without a floor is reported unbounded") {
  ConeProgram p;
  p.num_vars = 1;
  p.objective = -VectorXd::Ones(1);
  ConeBlock b;
  b.kind = BlockKind::nonneg;
  b.coeff = MatrixXd::Ones(1, 1);
  b.offset = VectorXd::Zero(1);
  p.blocks.push_back(b);
  ConeSolution sol = solve(p);
  CHECK(sol.status == SolveStatus::unbounded);
}

TEST_CASE("malformed programs are refused") {
  ConeProgram p = single_var_lp();
  SUBCASE("offset length mismatch") {
    p.blocks[0].offset = VectorXd::Zero(2);
    CHECK_THROWS_AS(p.check_well_formed(), std::invalid_argument);
  }
  SUBCASE("psd packed length must match the side") {
    ConeBlock b;
    b.kind = BlockKind::psd;
    b.side = 2;
    b.coeff = MatrixXd::Zero(4, 1);
    b.offset = VectorXd::Zero(4);
    p.blocks.push_back(b);
    CHECK_THROWS_AS(p.check_well_formed(), std::invalid_argument);
  }
  SUBCASE("objective length mismatch") {
    p.objective = VectorXd::Zero(3);
    CHECK_THROWS_AS(p.check_well_formed(), std::invalid_argument);
  }
}

TEST_CASE("dump emits parseable json") {
  ConeProgram p = single_var_lp();
  auto j = nlohmann::json::parse(p.dump());
  CHECK(j["num_vars"] == 1);
  CHECK(j["blocks"].size() == 1);
  CHECK(j["blocks"][0]["kind"] == "nonneg");
}

TEST_CASE("membership checks per cone") {
  CHECK(check_membership(BlockKind::nonneg, VectorXd::Ones(3), 1e-9));
  VectorXd neg = VectorXd::Ones(3);
  neg[2] = -1e-3;
  CHECK_FALSE(check_membership(BlockKind::nonneg, neg, 1e-9));

  VectorXd soc(3);
  soc << 1.0, 0.6, 0.7;
  CHECK(check_membership(BlockKind::second_order, soc, 1e-9));
  soc[0] = 0.9;
  CHECK_FALSE(check_membership(BlockKind::second_order, soc, 1e-9));

  VectorXd packed(3);
  packed << 1.0, 0.999, 1.0;
  CHECK(check_membership(BlockKind::psd, packed, 1e-9, 2));
  packed[1] = 0.999 * std::sqrt(2.0);  // off-diagonal 0.999, eigenvalues ~{0.001, 1.999}
  CHECK(check_membership(BlockKind::psd, packed, 1e-9, 2));
  packed[1] = 1.5;
  CHECK_FALSE(check_membership(BlockKind::psd, packed, 1e-9, 2));
}

TEST_CASE("packed symmetric round trip preserves inner products") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int side = 1; side <= 4; ++side) {
    MatrixXd raw = MatrixXd::NullaryExpr(side, side, [&]() { return gauss(rng); });
    MatrixXd a = 0.5 * (raw + raw.transpose());
    raw = MatrixXd::NullaryExpr(side, side, [&]() { return gauss(rng); });
    MatrixXd b = 0.5 * (raw + raw.transpose());
    CHECK((smat(svec(a), side) - a).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(svec(a).dot(svec(b)) == doctest::Approx((a * b).trace()).epsilon(1e-12));
    CHECK(svec(a).size() == svec_size(side));
  }
}

namespace {

// Programs with a known interior primal-dual pair, so optimality and weak
// duality can be checked without an external reference.
ConeProgram random_feasible_program(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nvar(2, 6);
  std::uniform_real_distribution<double> unif(0.5, 2.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = nvar(rng);

  ConeProgram p;
  p.num_vars = n;
  VectorXd x0 = VectorXd::NullaryExpr(n, [&]() { return gauss(rng); });

  std::uniform_int_distribution<int> northant(1, 4);
  std::bernoulli_distribution coin(0.5);

  struct Piece {
    ConeBlock block;
    VectorXd s0, z0;
  };
  std::vector<Piece> pieces;

  {  // orthant piece, always present
    const int d = northant(rng);
    Piece pc;
    pc.block.kind = BlockKind::nonneg;
    pc.block.coeff = MatrixXd::NullaryExpr(d, n, [&]() { return gauss(rng); });
    pc.s0 = VectorXd::NullaryExpr(d, [&]() { return unif(rng); });
    pc.z0 = VectorXd::NullaryExpr(d, [&]() { return unif(rng); });
    pieces.push_back(std::move(pc));
  }
  if (coin(rng)) {
    std::uniform_int_distribution<int> socd(2, 4);
    const int d = socd(rng);
    Piece pc;
    pc.block.kind = BlockKind::second_order;
    pc.block.coeff = MatrixXd::NullaryExpr(d, n, [&]() { return gauss(rng); });
    auto interior = [&]() {
      VectorXd v = VectorXd::NullaryExpr(d, [&]() { return gauss(rng); });
      v[0] = v.tail(d - 1).norm() + unif(rng);
      return v;
    };
    pc.s0 = interior();
    pc.z0 = interior();
    pieces.push_back(std::move(pc));
  }
  if (coin(rng)) {
    const int side = 2;
    Piece pc;
    pc.block.kind = BlockKind::psd;
    pc.block.side = side;
    pc.block.coeff = MatrixXd::NullaryExpr(svec_size(side), n, [&]() { return gauss(rng); });
    auto interior = [&]() {
      MatrixXd q = MatrixXd::NullaryExpr(side, side, [&]() { return gauss(rng); });
      return svec(MatrixXd(q.transpose() * q + 0.5 * MatrixXd::Identity(side, side)));
    };
    pc.s0 = interior();
    pc.z0 = interior();
    pieces.push_back(std::move(pc));
  }

  std::uniform_int_distribution<int> neq(0, 2);
  const int peq = std::min(neq(rng), n - 1);
  VectorXd y0 = VectorXd::NullaryExpr(peq, [&]() { return gauss(rng); });
  if (peq > 0) {
    p.eq_coeff = MatrixXd::NullaryExpr(peq, n, [&]() { return gauss(rng); });
    p.eq_rhs = p.eq_coeff * x0;
  }

  // h = G x0 + s0 keeps x0 strictly feasible; c = -(G' z0 + A' y0) makes
  // (y0, z0) dual feasible, so both problems attain finite values.
  VectorXd cvec = VectorXd::Zero(n);
  for (auto& pc : pieces) {
    pc.block.offset = pc.s0 - pc.block.coeff * x0;  // slack C x0 + q = s0
    cvec += pc.block.coeff.transpose() * pc.z0;
    p.blocks.push_back(pc.block);
  }
  if (peq > 0) cvec += p.eq_coeff.transpose() * y0;
  p.objective = cvec;
  return p;
}

}  // namespace

TEST_CASE("random feasible ensemble: optimality, weak duality, reproducibility") {
  std::mt19937_64 rng(20240811);
  int solved = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ConeProgram p = random_feasible_program(rng);
    ConeSolution sol = solve(p);
    REQUIRE_MESSAGE(sol.status == SolveStatus::optimal, "trial ", trial);
    ++solved;

    // primal feasibility of the reported point
    int off = 0;
    for (const auto& b : p.blocks) {
      VectorXd slack = b.coeff * sol.primal + b.offset;
      CHECK(check_membership(b.kind, slack, 1e-6, b.side));
      off += b.dim();
    }
    (void)off;
    if (p.eq_coeff.rows() > 0)
      CHECK((p.eq_coeff * sol.primal - p.eq_rhs).cwiseAbs().maxCoeff() < 1e-6);

    // weak duality with a small tolerance for the reported pair
    CHECK(sol.dual_objective <= sol.objective_value + 1e-6);
    CHECK(sol.gap < 1e-6);

    ConeSolution again = solve(p);
    REQUIRE(again.status == SolveStatus::optimal);
    CHECK((again.primal - sol.primal).cwiseAbs().maxCoeff() == 0.0);
    CHECK(again.iterations == sol.iterations);
  }
  CHECK(solved == 100);
}
