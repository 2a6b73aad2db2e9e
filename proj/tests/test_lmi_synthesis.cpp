#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lpvcar/errors.hpp"
#include "lpvcar/lmi_synthesis.hpp"

using namespace lpvcar;
using Eigen::MatrixXd;

namespace {

LtiVertex scalar(double a, double b) {
  return {MatrixXd::Constant(1, 1, a), MatrixXd::Constant(1, 1, b)};
}

MatrixXd s1(double x) { return MatrixXd::Constant(1, 1, x); }

double lambda_max(const MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

// Independent re-check of a returned point: every constraint below -margin.
void expect_verified(const SdpProblem& p, const SynthesisResult& r) {
  for (const auto& c : p.constraints) {
    const MatrixXd f = c.map(r.Q, r.R);
    EXPECT_LT(lambda_max(0.5 * (f + f.transpose())), -c.margin) << c.label;
  }
}

// Random stable pair of vertices sharing a structure that a static gain can place.
std::vector<LtiVertex> random_vertices(std::mt19937_64& rng, int n, int m, int count) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<LtiVertex> out;
  MatrixXd base = MatrixXd::NullaryExpr(n, n, [&] { return nd(rng); });
  MatrixXd b = MatrixXd::NullaryExpr(n, m, [&] { return nd(rng); });
  for (int i = 0; i < count; ++i) {
    MatrixXd a = base + 0.1 * MatrixXd::NullaryExpr(n, n, [&] { return nd(rng); });
    out.push_back({a, b});
  }
  return out;
}

}  // namespace

TEST(Contractivity, StableScalarIsFeasible) {
  const auto p = contractivity_lmi({scalar(-1.0, 0.0)}, 0.5);
  ASSERT_EQ(p.constraints.size(), 2u);
  EXPECT_DOUBLE_EQ(p.constraints[0].map(s1(1.0), s1(0.0))(0, 0), -1.0);
  const auto r = solve_feasibility(p);
  ASSERT_TRUE(r.feasible()) << r.message;
  expect_verified(p, r);
}

TEST(Contractivity, UnstableScalarWithoutInputIsInfeasible) {
  for (double beta : {0.1, 0.5, 3.0}) {
    const auto r = solve_feasibility(contractivity_lmi({scalar(1.0, 0.0)}, beta));
    EXPECT_EQ(r.status, SdpStatus::kInfeasible) << r.message;
    EXPECT_GT(r.worst_residual, 0.0);
  }
}

TEST(Contractivity, ScalarWithInputGetsStabilized) {
  const auto p = contractivity_lmi({scalar(1.0, 1.0)}, 0.5);
  EXPECT_DOUBLE_EQ(p.constraints[0].map(s1(1.0), s1(-3.0))(0, 0), -3.0);
  const auto r = solve_feasibility(p);
  ASSERT_TRUE(r.feasible()) << r.message;
  expect_verified(p, r);
  EXPECT_LE(1.0 + r.K(0, 0), -0.5 + 1e-6);
  // The hand-picked gain K = -3 puts the pole at -2.
  const auto rep = certify_gain(s1(-3.0), {scalar(1.0, 1.0)}, half_plane_region(0.5));
  EXPECT_TRUE(rep.pass);
  EXPECT_DOUBLE_EQ(rep.worst_abscissa, -2.0);
}

TEST(Contractivity, CommonLyapunovPair) {
  const auto p = contractivity_lmi({scalar(-1.0, 0.0), scalar(-2.0, 0.0)}, 0.5);
  const auto r = solve_feasibility(p);
  ASSERT_TRUE(r.feasible());
  EXPECT_GT(r.Q(0, 0), 0.0);
  expect_verified(p, r);
}

TEST(Contractivity, InvalidLevel) {
  EXPECT_THROW(contractivity_lmi({scalar(-1.0, 0.0)}, 0.0), Error);
  EXPECT_THROW(contractivity_lmi({}, 1.0), Error);
}

TEST(Strip, Membership) {
  const auto s = vertical_strip_region(-2.0, -40.0);
  EXPECT_TRUE(s.contains({-21.0, 0.0}));
  EXPECT_TRUE(s.contains({-21.0, 500.0}));
  EXPECT_FALSE(s.contains({-1.0, 0.0}));
  EXPECT_FALSE(s.contains({-41.0, 0.0}));
  EXPECT_FALSE(s.contains({-2.0, 0.0}));
  EXPECT_FALSE(s.contains({-40.0, 0.0}));
  EXPECT_DOUBLE_EQ(s.depth({-21.0, 3.0}), 19.0);
  EXPECT_DOUBLE_EQ(s.depth({-3.0, 0.0}), 1.0);
}

TEST(Strip, InvalidBounds) {
  for (auto [hi, lo] : {std::pair{-40.0, -2.0}, std::pair{1.0, -40.0}, std::pair{-2.0, -2.0}}) {
    try {
      vertical_strip_region(hi, lo);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidStrip);
    }
  }
}

TEST(Strip, ScalarVerdicts) {
  const auto strip = vertical_strip_region(-2.0, -40.0);
  const auto inside = dstab_lmi({scalar(-10.0, 0.0)}, strip);
  const auto r1 = solve_feasibility(inside);
  ASSERT_TRUE(r1.feasible()) << r1.message;
  expect_verified(inside, r1);

  const auto r2 = solve_feasibility(dstab_lmi({scalar(-1.0, 0.0)}, strip));
  EXPECT_EQ(r2.status, SdpStatus::kInfeasible) << r2.message;

  const auto p3 = dstab_lmi({scalar(0.0, 1.0)}, strip);
  const MatrixXd f = p3.constraints[0].map(s1(1.0), s1(-21.0));
  EXPECT_DOUBLE_EQ(f(0, 0), 4.0 - 42.0);   // 2 Re z - 2 lambda_max at z = -21
  EXPECT_DOUBLE_EQ(f(1, 1), -80.0 + 42.0);  // 2 lambda_min - 2 Re z
  EXPECT_EQ(f(0, 1), 0.0);
  const auto r3 = solve_feasibility(p3);
  ASSERT_TRUE(r3.feasible());
  EXPECT_GT(r3.K(0, 0), -40.0);
  EXPECT_LT(r3.K(0, 0), -2.0);
}

TEST(Region, EmptyRegionIsRejected) {
  LmiRegion r;
  r.L = MatrixXd::Constant(1, 1, 1.0);
  r.M = MatrixXd::Zero(1, 1);
  EXPECT_THROW(r.validate(7), Error);
  LmiRegion asym;
  asym.L = MatrixXd::Identity(2, 2);
  asym.L(0, 1) = 1.0;
  asym.M = MatrixXd::Identity(2, 2);
  EXPECT_THROW(asym.validate(), Error);
  EXPECT_NO_THROW(vertical_strip_region().validate(123));
}

TEST(Dstab, KroneckerDimensionsAndSymmetry) {
  std::mt19937_64 rng(3);
  const auto verts = random_vertices(rng, 8, 3, 4);
  const auto p = dstab_lmi(verts, vertical_strip_region());
  ASSERT_EQ(p.constraints.size(), 5u);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 5; ++trial) {
    MatrixXd q = MatrixXd::NullaryExpr(8, 8, [&] { return nd(rng); });
    q = q * q.transpose();
    const MatrixXd r = MatrixXd::NullaryExpr(3, 8, [&] { return nd(rng); });
    for (std::size_t i = 0; i + 1 < p.constraints.size(); ++i) {
      const MatrixXd f = p.constraints[i].map(q, r);
      ASSERT_EQ(f.rows(), 16);
      ASSERT_EQ(p.constraints[i].size, 16);
      EXPECT_LE((f - f.transpose()).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + f.cwiseAbs().maxCoeff()));
    }
    const MatrixXd c = contractivity_lmi(verts, 2.0).constraints[0].map(q, r);
    EXPECT_LE((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + c.cwiseAbs().maxCoeff()));
  }
}

TEST(Soundness, FeasibleGainsCertify) {
  std::mt19937_64 rng(11);
  const auto strip = vertical_strip_region(-2.0, -40.0);
  int solved = 0;
  for (int trial = 0; trial < 6; ++trial) {
    const auto verts = random_vertices(rng, 4, 2, 4);
    const auto pd = dstab_lmi(verts, strip);
    const auto rd = solve_feasibility(pd);
    if (rd.feasible()) {
      ++solved;
      expect_verified(pd, rd);
      EXPECT_TRUE(certify_gain(rd.K, verts, strip).pass);
    }
    const auto pc = contractivity_lmi(verts, 1.0);
    const auto rc = solve_feasibility(pc);
    if (rc.feasible()) {
      const auto rep = certify_gain(rc.K, verts, half_plane_region(1.0));
      EXPECT_LE(rep.worst_abscissa, -1.0 + 1e-6);
    }
  }
  EXPECT_GT(solved, 0);
}

TEST(Soundness, GainIsScaleInvariant) {
  const std::vector<LtiVertex> verts = {scalar(1.0, 1.0), scalar(2.0, 1.5)};
  const auto p = contractivity_lmi(verts, 0.5);
  const auto r = solve_feasibility(p);
  ASSERT_TRUE(r.feasible());
  for (double gamma : {0.5, 3.0, 40.0}) {
    const MatrixXd q = gamma * r.Q, rr = gamma * r.R;
    for (std::size_t i = 0; i + 1 < p.constraints.size(); ++i) {
      EXPECT_LT(lambda_max(p.constraints[i].map(q, rr)), 0.0);
    }
    EXPECT_NEAR((rr * q.inverse())(0, 0), r.K(0, 0), 1e-10 * std::abs(r.K(0, 0)));
  }
}

TEST(Certify, ZeroGainOnUnstableSetFails) {
  const std::vector<LtiVertex> verts = {scalar(-5.0, 1.0), scalar(1.0, 1.0), scalar(3.0, 1.0)};
  const auto rep = certify_gain(s1(0.0), verts, vertical_strip_region());
  EXPECT_FALSE(rep.pass);
  ASSERT_EQ(rep.offending.size(), 2u);
  EXPECT_EQ(rep.offending[0], 1u);
  EXPECT_EQ(rep.offending[1], 2u);
  EXPECT_DOUBLE_EQ(rep.worst_abscissa, 3.0);
}

TEST(Certify, WideRegionAcceptsAnyHurwitzLoop) {
  MatrixXd a(2, 2);
  a << 0.0, 1.0, -0.01, -0.001;  // Hurwitz but slow, far outside the strip
  const std::vector<LtiVertex> verts = {{a, MatrixXd::Zero(2, 1)}};
  const MatrixXd k = MatrixXd::Zero(1, 2);
  EXPECT_FALSE(certify_gain(k, verts, vertical_strip_region()).pass);
  EXPECT_TRUE(certify_gain(k, verts, half_plane_region(1e-12)).pass);
  EXPECT_EQ(certify_gain(k, verts, half_plane_region(1e-12), 0.0, 4).worst_depth,
            certify_gain(k, verts, half_plane_region(1e-12), 0.0, 1).worst_depth);
}

TEST(Solver, StallIsNotInfeasibility) {
  SdpOptions opt;
  opt.max_newton_steps = 1;
  opt.polish = true;
  std::mt19937_64 rng(5);
  const auto p = dstab_lmi(random_vertices(rng, 4, 2, 2), vertical_strip_region());
  const auto r = solve_feasibility(p, BarrierSdpSolver(opt));
  EXPECT_EQ(r.status, SdpStatus::kStalled);
}

TEST(Solver, RepeatableForFixedThreadCount) {
  std::mt19937_64 rng(9);
  const auto p = dstab_lmi(random_vertices(rng, 5, 2, 8), vertical_strip_region());
  for (int threads : {1, 3}) {
    const auto a = solve_feasibility(p, threads);
    const auto b = solve_feasibility(p, threads);
    EXPECT_EQ(a.status, b.status);
    EXPECT_EQ(a.newton_steps, b.newton_steps);
    EXPECT_TRUE((a.K.array() == b.K.array()).all());
  }
}

TEST(Solver, RejectsMalformedProblems) {
  SdpProblem p;
  p.n = 1;
  p.m = 1;
  AffineConstraint c;
  c.size = 2;
  c.map = [](const MatrixXd& q, const MatrixXd&) -> MatrixXd { return q; };  // wrong size
  p.constraints.push_back(c);
  EXPECT_THROW(solve_feasibility(p), Error);
}
