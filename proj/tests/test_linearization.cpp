#include <cmath>

#include <gtest/gtest.h>

#include "lpvcar/errors.hpp"
#include "lpvcar/linearization.hpp"
#include "test_support.hpp"

using namespace lpvcar;
using lpvcar::test::default_reference;
using lpvcar::test::loop_point;
using lpvcar::test::full_jacobian;
using lpvcar::test::linear_bicycle;
using lpvcar::test::Analytic;

namespace {

VehicleState sample_state() {
  VehicleState s;
  s.v = 19.4;
  s.u = 0.3;
  s.r = 0.15;
  s.omega_wf = 1.01 * 19.4 / 0.30;
  s.omega_wr = 0.995 * 19.4 / 0.30;
  s.psi = 0.1;
  return s;
}

VehicleInput sample_input() { return {0.04, 50.0, -30.0}; }

template <typename M1, typename M2>
void expect_relative(const M1& got, const M2& want, double rel, double floor) {
  for (Eigen::Index i = 0; i < want.rows(); ++i) {
    for (Eigen::Index j = 0; j < want.cols(); ++j) {
      if (std::abs(want(i, j)) <= floor) continue;
      EXPECT_NEAR(got(i, j), want(i, j), rel * std::abs(want(i, j))) << "entry " << i << "," << j;
    }
  }
}

}  // namespace

TEST(Jacobians, LinearBicycleOracle) {
  VehicleParams p;
  p.tire_model = TireModel::kLinear;
  p.saturation = SaturationMode::kIdentity;
  p.f_r = 0.0;
  const auto pt = loop_point(sample_state(), sample_input(), p);
  const auto lin = jacobians_at(pt, p);
  const auto closed = sector_closed_matrices(lin, Mat6::Identity());
  const Analytic a = linear_bicycle(pt.state, pt.input, p);
  expect_relative(closed.A_tilde, a.A, 1e-6, 1e-3);
  expect_relative(closed.B_tilde, a.B, 1e-6, 1e-3);
}

TEST(Jacobians, StepHalvingConsistency) {
  VehicleParams p;
  const auto pt = loop_point(sample_state(), sample_input(), p);
  const auto a = jacobians_at(pt, p, 1e-5);
  const auto b = jacobians_at(pt, p, 5e-6);
  auto check = [](const auto& x, const auto& y) {
    const double scale = y.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      for (Eigen::Index j = 0; j < y.cols(); ++j) {
        EXPECT_LE(std::abs(x(i, j) - y(i, j)), 1e-4 * std::abs(y(i, j)) + 1e-10 * scale);
      }
    }
  };
  check(a.A, b.A);
  check(a.B, b.B);
  check(a.C, b.C);
  check(a.D, b.D);
  check(a.D_sigma, b.D_sigma);
}

TEST(Jacobians, StraightRollingDecouples) {
  VehicleParams p;
  VehicleState s;
  s.v = 20.0;
  s.omega_wf = s.omega_wr = 20.0 / p.tire.r_e;
  const auto pt = loop_point(s, {}, p);
  const auto lin = jacobians_at(pt, p);
  const Mat5 full = sector_closed_matrices(lin, Mat6::Identity()).A_tilde;
  const double scale = full.cwiseAbs().maxCoeff();
  for (int lat : {1, 2}) {
    for (int lon : {0, 3, 4}) {
      EXPECT_LT(std::abs(full(lat, lon)), 1e-7 * scale);
      EXPECT_LT(std::abs(full(lon, lat)), 1e-7 * scale);
    }
  }
}

TEST(Jacobians, RejectsPointOffTheLoop) {
  VehicleParams p;
  auto pt = loop_point(sample_state(), sample_input(), p);
  pt.sigma(4) += 50.0;
  EXPECT_THROW(jacobians_at(pt, p), Error);
}

TEST(Jacobians, LoadColumnsCarryRollingResistance) {
  VehicleParams p;
  const auto pt = loop_point(sample_state(), sample_input(), p);
  const auto lin = jacobians_at(pt, p);
  const double cd = std::cos(pt.input.delta_f), sd = std::sin(pt.input.delta_f);
  EXPECT_NEAR(lin.B_sigma(0, 0), -p.f_r * cd / p.m, 1e-15);
  EXPECT_NEAR(lin.B_sigma(0, 1), -p.f_r / p.m, 1e-15);
  EXPECT_NEAR(lin.B_sigma(1, 0), -p.f_r * sd / p.m, 1e-15);
  EXPECT_NEAR(lin.B_sigma(2, 0), -p.f_r * sd * p.ell_f / p.i_zz, 1e-15);
}

TEST(SectorClosed, Collapses) {
  VehicleParams p;
  const auto pt = loop_point(sample_state(), sample_input(), p);
  auto lin = jacobians_at(pt, p);
  const auto zero = sector_closed_matrices(lin, Mat6::Zero());
  EXPECT_EQ(zero.A_tilde, lin.A);
  EXPECT_EQ(zero.B_tilde, lin.B);
  Mat6 k = Mat6::Zero();
  k.diagonal() << 0.9, 0.8, 0.95, 0.97, 0.7, 0.6;
  lin.D_sigma.setZero();
  const auto nod = sector_closed_matrices(lin, k);
  EXPECT_LT((nod.A_tilde - (lin.A + lin.B_sigma * k * lin.C)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SectorClosed, SingularLoopThrows) {
  LinearizedSystem lin;
  lin.D_sigma = Mat6::Identity();
  try {
    sector_closed_matrices(lin, Mat6::Identity());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularLoop);
  }
}

TEST(SectorClosed, IdentitySlopesMatchSmoothedModel) {
  VehicleParams p;
  p.saturation = SaturationMode::kIdentity;
  const auto pt = loop_point(sample_state(), sample_input(), p);
  const Mat5 closed = sector_closed_matrices(jacobians_at(pt, p), Mat6::Identity()).A_tilde;
  const Mat5 direct = full_jacobian(pt, p);
  const double scale = direct.cwiseAbs().maxCoeff();
  EXPECT_LT((closed - direct).cwiseAbs().maxCoeff(), 1e-5 * scale);
}

TEST(SectorClosed, SectorMidpointsTrackFullJacobian) {
  const auto& ref = default_reference();
  VehicleParams p;
  const auto sec = sector_slopes(ref, p);
  for (std::size_t k : {std::size_t{1000}, std::size_t{2500}, std::size_t{4000}}) {
    const auto pt = operating_point(ref, k);
    const Mat5 closed = sector_closed_matrices(jacobians_at(pt, p), sec.K_sigma).A_tilde;
    const Mat5 direct = full_jacobian(pt, p);
    const double scale = direct.cwiseAbs().maxCoeff();
    for (int i = 0; i < kDynStates; ++i) {
      for (int j = 0; j < kDynStates; ++j) {
        if (std::abs(direct(i, j)) < 1e-2 * scale) continue;  // dominant entries only
        EXPECT_NEAR(closed(i, j), direct(i, j), 0.05 * std::abs(direct(i, j)))
            << "t=" << ref.t[k] << " entry " << i << "," << j;
      }
    }
  }
}

TEST(Sectors, BoundsAndValidity) {
  const auto& ref = default_reference();
  VehicleParams p;
  const auto sec = sector_slopes(ref, p);
  for (std::size_t i = 0; i < kChannels; ++i) {
    EXPECT_GE(sec.k_min[i], 0.0);
    EXPECT_LE(sec.k_min[i], sec.k_max[i]);
    EXPECT_LE(sec.k_max[i], 1.0 + 1e-6);
    EXPECT_DOUBLE_EQ(sec.K_sigma(static_cast<int>(i), static_cast<int>(i)),
                     0.5 * (sec.k_min[i] + sec.k_max[i]));
  }
  // Longitudinal channels stay far from their bounds on a torque-free maneuver.
  EXPECT_NEAR(sec.k_min[2], 1.0, 1e-3);
  EXPECT_NEAR(sec.k_min[3], 1.0, 1e-3);
  const double c = 0.5 * p.m * p.g;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    for (int i = 0; i < kChannels; ++i) {
      const double centre = i < 2 ? c : 0.0;
      const double dh = ref.h[k](i) - centre, ds = ref.sigma[k](i) - centre;
      const double lo = sec.k_min[static_cast<std::size_t>(i)] * dh;
      const double hi = sec.k_max[static_cast<std::size_t>(i)] * dh;
      const double tol = 1e-9 * (1.0 + std::abs(dh));
      ASSERT_GE(ds, std::min(lo, hi) - tol);
      ASSERT_LE(ds, std::max(lo, hi) + tol);
    }
  }
}

TEST(Sectors, LateralSectorWidensOnAQuickLaneChange) {
  VehicleParams p;
  ManeuverSpec s;
  s.target_lateral = 6.0;
  s.steering.period = 2.4;
  const auto sec = sector_slopes(generate_reference(s, p), p);
  EXPECT_LT(sec.k_min[4], 0.9);
  EXPECT_LT(sec.k_min[5], 0.9);
}

TEST(Sectors, ZeroInputSlopeIsOne) {
  VehicleParams p;
  ManeuverSpec s;
  s.steering.kind = SteeringProfile::Kind::kNone;
  s.duration = 0.5;
  const auto ref = generate_reference(s, p);
  for (const Vec6& sl : channel_slopes(ref, p)) {
    EXPECT_EQ(sl(4), 1.0);
    EXPECT_EQ(sl(5), 1.0);
  }
}

TEST(Augment, ErrorRows) {
  Mat5 a = Mat5::Random();
  Mat53 b = Mat53::Random();
  const auto s = augment_error_dynamics(a, b, 0.0, 19.0);
  EXPECT_EQ((s.A.topLeftCorner<5, 5>()), a);
  EXPECT_EQ(s.B.topRows<5>(), b);
  EXPECT_TRUE(s.B.bottomRows<3>().isZero());
  Eigen::Matrix<double, 3, 8> rows = Eigen::Matrix<double, 3, 8>::Zero();
  rows(0, 0) = 1.0;
  rows(1, 7) = 19.0;
  rows(2, 2) = 1.0;
  EXPECT_EQ(s.A.bottomRows<3>(), rows);
  const auto t = augment_error_dynamics(a, b, 0.2, 19.0);
  EXPECT_EQ(t.A(5, 0), 1.0);
  EXPECT_DOUBLE_EQ(t.A(6, 0), 0.2);
  EXPECT_DOUBLE_EQ(t.A(6, 7), 19.0 * std::cos(0.2));
  EXPECT_THROW(augment_error_dynamics(a, b, 1.0, 19.0), Error);
}

TEST(Selection, ConstantFamilyIsDegenerate) {
  AugmentedSystem s = augment_error_dynamics(Mat5::Identity(), Mat53::Ones(), 0.0, 19.0);
  try {
    select_varying_parameters({s, s, s});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateFamily);
  }
}

TEST(Selection, SingleVaryingEntry) {
  std::vector<AugmentedSystem> fam;
  for (double x : {0.3, -0.2, 0.7, 0.1}) {
    Mat5 a = Mat5::Identity();
    a(2, 3) = x;
    fam.push_back(augment_error_dynamics(a, Mat53::Ones(), 0.0, 19.0));
  }
  const auto sel = select_varying_parameters(fam, 6);
  EXPECT_EQ(sel.varying_entries, 1);
  ASSERT_EQ(sel.parameters.size(), 3u);  // the entry plus psi0 and v0 cos psi0
  EXPECT_EQ(sel.parameters[0].row, 2);
  EXPECT_EQ(sel.parameters[0].col, 3);
  EXPECT_DOUBLE_EQ(sel.parameters[0].lower, -0.2);
  EXPECT_DOUBLE_EQ(sel.parameters[0].upper, 0.7);
  EXPECT_EQ(sel.parameters[1].label, "psi0");
  EXPECT_EQ(sel.parameters[2].label, "v0*cos(psi0)");
}

TEST(Polytope, ReferenceFamily) {
  const auto& ref = default_reference();
  VehicleParams p;
  const auto fam = lpv_family(ref, p, sector_slopes(ref, p).K_sigma);
  const auto sel = select_varying_parameters(fam, 6);
  ASSERT_EQ(sel.parameters.size(), 8u);
  EXPECT_GE(sel.varying_entries, 6);
  std::printf("time-varying entries of (A_tilde, B_tilde): %d\n", sel.varying_entries);

  // Every sample lies inside the descriptor box.
  for (const auto& s : fam) {
    for (const auto& d : sel.parameters) {
      const double x = d.matrix == ParameterDescriptor::Matrix::kA ? s.A(d.row, d.col)
                                                                   : s.B(d.row, d.col);
      ASSERT_GE(x, d.lower);
      ASSERT_LE(x, d.upper);
    }
  }

  const auto poly = build_polytope(sel);
  const auto verts = poly.vertices();
  ASSERT_EQ(verts.size(), 256u);
  for (std::size_t i = 0; i < verts.size(); ++i) {
    EXPECT_EQ(verts[i].A.rows(), 8);
    EXPECT_EQ(verts[i].B.cols(), 3);
    for (std::size_t j = 0; j < sel.parameters.size(); ++j) {
      const auto& d = sel.parameters[j];
      const double x = d.matrix == ParameterDescriptor::Matrix::kA ? verts[i].A(d.row, d.col)
                                                                   : verts[i].B(d.row, d.col);
      EXPECT_EQ(x, ((i >> j) & 1U) ? d.upper : d.lower);
    }
    // Entries outside the descriptor list keep the trajectory mean.
    Mat8 mask = Mat8::Ones();
    Mat83 bmask = Mat83::Ones();
    for (const auto& d : sel.parameters) {
      if (d.matrix == ParameterDescriptor::Matrix::kA) mask(d.row, d.col) = 0.0;
      else bmask(d.row, d.col) = 0.0;
    }
    EXPECT_EQ(verts[i].A.cwiseProduct(mask), sel.base.A.cwiseProduct(mask));
    EXPECT_EQ(verts[i].B.cwiseProduct(bmask), sel.base.B.cwiseProduct(bmask));
  }
}

TEST(Polytope, SizesAndLimit) {
  ParameterDescriptor d;
  d.row = 0;
  d.col = 1;
  d.lower = -1.0;
  d.upper = 2.0;
  AugmentedSystem base;
  PolytopicModel one(base, {d});
  ASSERT_EQ(one.vertex_count(), 2u);
  EXPECT_EQ(one.vertex(0).A(0, 1), -1.0);
  EXPECT_EQ(one.vertex(1).A(0, 1), 2.0);
  PolytopicModel eight(base, std::vector<ParameterDescriptor>(8, d));
  EXPECT_EQ(eight.vertices().size(), 256u);
  try {
    PolytopicModel too_many(base, std::vector<ParameterDescriptor>(13, d));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooManyParameters);
  }
}
