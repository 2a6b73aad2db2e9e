#include "lpvcar/linearization.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "lpvcar/errors.hpp"

namespace lpvcar {

namespace {

// Central-difference Jacobian of f at x.
template <int M, int N, typename F>
Eigen::Matrix<double, M, N> central_difference(const F& f, const Eigen::Matrix<double, N, 1>& x,
                                               double rel_step) {
  Eigen::Matrix<double, M, N> jac;
  for (int j = 0; j < N; ++j) {
    const double step = rel_step * std::max(1.0, std::abs(x(j)));
    Eigen::Matrix<double, N, 1> xp = x;
    Eigen::Matrix<double, N, 1> xm = x;
    xp(j) += step;
    xm(j) -= step;
    jac.col(j) = (f(xp) - f(xm)) / (xp(j) - xm(j));
  }
  return jac;
}

VehicleState with_dynamic(VehicleState s, const Vec5& d) {
  s.set_dynamic(d);
  return s;
}

double channel_centre(int channel, const VehicleParams& p) {
  if (channel < 2 && p.saturation == SaturationMode::kLogistic) return 0.5 * p.weight();
  return 0.0;
}

}  // namespace

OperatingPoint operating_point(const ReferenceTrajectory& ref, std::size_t k) {
  OperatingPoint op;
  op.t = ref.t.at(k);
  op.state = ref.x.at(k);
  op.input = ref.u.at(k);
  op.xdot = ref.xdot.at(k).head<kDynStates>();
  op.sigma = ref.sigma.at(k);
  return op;
}

LinearizedSystem jacobians_at(const OperatingPoint& pt, const VehicleParams& p,
                              double rel_step) {
  const Vec5 x0 = pt.state.dynamic();
  const Vec3 u0 = pt.input.to_vector();
  const Vec5& xd0 = pt.xdot;
  const SigmaVector& s0 = pt.sigma;

  // The point has to satisfy the implicit model, otherwise the split below is meaningless.
  {
    const Vec5 xd = explicit_dynamics(pt.state, pt.input, p) + sigma_matrix(pt.input, p) * s0;
    const SigmaVector s = saturate_channels(saturation_inputs(xd0, pt.state, pt.input, s0, p), p);
    const double scale = 1.0 + s0.cwiseAbs().maxCoeff();
    if ((xd - xd0).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + xd0.cwiseAbs().maxCoeff()) ||
        (s - s0).cwiseAbs().maxCoeff() > 1e-8 * scale) {
      throw Error(ErrorCode::kInvalidArgument, "operating point violates the algebraic loop");
    }
  }

  auto g_of_x = [&](const Vec5& x) {
    return explicit_dynamics(with_dynamic(pt.state, x), pt.input, p);
  };
  auto g_of_u = [&](const Vec3& u) {
    const VehicleInput in = VehicleInput::from_vector(u);
    return Vec5(explicit_dynamics(pt.state, in, p) + sigma_matrix(in, p) * s0);
  };
  auto h_of_xdot = [&](const Vec5& xd) {
    return saturation_inputs(xd, pt.state, pt.input, s0, p);
  };
  auto h_of_x = [&](const Vec5& x) {
    return saturation_inputs(xd0, with_dynamic(pt.state, x), pt.input, s0, p);
  };
  auto h_of_u = [&](const Vec3& u) {
    return saturation_inputs(xd0, pt.state, VehicleInput::from_vector(u), s0, p);
  };
  auto h_of_sigma = [&](const Vec6& s) {
    return saturation_inputs(xd0, pt.state, pt.input, s, p);
  };

  LinearizedSystem lin;
  lin.t = pt.t;
  lin.A = central_difference<kDynStates, kDynStates>(g_of_x, x0, rel_step);
  lin.B = central_difference<kDynStates, kInputs>(g_of_u, u0, rel_step);
  lin.B_sigma = sigma_matrix(pt.input, p);
  const Mat65 h_xdot = central_difference<kChannels, kDynStates>(h_of_xdot, xd0, rel_step);
  const Mat65 h_x = central_difference<kChannels, kDynStates>(h_of_x, x0, rel_step);
  const Mat63 h_u = central_difference<kChannels, kInputs>(h_of_u, u0, rel_step);
  const Mat6 h_s = central_difference<kChannels, kChannels>(h_of_sigma, s0, rel_step);
  lin.C = h_xdot * lin.A + h_x;
  lin.D = h_xdot * lin.B + h_u;
  lin.D_sigma = h_xdot * lin.B_sigma + h_s;
  return lin;
}

std::vector<LinearizedSystem> linearize_reference(const ReferenceTrajectory& ref,
                                                  const VehicleParams& params,
                                                  double rel_step) {
  std::vector<LinearizedSystem> out;
  out.reserve(ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) {
    out.push_back(jacobians_at(operating_point(ref, k), params, rel_step));
  }
  return out;
}

std::vector<Vec6> channel_slopes(const ReferenceTrajectory& ref, const VehicleParams& p,
                                 double tol_h) {
  std::vector<Vec6> out(ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) {
    for (int i = 0; i < kChannels; ++i) {
      const double c = channel_centre(i, p);
      const double dh = ref.h[k](i) - c;
      out[k](i) = std::abs(dh) < tol_h ? 1.0 : (ref.sigma[k](i) - c) / dh;
    }
  }
  return out;
}

SectorBounds sector_slopes(const ReferenceTrajectory& ref, const VehicleParams& params,
                           double tol_h) {
  SectorBounds out;
  out.k_min.fill(std::numeric_limits<double>::infinity());
  out.k_max.fill(-std::numeric_limits<double>::infinity());
  for (const Vec6& s : channel_slopes(ref, params, tol_h)) {
    for (int i = 0; i < kChannels; ++i) {
      out.k_min[static_cast<std::size_t>(i)] = std::min(out.k_min[static_cast<std::size_t>(i)], s(i));
      out.k_max[static_cast<std::size_t>(i)] = std::max(out.k_max[static_cast<std::size_t>(i)], s(i));
    }
  }
  out.K_sigma = Mat6::Zero();
  for (int i = 0; i < kChannels; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    out.K_sigma(i, i) = 0.5 * (out.k_min[ui] + out.k_max[ui]);
  }
  return out;
}

ClosedSector sector_closed_matrices(const LinearizedSystem& lin, const Mat6& K_sigma) {
  const Mat6 loop = Mat6::Identity() - lin.D_sigma * K_sigma;
  const Eigen::JacobiSVD<Mat6> svd(loop);
  const auto& sv = svd.singularValues();
  const double cond = sv(0) / sv(kChannels - 1);
  if (!(cond < 1e8)) {
    throw Error(ErrorCode::kSingularLoop,
                "I - D_sigma K_sigma is ill-conditioned (cond " + std::to_string(cond) + ")");
  }
  const Eigen::PartialPivLU<Mat6> lu(loop);
  const Eigen::Matrix<double, kDynStates, kChannels> gain = lin.B_sigma * K_sigma;
  ClosedSector out;
  out.A_tilde = lin.A + gain * lu.solve(lin.C);
  out.B_tilde = lin.B + gain * lu.solve(lin.D);
  return out;
}

AugmentedSystem augment_error_dynamics(const Mat5& A_tilde, const Mat53& B_tilde, double psi0,
                                       double v0) {
  if (!(std::abs(psi0) < std::numbers::pi / 4.0)) {
    throw Error(ErrorCode::kInvalidArgument, "reference heading outside the small-angle regime");
  }
  AugmentedSystem out;
  out.A.topLeftCorner<kDynStates, kDynStates>() = A_tilde;
  out.B.topRows<kDynStates>() = B_tilde;
  out.A(5, 0) = 1.0;                       // x_L' = dv
  out.A(6, 0) = psi0;                      // y_L' = dv psi0 + dpsi v0 cos psi0
  out.A(6, 7) = v0 * std::cos(psi0);
  out.A(7, 2) = 1.0;                       // dpsi' = dr
  return out;
}

std::vector<AugmentedSystem> lpv_family(const ReferenceTrajectory& ref,
                                        const VehicleParams& params, const Mat6& K_sigma,
                                        double rel_step) {
  std::vector<AugmentedSystem> out;
  out.reserve(ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) {
    const LinearizedSystem lin = jacobians_at(operating_point(ref, k), params, rel_step);
    const ClosedSector cs = sector_closed_matrices(lin, K_sigma);
    AugmentedSystem aug = augment_error_dynamics(cs.A_tilde, cs.B_tilde, ref.x[k].psi, ref.x[k].v);
    aug.t = ref.t[k];
    out.push_back(aug);
  }
  return out;
}

namespace {

std::string entry_label(ParameterDescriptor::Matrix m, int row, int col) {
  static const std::array<const char*, kErrorStates> states = {
      "dv", "du", "dr", "domega_wf", "domega_wr", "x_L", "y_L", "dpsi"};
  static const std::array<const char*, kInputs> inputs = {"delta_f", "tau_wf", "tau_wr"};
  const std::string col_name = m == ParameterDescriptor::Matrix::kA
                                   ? states[static_cast<std::size_t>(col)]
                                   : inputs[static_cast<std::size_t>(col)];
  return std::string(m == ParameterDescriptor::Matrix::kA ? "A" : "B") + "(" +
         states[static_cast<std::size_t>(row)] + "," + col_name + ")";
}

ParameterDescriptor describe(const std::vector<AugmentedSystem>& family,
                             ParameterDescriptor::Matrix m, int row, int col) {
  ParameterDescriptor d;
  d.matrix = m;
  d.row = row;
  d.col = col;
  d.lower = std::numeric_limits<double>::infinity();
  d.upper = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& s : family) {
    const double v = m == ParameterDescriptor::Matrix::kA ? s.A(row, col) : s.B(row, col);
    d.lower = std::min(d.lower, v);
    d.upper = std::max(d.upper, v);
    sum += v;
  }
  d.mean = sum / static_cast<double>(family.size());
  d.label = entry_label(m, row, col);
  return d;
}

}  // namespace

ParameterSelection select_varying_parameters(const std::vector<AugmentedSystem>& family,
                                             int count) {
  if (family.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "parameter selection needs at least two samples");
  }
  if (count < 0) throw Error(ErrorCode::kInvalidArgument, "negative parameter count");

  ParameterSelection sel;
  sel.base.A.setZero();
  sel.base.B.setZero();
  for (const auto& s : family) {
    sel.base.A += s.A;
    sel.base.B += s.B;
  }
  sel.base.A /= static_cast<double>(family.size());
  sel.base.B /= static_cast<double>(family.size());

  // Entries whose peak magnitude sits at finite-difference noise level relative to the
  // largest entry of their matrix are treated as structurally zero.
  double a_scale = 0.0;
  double b_scale = 0.0;
  for (const auto& s : family) {
    a_scale = std::max(a_scale, s.A.topRows<kDynStates>().cwiseAbs().maxCoeff());
    b_scale = std::max(b_scale, s.B.topRows<kDynStates>().cwiseAbs().maxCoeff());
  }

  struct Candidate {
    ParameterDescriptor d;
    double score;
  };
  std::vector<Candidate> candidates;
  auto consider = [&](ParameterDescriptor::Matrix m, int row, int col, double scale) {
    ParameterDescriptor d = describe(family, m, row, col);
    const double peak = std::max(std::abs(d.lower), std::abs(d.upper));
    const double range = d.upper - d.lower;
    if (peak <= 1e-9 * scale || range <= 1e-7 * peak) return;
    candidates.push_back({d, range / peak});
  };
  for (int row = 0; row < kDynStates; ++row) {
    for (int col = 0; col < kDynStates; ++col) {
      consider(ParameterDescriptor::Matrix::kA, row, col, a_scale);
    }
    for (int col = 0; col < kInputs; ++col) {
      consider(ParameterDescriptor::Matrix::kB, row, col, b_scale);
    }
  }
  if (candidates.empty()) {
    throw Error(ErrorCode::kDegenerateFamily, "no matrix entry varies along the reference");
  }
  sel.varying_entries = static_cast<int>(candidates.size());

  // Stable sort keeps row-major order among equal scores.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  const auto take = std::min(candidates.size(), static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < take; ++i) sel.parameters.push_back(candidates[i].d);

  ParameterDescriptor psi0 = describe(family, ParameterDescriptor::Matrix::kA, 6, 0);
  psi0.label = "psi0";
  ParameterDescriptor v0cos = describe(family, ParameterDescriptor::Matrix::kA, 6, 7);
  v0cos.label = "v0*cos(psi0)";
  sel.parameters.push_back(psi0);
  sel.parameters.push_back(v0cos);
  return sel;
}

PolytopicModel::PolytopicModel(AugmentedSystem base, std::vector<ParameterDescriptor> parameters)
    : base_(std::move(base)), parameters_(std::move(parameters)) {
  if (parameters_.size() > static_cast<std::size_t>(kMaxPolytopeParameters)) {
    throw Error(ErrorCode::kTooManyParameters,
                std::to_string(parameters_.size()) + " parameters exceed the limit of " +
                    std::to_string(kMaxPolytopeParameters));
  }
}

AugmentedSystem PolytopicModel::vertex(std::size_t index) const {
  AugmentedSystem v = base_;
  for (std::size_t i = 0; i < parameters_.size(); ++i) {
    const ParameterDescriptor& d = parameters_[i];
    const double value = ((index >> i) & 1U) ? d.upper : d.lower;
    if (d.matrix == ParameterDescriptor::Matrix::kA) {
      v.A(d.row, d.col) = value;
    } else {
      v.B(d.row, d.col) = value;
    }
  }
  return v;
}

std::vector<AugmentedSystem> PolytopicModel::vertices() const {
  std::vector<AugmentedSystem> out;
  out.reserve(vertex_count());
  for (std::size_t i = 0; i < vertex_count(); ++i) out.push_back(vertex(i));
  return out;
}

PolytopicModel build_polytope(const ParameterSelection& selection) {
  return PolytopicModel(selection.base, selection.parameters);
}

}  // namespace lpvcar
