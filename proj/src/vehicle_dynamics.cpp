#include "lpvcar/vehicle_dynamics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "lpvcar/errors.hpp"

namespace lpvcar {

void VehicleParams::validate() const {
  tire.validate();
  const bool ok = m > 0.0 && i_zz > 0.0 && i_wy > 0.0 && ell_f > 0.0 && ell_r > 0.0 &&
                  h > 0.0 && rho_cda >= 0.0 && f_r >= 0.0 && g > 0.0 && v_min > 0.0;
  if (!ok) {
    throw Error(ErrorCode::kInvalidArgument, "vehicle parameters out of range");
  }
}

Vec8 VehicleState::to_vector() const {
  Vec8 s;
  s << v, u, r, omega_wf, omega_wr, x, y, psi;
  return s;
}

VehicleState VehicleState::from_vector(const Vec8& s) {
  return {s(0), s(1), s(2), s(3), s(4), s(5), s(6), s(7)};
}

void VehicleState::set_dynamic(const Vec5& d) {
  v = d(0);
  u = d(1);
  r = d(2);
  omega_wf = d(3);
  omega_wr = d(4);
}

ResistiveForces resistive_forces(const VehicleState& state, double n_f, double n_r,
                                 const VehicleParams& p) {
  ResistiveForces out;
  out.aero = p.rho_cda * state.v * std::abs(state.v);
  out.rxf = p.f_r * wheel_load(n_f);
  out.rxr = p.f_r * wheel_load(n_r);
  return out;
}

NormalForces normal_forces(const VehicleState& state, double vdot, const VehicleInput& input,
                           const VehicleParams& p) {
  // Unknowns N_f, N_r:
  //   N_f + N_r = m g
  //   N_f (l_f + r_e f_r cos d) - N_r (l_r - r_e f_r) = -h m (vdot - r u) - h F_aero
  const double re = p.tire.r_e;
  const double a = p.ell_f + re * p.f_r * std::cos(input.delta_f);
  const double b = p.ell_r - re * p.f_r;
  if (std::abs(a + b) < 1e-12) {
    throw Error(ErrorCode::kSingularGeometry, "axle geometry gives a singular load balance");
  }
  const double aero = p.rho_cda * state.v * std::abs(state.v);
  const double rhs = -p.h * p.m * (vdot - state.r * state.u) - p.h * aero;
  NormalForces out;
  out.n_f = (rhs + b * p.weight()) / (a + b);
  out.n_r = p.weight() - out.n_f;
  return out;
}

Vec5 explicit_dynamics(const VehicleState& s, const VehicleInput& in, const VehicleParams& p) {
  const double aero = p.rho_cda * s.v * std::abs(s.v);
  Vec5 g;
  g << s.r * s.u - aero / p.m, -s.r * s.v, 0.0, in.tau_wf / p.i_wy, in.tau_wr / p.i_wy;
  return g;
}

SigmaMatrix sigma_matrix(const VehicleInput& in, const VehicleParams& p) {
  const double cd = std::cos(in.delta_f);
  const double sd = std::sin(in.delta_f);
  const double m = p.m;
  const double iz = p.i_zz;
  const double fr = p.f_r;
  // Rolling resistance of the axle is f_r * N (two wheels at f_r * N / 2 each).
  SigmaMatrix b = SigmaMatrix::Zero();
  // v: 2 (F_xf cos d + F_xr - R_xf cos d - R_xr - F_yf sin d) / m
  b(0, 0) = -fr * cd / m;
  b(0, 1) = -fr / m;
  b(0, 2) = 2.0 * cd / m;
  b(0, 3) = 2.0 / m;
  b(0, 4) = -2.0 * sd / m;
  // u: 2 (F_xf sin d - R_xf sin d + F_yf cos d + F_yr) / m
  b(1, 0) = -fr * sd / m;
  b(1, 2) = 2.0 * sd / m;
  b(1, 4) = 2.0 * cd / m;
  b(1, 5) = 2.0 / m;
  // r: (2 (F_xf sin d + F_yf cos d - R_xf sin d) l_f - 2 F_yr l_r) / I_zz
  b(2, 0) = -fr * sd * p.ell_f / iz;
  b(2, 2) = 2.0 * sd * p.ell_f / iz;
  b(2, 4) = 2.0 * cd * p.ell_f / iz;
  b(2, 5) = -2.0 * p.ell_r / iz;
  // wheels: -2 F_x r_e / I_wy
  b(3, 2) = -2.0 * p.tire.r_e / p.i_wy;
  b(4, 3) = -2.0 * p.tire.r_e / p.i_wy;
  return b;
}

namespace {

SaturationInputs inputs_from_slips(const SlipState& slips, double vdot, const VehicleState& s,
                                   const VehicleInput& in, const SigmaVector& sigma,
                                   const VehicleParams& p) {
  const NormalForces n = normal_forces(s, vdot, in, p);
  const WheelForce front =
      unsaturated_force(p.tire, p.tire_model, wheel_load(sigma(0)), slips.kappa_f, slips.alpha_f);
  const WheelForce rear =
      unsaturated_force(p.tire, p.tire_model, wheel_load(sigma(1)), slips.kappa_r, slips.alpha_r);
  SaturationInputs h;
  h << n.n_f, n.n_r, front.fx, rear.fx, front.fy, rear.fy;
  return h;
}

double saturate_load(double load, const VehicleParams& p) {
  if (p.saturation == SaturationMode::kIdentity) return load;
  return logistic(load, p.weight(), 0.0, p.logistic_form);
}

}  // namespace

SaturationInputs saturation_inputs(const Vec5& xdot, const VehicleState& s,
                                   const VehicleInput& in, const SigmaVector& sigma,
                                   const VehicleParams& p) {
  return inputs_from_slips(slip_quantities(s, in, p), xdot(0), s, in, sigma, p);
}

SigmaVector saturate_channels(const SaturationInputs& h, const VehicleParams& p) {
  SigmaVector out;
  out(0) = saturate_load(h(0), p);
  out(1) = saturate_load(h(1), p);
  const double mu = p.tire.mu;
  const WheelForce front =
      saturate_wheel({h(2), h(4)}, mu, wheel_load(out(0)), p.saturation, p.logistic_form);
  const WheelForce rear =
      saturate_wheel({h(3), h(5)}, mu, wheel_load(out(1)), p.saturation, p.logistic_form);
  out(2) = front.fx;
  out(3) = rear.fx;
  out(4) = front.fy;
  out(5) = rear.fy;
  return out;
}

LoopSolution resolve_algebraic_loop(const VehicleState& s, const VehicleInput& in,
                                    const VehicleParams& p, const LoopOptions& opt,
                                    const std::optional<SigmaVector>& warm_start) {
  const SlipState slips = slip_quantities(s, in, p);
  const Vec5 g = explicit_dynamics(s, in, p);
  const SigmaMatrix bs = sigma_matrix(in, p);

  SigmaVector sigma;
  if (warm_start) {
    sigma = *warm_start;
  } else {
    const NormalForces n0 = normal_forces(s, g(0), in, p);
    sigma << saturate_load(n0.n_f, p), saturate_load(n0.n_r, p), 0.0, 0.0, 0.0, 0.0;
  }

  double relax = 1.0;
  double previous = std::numeric_limits<double>::infinity();
  double residual = previous;
  for (int k = 1; k <= opt.max_iterations; ++k) {
    const Vec5 xdot = g + bs * sigma;
    const SaturationInputs h = inputs_from_slips(slips, xdot(0), s, in, sigma, p);
    const SigmaVector next = saturate_channels(h, p);
    residual = (next - sigma).cwiseAbs().maxCoeff();
    if (!std::isfinite(residual)) break;
    if (residual < opt.tolerance) {
      LoopSolution out;
      out.sigma = next;
      out.xdot = g + bs * next;
      out.h = inputs_from_slips(slips, out.xdot(0), s, in, next, p);
      out.iterations = k;
      out.residual = residual;
      return out;
    }
    if (residual > previous) relax *= opt.damping;
    sigma += relax * (next - sigma);
    previous = residual;
  }
  throw Error(ErrorCode::kLoopDiverged,
              "no fixed point after " + std::to_string(opt.max_iterations) +
                  " iterations, last residual " + std::to_string(residual));
}

StateDerivative state_derivative(const VehicleState& s, const VehicleInput& in,
                                 const VehicleParams& p, const LoopOptions& opt,
                                 const std::optional<SigmaVector>& warm_start) {
  StateDerivative out;
  out.loop = resolve_algebraic_loop(s, in, p, opt, warm_start);
  const double cp = std::cos(s.psi);
  const double sp = std::sin(s.psi);
  out.xdot.head<kDynStates>() = out.loop.xdot;
  out.xdot(5) = s.v * cp - s.u * sp;
  out.xdot(6) = s.u * cp + s.v * sp;
  out.xdot(7) = s.r;
  return out;
}

}  // namespace lpvcar
