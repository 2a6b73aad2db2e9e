#include "lpvcar/tire_forces.hpp"

#include <cmath>
#include <string>

#include "lpvcar/errors.hpp"

namespace lpvcar {

void TireParams::validate() const {
  if (!(c_kappa > 0.0) || !(c_alpha > 0.0) || !(mu > 0.0 && mu <= 1.5) || !(r_e > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "tire parameters require c_kappa > 0, c_alpha > 0, 0 < mu <= 1.5, r_e > 0");
  }
}

SlipState slip_quantities(const VehicleState& s, const VehicleInput& in,
                          const VehicleParams& p) {
  if (!(s.v >= p.v_min)) {
    throw Error(ErrorCode::kDegenerateSpeed,
                "longitudinal speed " + std::to_string(s.v) + " m/s below v_min");
  }
  const double cd = std::cos(in.delta_f);
  const double sd = std::sin(in.delta_f);
  const double lat_f = s.u + p.ell_f * s.r;
  const double lat_r = s.u - p.ell_r * s.r;
  // Longitudinal speed of the front wheel centre in the wheel frame.
  const double w_f = s.v * cd + lat_f * sd;
  if (!(w_f >= p.v_min)) {
    throw Error(ErrorCode::kDegenerateSpeed, "front wheel-frame speed below v_min");
  }
  const double re = p.tire.r_e;
  SlipState out;
  out.kappa_f = -(w_f - s.omega_wf * re) / w_f;
  out.kappa_r = -(s.v - s.omega_wr * re) / s.v;
  out.alpha_f = in.delta_f - std::atan(lat_f / s.v);
  out.alpha_r = -std::atan(lat_r / s.v);
  return out;
}

StarCoefficients star_coefficients(const TireParams& t, double load) {
  if (!(load > 0.0)) {
    throw Error(ErrorCode::kNonpositiveLoad, "normal force must be positive");
  }
  const double nm = load * t.mu;
  StarCoefficients out;
  out.kappa_star = nm * (4.0 * t.c_kappa + std::sqrt(nm * nm + 8.0 * t.c_kappa * nm) + nm) /
                   (8.0 * t.c_kappa * t.c_kappa);
  out.alpha_star = nm / (2.0 * t.c_alpha);
  return out;
}

EffectiveStiffness effective_stiffness(const TireParams& t, double load, double kappa,
                                       double alpha) {
  const StarCoefficients star = star_coefficients(t, load);
  const double nm = load * t.mu;
  const double ca = t.c_alpha;
  const double ck = t.c_kappa;

  const double tan_a = std::tan(alpha);
  const double sq_k = ca * ca * tan_a * tan_a + ck * ck * star.kappa_star * star.kappa_star;
  const double sq_a =
      star.alpha_star * star.alpha_star * ca * ca + ck * ck * kappa * kappa;
  if (!(sq_k > 0.0) || !(sq_a > 0.0)) {
    throw Error(ErrorCode::kSingularDenominator, "effective stiffness denominator vanished");
  }

  EffectiveStiffness out;
  out.c_kappa = load * ck * t.mu * (4.0 * std::sqrt(sq_k) + nm * (star.kappa_star - 1.0)) /
                (4.0 * sq_k);
  out.c_alpha =
      load * ca * t.mu * (4.0 * std::sqrt(sq_a) + nm * (kappa - 1.0)) / (4.0 * sq_a);
  return out;
}

double logistic(double x, double upper, double lower, LogisticForm form) {
  if (!(upper > lower)) {
    throw Error(ErrorCode::kInvalidBounds, "logistic requires upper > lower");
  }
  const double width = upper - lower;
  if (form == LogisticForm::kAsPrinted) {
    const double centre = 0.5 * width;
    return width / (1.0 + std::exp(-4.0 / width * (x - centre))) + lower;
  }
  // Same curve as width / (1 + exp(-4 (x - c) / width)) + lower, written so that
  // the midpoint maps exactly onto itself.
  const double centre = 0.5 * (upper + lower);
  return centre + 0.5 * width * std::tanh(2.0 * (x - centre) / width);
}

double logistic_slope(double x, double upper, double lower) {
  if (!(upper > lower)) {
    throw Error(ErrorCode::kInvalidBounds, "logistic requires upper > lower");
  }
  const double width = upper - lower;
  const double th = std::tanh(2.0 * (x - 0.5 * (upper + lower)) / width);
  return 1.0 - th * th;
}

WheelForce unsaturated_force(const TireParams& t, TireModel model, double load, double kappa,
                             double alpha) {
  if (model == TireModel::kLinear) {
    return {t.c_kappa * kappa, t.c_alpha * alpha};
  }
  if (!(load > 0.0)) return {};
  const EffectiveStiffness c = effective_stiffness(t, load, kappa, alpha);
  return {c.c_kappa * kappa, c.c_alpha * alpha};
}

WheelForce saturate_wheel(const WheelForce& unsat, double mu, double load, SaturationMode mode,
                          LogisticForm form) {
  if (mode == SaturationMode::kIdentity) return unsat;
  const double fmax = mu * load;
  if (!(fmax > 0.0)) return {};
  WheelForce out;
  out.fx = logistic(unsat.fx, fmax, -fmax, form);
  const double remaining = fmax * fmax - out.fx * out.fx;
  if (remaining > 0.0) {
    const double bound = std::sqrt(remaining);
    out.fy = logistic(unsat.fy, bound, -bound, form);
  }
  return out;
}

TireForceSet saturate_forces(const TireForceSet& unsat, double mu, double load_f, double load_r,
                             SaturationMode mode, LogisticForm form) {
  const WheelForce front = saturate_wheel({unsat.fxf_hat, unsat.fyf_hat}, mu, load_f, mode, form);
  const WheelForce rear = saturate_wheel({unsat.fxr_hat, unsat.fyr_hat}, mu, load_r, mode, form);
  TireForceSet out = unsat;
  out.fxf = front.fx;
  out.fyf = front.fy;
  out.fxr = rear.fx;
  out.fyr = rear.fy;
  return out;
}

}  // namespace lpvcar
