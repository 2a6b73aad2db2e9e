#pragma once

#include "lpvcar/types.hpp"

namespace lpvcar {

struct SlipState {
  double kappa_f = 0.0;
  double kappa_r = 0.0;
  double alpha_f = 0.0;  // rad
  double alpha_r = 0.0;  // rad
};

struct StarCoefficients {
  double kappa_star = 0.0;
  double alpha_star = 0.0;
};

struct EffectiveStiffness {
  double c_kappa = 0.0;
  double c_alpha = 0.0;
};

struct WheelForce {
  double fx = 0.0;
  double fy = 0.0;
};

// Per-wheel tire forces in the wheel frame. The *_hat members are the
// unsaturated values, the others the saturated ones.
struct TireForceSet {
  double fxf = 0.0, fxr = 0.0, fyf = 0.0, fyr = 0.0;
  double fxf_hat = 0.0, fxr_hat = 0.0, fyf_hat = 0.0, fyr_hat = 0.0;
};

// Longitudinal slip ratios and slip angles of both axles.
// Throws DegenerateSpeed when v (or the front wheel-frame speed) is below v_min.
SlipState slip_quantities(const VehicleState& state, const VehicleInput& input,
                          const VehicleParams& params);

// Slip values at which the combined-slip stiffness reaches the friction limit.
StarCoefficients star_coefficients(const TireParams& tire, double load);

// Load and combined-slip dependent stiffnesses c*_kappa(mu, N, alpha) and
// c*_alpha(mu, N, kappa).
EffectiveStiffness effective_stiffness(const TireParams& tire, double load, double kappa,
                                       double alpha);

/// Logistic saturation between `lower` and `upper`.
///
/// The centred form has slope 1 and a fixed point at the bound midpoint.
/// Throws InvalidBounds if upper <= lower.
double logistic(double x, double upper, double lower,
                LogisticForm form = LogisticForm::kCentered);

// Derivative of the centred logistic with respect to x.
double logistic_slope(double x, double upper, double lower);

// Unsaturated force of one wheel carrying `load` (N). Zero load gives zero force.
WheelForce unsaturated_force(const TireParams& tire, TireModel model, double load,
                             double kappa, double alpha);

// Friction-circle saturation of one wheel: F_x is bounded by +-mu*N first, then F_y
// by the remaining radius sqrt((mu*N)^2 - F_x^2).
WheelForce saturate_wheel(const WheelForce& unsat, double mu, double load,
                          SaturationMode mode = SaturationMode::kLogistic,
                          LogisticForm form = LogisticForm::kCentered);

// Applies saturate_wheel to both axles; load_f / load_r are per-wheel normal forces.
TireForceSet saturate_forces(const TireForceSet& unsat, double mu, double load_f,
                             double load_r, SaturationMode mode = SaturationMode::kLogistic,
                             LogisticForm form = LogisticForm::kCentered);

}  // namespace lpvcar
