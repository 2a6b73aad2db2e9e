#pragma once

#include <optional>

#include "lpvcar/tire_forces.hpp"
#include "lpvcar/types.hpp"

namespace lpvcar {

// Saturated channel outputs ordered (N_f, N_r, F_xf, F_xr, F_yf, F_yr). Loads are
// axle loads, forces are per wheel.
using SigmaVector = Vec6;
// Saturation inputs h, same ordering as SigmaVector.
using SaturationInputs = Vec6;
using SigmaMatrix = Eigen::Matrix<double, kDynStates, kChannels>;

// Each lumped axle carries two wheels.
inline double wheel_load(double axle_load) { return 0.5 * axle_load; }

struct ResistiveForces {
  double aero = 0.0;  // N, along -x of the body
  double rxf = 0.0;   // N, per front wheel
  double rxr = 0.0;   // N, per rear wheel
};

struct NormalForces {
  double n_f = 0.0;  // N, front axle
  double n_r = 0.0;  // N, rear axle
};

struct LoopOptions {
  double tolerance = 1e-10;  // on ||sigma_{k+1} - sigma_k||_inf
  int max_iterations = 100;
  double damping = 0.8;  // relaxation shrink factor applied when the residual grows
};

struct LoopSolution {
  Vec5 xdot = Vec5::Zero();  // dynamic part of the state derivative
  SigmaVector sigma = SigmaVector::Zero();
  SaturationInputs h = SaturationInputs::Zero();
  int iterations = 0;
  double residual = 0.0;
};

struct StateDerivative {
  Vec8 xdot = Vec8::Zero();
  LoopSolution loop;
};

// Quadratic drag and per-wheel rolling resistance; loads are axle loads.
ResistiveForces resistive_forces(const VehicleState& state, double n_f, double n_r,
                                 const VehicleParams& params);

// Unsaturated axle loads from the quasi-static heave/pitch balance with the
// longitudinal force sum eliminated through the longitudinal equation of motion.
// The loads always sum to m*g.
NormalForces normal_forces(const VehicleState& state, double vdot, const VehicleInput& input,
                           const VehicleParams& params);

// Explicit part g(x, u) of xdot = g(x, u) + B_sigma(u) * sigma.
Vec5 explicit_dynamics(const VehicleState& state, const VehicleInput& input,
                       const VehicleParams& params);

// B_sigma(u): how each saturated channel enters the equations of motion.
SigmaMatrix sigma_matrix(const VehicleInput& input, const VehicleParams& params);

// h(xdot, x, u, sigma). Only xdot(0) = vdot is used.
SaturationInputs saturation_inputs(const Vec5& xdot, const VehicleState& state,
                                   const VehicleInput& input, const SigmaVector& sigma,
                                   const VehicleParams& params);

inline SaturationInputs sigma_inputs(const VehicleState& state, const VehicleInput& input,
                                     double vdot, const SigmaVector& sigma,
                                     const VehicleParams& params) {
  Vec5 xdot = Vec5::Zero();
  xdot(0) = vdot;
  return saturation_inputs(xdot, state, input, sigma, params);
}

// sigma(h): loads into [0, m g], then the friction-circle cascade on each wheel using
// the freshly saturated loads.
SigmaVector saturate_channels(const SaturationInputs& h, const VehicleParams& params);

// Solves sigma = sigma(h(g + B_sigma sigma, x, u, sigma)) by successive substitution.
// Throws LoopDiverged when the iteration cap is hit.
LoopSolution resolve_algebraic_loop(const VehicleState& state, const VehicleInput& input,
                                    const VehicleParams& params, const LoopOptions& options = {},
                                    const std::optional<SigmaVector>& warm_start = std::nullopt);

// Full 8-state derivative: body dynamics plus inertial pose kinematics.
StateDerivative state_derivative(const VehicleState& state, const VehicleInput& input,
                                 const VehicleParams& params, const LoopOptions& options = {},
                                 const std::optional<SigmaVector>& warm_start = std::nullopt);

}  // namespace lpvcar
