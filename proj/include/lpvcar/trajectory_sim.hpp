#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lpvcar/vehicle_dynamics.hpp"

namespace lpvcar {

using GainMatrix = Eigen::Matrix<double, kInputs, kErrorStates>;

struct SteeringProfile {
  enum class Kind { kNone, kSine };
  Kind kind = Kind::kSine;
  double amplitude = 0.0;  // rad
  double period = 4.0;     // s, one full sine period: left then right
  double start = 0.5;      // s

  double value(double t) const;
};

struct ManeuverSpec {
  double initial_speed = 70.0 / 3.6;  // m/s
  SteeringProfile steering;
  double tau_wf = 0.0;  // N m, constant
  double tau_wr = 0.0;  // N m, constant
  double duration = 6.0;  // s
  double dt = 1e-3;       // s
  // When set, the steering amplitude is calibrated so that the final lateral
  // displacement equals this value.
  std::optional<double> target_lateral;
  double target_band = 0.10;  // relative tolerance on the final displacement

  VehicleInput input_at(double t) const;
  void validate() const;
};

// Reference maneuver sampled on a uniform grid. Stage data hold the intermediate
// Runge-Kutta states/inputs of each step so that closed-loop runs can compare
// against the reference at exactly the same stages.
struct ReferenceTrajectory {
  double dt = 0.0;
  double steering_amplitude = 0.0;
  std::vector<double> t;
  std::vector<VehicleState> x;
  std::vector<VehicleInput> u;
  std::vector<Vec8> xdot;
  std::vector<SigmaVector> sigma;
  std::vector<SaturationInputs> h;
  std::vector<int> loop_iterations;
  std::vector<double> loop_residual;
  // stage_states[k][i] is the state of stage i + 2 of step k (stage 1 is x[k]).
  std::vector<std::array<Vec8, 3>> stage_states;
  std::vector<std::array<VehicleInput, 4>> stage_inputs;

  std::size_t size() const { return t.size(); }
  double lateral_displacement() const { return x.back().y - x.front().y; }
};

// Error ordering used by the controller:
// (dv, du, dr, domega_wf, domega_wr, x_L, y_L, dpsi).
using ErrorVector = Vec8;
ErrorVector tracking_error(const Vec8& state, const Vec8& reference);

// Classical four-stage Runge-Kutta step of an autonomous right-hand side.
template <typename Rhs>
Vec8 rk4_step(const Rhs& rhs, const Vec8& x, double dt) {
  const Vec8 k1 = rhs(x);
  const Vec8 k2 = rhs(x + 0.5 * dt * k1);
  const Vec8 k3 = rhs(x + 0.5 * dt * k2);
  const Vec8 k4 = rhs(x + dt * k3);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// One RK4 step of the nonlinear model with the input held over the step.
VehicleState integrate_step(const VehicleState& state, const VehicleInput& input,
                            const VehicleParams& params, double dt,
                            const LoopOptions& loop = {});

// Integrates the maneuver open loop. Throws ManeuverInfeasible if the model fails or
// a requested lateral displacement cannot be met within the band.
ReferenceTrajectory generate_reference(const ManeuverSpec& maneuver, const VehicleParams& params,
                                       const LoopOptions& loop = {});

struct SimOptions {
  double steer_limit = 0.6;      // rad
  double torque_limit = 3000.0;  // N m
  double blowup_velocity = 10.0;  // m/s on dv, du
  double blowup_position = 20.0;  // m on x_L, y_L
  double blowup_angle = 1.0;      // rad on dpsi
  double blowup_rate = 200.0;     // rad/s on dr, domega
  double converge_position = 0.1;   // m, terminal ||(x_L, y_L)||_inf
  double converge_velocity = 0.05;  // m/s, terminal ||(dv, du)||_inf
  LoopOptions loop;
};

struct SimTrace {
  std::vector<double> t;
  std::vector<VehicleState> x;
  std::vector<VehicleInput> u;
  std::vector<ErrorVector> error;
  std::vector<double> loop_residual;
  bool diverged = false;
  std::string divergence_reason;
  bool converged = false;
  // max(||(x_L, y_L)||_inf / converge_position, ||(dv, du)||_inf / converge_velocity)
  // at the last recorded sample; converged iff below 1. Infinite when diverged.
  double terminal_error = 0.0;
  double peak_torque_command = 0.0;  // N m, before clamping
  double peak_steer_command = 0.0;   // rad, before clamping
};

// Closed loop u = u0(t) + K dx with clamped actuators, started from reference + offset.
// `offset` uses the ErrorVector ordering.
SimTrace simulate_closed_loop(const GainMatrix& gain, const ReferenceTrajectory& ref,
                              const ErrorVector& offset, const VehicleParams& params,
                              const SimOptions& options = {});

struct SweepGrid {
  double dv_min = -0.8, dv_max = 0.8;
  double du_min = -0.8, du_max = 0.8;
  double step = 0.05;

  std::vector<double> dv_values() const;
  std::vector<double> du_values() const;
};

struct SweepPoint {
  double dv0 = 0.0;
  double du0 = 0.0;
  bool converged = false;
  bool diverged = false;
  double terminal_error = 0.0;
};

struct SweepResult {
  std::size_t n_dv = 0;
  std::size_t n_du = 0;
  std::vector<SweepPoint> points;  // row-major: index = i_dv * n_du + i_du

  const SweepPoint& at(std::size_t i_dv, std::size_t i_du) const {
    return points[i_dv * n_du + i_du];
  }
  double max_converged_dv() const;
  double max_converged_du() const;
  // 4-connected converged set containing the grid point nearest the origin.
  bool converged_set_connected() const;
  // No diverged cell is enclosed by converged cells.
  bool converged_set_hole_free() const;
};

SweepResult region_of_attraction_sweep(const GainMatrix& gain, const ReferenceTrajectory& ref,
                                       const SweepGrid& grid, const VehicleParams& params,
                                       const SimOptions& options = {}, int threads = 1);

}  // namespace lpvcar
