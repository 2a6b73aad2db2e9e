#include "lpvcar/trajectory_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <queue>
#include <thread>

#include "lpvcar/errors.hpp"

namespace lpvcar {

double SteeringProfile::value(double t) const {
  if (kind == Kind::kNone) return 0.0;
  const double tau = t - start;
  if (tau <= 0.0 || tau >= period) return 0.0;
  return amplitude * std::sin(2.0 * std::numbers::pi * tau / period);
}

VehicleInput ManeuverSpec::input_at(double t) const {
  return {steering.value(t), tau_wf, tau_wr};
}

void ManeuverSpec::validate() const {
  if (!(initial_speed > 0.0) || !(duration > 0.0) || !(dt > 0.0) || dt > duration) {
    throw Error(ErrorCode::kInvalidArgument, "maneuver needs positive speed, duration and dt");
  }
  if (steering.kind == SteeringProfile::Kind::kSine && !(steering.period > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "steering period must be positive");
  }
}

ErrorVector tracking_error(const Vec8& state, const Vec8& reference) {
  const Vec8 d = state - reference;
  ErrorVector e;
  e << d(0), d(1), d(2), d(3), d(4), d(5), d(6), d(7);
  return e;
}

namespace {

struct StageResult {
  Vec8 next;
  std::array<Vec8, 3> stages;
  StateDerivative first;
  SigmaVector last_sigma;
};

// RK4 step where the input may depend on the stage index and stage state.
template <typename InputFn>
StageResult rk4_model_step(const Vec8& x, const InputFn& input_for, const VehicleParams& p,
                           double dt, const LoopOptions& loop,
                           const std::optional<SigmaVector>& warm) {
  StageResult out;
  out.first = state_derivative(VehicleState::from_vector(x), input_for(0, x), p, loop, warm);
  const Vec8& k1 = out.first.xdot;
  out.stages[0] = x + 0.5 * dt * k1;
  const StateDerivative d2 = state_derivative(VehicleState::from_vector(out.stages[0]),
                                              input_for(1, out.stages[0]), p, loop,
                                              out.first.loop.sigma);
  out.stages[1] = x + 0.5 * dt * d2.xdot;
  const StateDerivative d3 = state_derivative(VehicleState::from_vector(out.stages[1]),
                                              input_for(2, out.stages[1]), p, loop,
                                              d2.loop.sigma);
  out.stages[2] = x + dt * d3.xdot;
  const StateDerivative d4 = state_derivative(VehicleState::from_vector(out.stages[2]),
                                              input_for(3, out.stages[2]), p, loop,
                                              d3.loop.sigma);
  out.next = x + dt / 6.0 * (k1 + 2.0 * d2.xdot + 2.0 * d3.xdot + d4.xdot);
  out.last_sigma = d4.loop.sigma;
  return out;
}

ReferenceTrajectory integrate_open_loop(const ManeuverSpec& maneuver, const VehicleParams& p,
                                        const LoopOptions& loop) {
  const auto n = static_cast<std::size_t>(std::llround(maneuver.duration / maneuver.dt)) + 1;
  ReferenceTrajectory ref;
  ref.dt = maneuver.dt;
  ref.steering_amplitude = maneuver.steering.amplitude;
  ref.t.reserve(n);
  ref.x.reserve(n);
  ref.stage_states.reserve(n);

  VehicleState x0;
  x0.v = maneuver.initial_speed;
  x0.omega_wf = maneuver.initial_speed / p.tire.r_e;
  x0.omega_wr = maneuver.initial_speed / p.tire.r_e;
  Vec8 x = x0.to_vector();
  std::optional<SigmaVector> warm;

  for (std::size_t k = 0; k < n; ++k) {
    const double tk = static_cast<double>(k) * maneuver.dt;
    const std::array<VehicleInput, 4> inputs = {
        maneuver.input_at(tk), maneuver.input_at(tk + 0.5 * maneuver.dt), maneuver.input_at(tk + 0.5 * maneuver.dt),
        maneuver.input_at(tk + maneuver.dt)};
    ref.t.push_back(tk);
    ref.x.push_back(VehicleState::from_vector(x));
    ref.u.push_back(inputs[0]);
    if (k + 1 == n) {
      const StateDerivative d = state_derivative(ref.x.back(), inputs[0], p, loop, warm);
      ref.xdot.push_back(d.xdot);
      ref.sigma.push_back(d.loop.sigma);
      ref.h.push_back(d.loop.h);
      ref.loop_iterations.push_back(d.loop.iterations);
      ref.loop_residual.push_back(d.loop.residual);
      break;
    }
    const StageResult step = rk4_model_step(
        x, [&](int i, const Vec8&) { return inputs[i]; }, p, maneuver.dt, loop, warm);
    ref.xdot.push_back(step.first.xdot);
    ref.sigma.push_back(step.first.loop.sigma);
    ref.h.push_back(step.first.loop.h);
    ref.loop_iterations.push_back(step.first.loop.iterations);
    ref.loop_residual.push_back(step.first.loop.residual);
    ref.stage_states.push_back(step.stages);
    ref.stage_inputs.push_back(inputs);
    x = step.next;
    warm = step.last_sigma;
  }
  return ref;
}

ReferenceTrajectory integrate_checked(const ManeuverSpec& maneuver, const VehicleParams& p,
                                      const LoopOptions& loop) {
  try {
    return integrate_open_loop(maneuver, p, loop);
  } catch (const Error& e) {
    throw Error(ErrorCode::kManeuverInfeasible, std::string("open-loop integration failed: ") +
                                                    e.what());
  }
}

}  // namespace

VehicleState integrate_step(const VehicleState& state, const VehicleInput& input,
                            const VehicleParams& params, double dt, const LoopOptions& loop) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dt must be positive");
  const StageResult step = rk4_model_step(
      state.to_vector(), [&](int, const Vec8&) { return input; }, params, dt, loop,
      std::nullopt);
  return VehicleState::from_vector(step.next);
}

ReferenceTrajectory generate_reference(const ManeuverSpec& maneuver, const VehicleParams& params,
                                       const LoopOptions& loop) {
  maneuver.validate();
  params.validate();
  if (!maneuver.target_lateral || maneuver.steering.kind == SteeringProfile::Kind::kNone) {
    return integrate_checked(maneuver, params, loop);
  }

  const double target = *maneuver.target_lateral;
  ManeuverSpec trial = maneuver;
  auto displacement = [&](double amplitude) {
    trial.steering.amplitude = amplitude;
    return integrate_checked(trial, params, loop).lateral_displacement();
  };

  // Displacement grows monotonically with the amplitude: bracket, then bisect.
  double lo = 0.0;
  double hi = 0.01;
  const double sign = target >= 0.0 ? 1.0 : -1.0;
  while (sign * displacement(sign * hi) < std::abs(target)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 0.6) {
      throw Error(ErrorCode::kManeuverInfeasible,
                  "no steering amplitude up to 0.6 rad reaches the lateral target");
    }
  }
  for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sign * displacement(sign * mid) < std::abs(target)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  trial.steering.amplitude = sign * 0.5 * (lo + hi);
  ReferenceTrajectory ref = integrate_checked(trial, params, loop);
  const double achieved = ref.lateral_displacement();
  if (std::abs(achieved - target) > maneuver.target_band * std::abs(target)) {
    throw Error(ErrorCode::kManeuverInfeasible,
                "lateral displacement " + std::to_string(achieved) + " m misses target " +
                    std::to_string(target) + " m");
  }
  return ref;
}

SimTrace simulate_closed_loop(const GainMatrix& gain, const ReferenceTrajectory& ref,
                              const ErrorVector& offset, const VehicleParams& params,
                              const SimOptions& opt) {
  if (!gain.allFinite()) throw Error(ErrorCode::kInvalidArgument, "gain has non-finite entries");
  if (ref.size() < 2) throw Error(ErrorCode::kInvalidArgument, "reference too short");

  SimTrace trace;
  const std::size_t n = ref.size();
  trace.t.reserve(n);
  trace.x.reserve(n);
  trace.u.reserve(n);
  trace.error.reserve(n);

  auto command = [&](const VehicleInput& feedforward, const Vec8& state, const Vec8& reference) {
    const Vec3 raw = feedforward.to_vector() + gain * tracking_error(state, reference);
    trace.peak_steer_command = std::max(trace.peak_steer_command, std::abs(raw(0)));
    trace.peak_torque_command =
        std::max({trace.peak_torque_command, std::abs(raw(1)), std::abs(raw(2))});
    return VehicleInput{std::clamp(raw(0), -opt.steer_limit, opt.steer_limit),
                        std::clamp(raw(1), -opt.torque_limit, opt.torque_limit),
                        std::clamp(raw(2), -opt.torque_limit, opt.torque_limit)};
  };

  auto blown_up = [&](const ErrorVector& e) {
    if (!e.allFinite()) return true;
    return std::abs(e(0)) > opt.blowup_velocity || std::abs(e(1)) > opt.blowup_velocity ||
           std::abs(e(2)) > opt.blowup_rate || std::abs(e(3)) > opt.blowup_rate ||
           std::abs(e(4)) > opt.blowup_rate || std::abs(e(5)) > opt.blowup_position ||
           std::abs(e(6)) > opt.blowup_position || std::abs(e(7)) > opt.blowup_angle;
  };

  // The warm start follows the same chain as in the reference generation so that a
  // zero offset reproduces the reference exactly.
  Vec8 x = ref.x[0].to_vector() + offset;
  std::optional<SigmaVector> warm;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec8 xr = ref.x[k].to_vector();
    const ErrorVector e = tracking_error(x, xr);
    trace.t.push_back(ref.t[k]);
    trace.x.push_back(VehicleState::from_vector(x));
    trace.error.push_back(e);
    if (blown_up(e)) {
      trace.u.push_back(ref.u[k]);
      trace.loop_residual.push_back(0.0);
      trace.diverged = true;
      trace.divergence_reason = "tracking error exceeded the blow-up bound";
      break;
    }
    if (k + 1 == n) {
      trace.u.push_back(command(ref.u[k], x, xr));
      trace.loop_residual.push_back(0.0);
      break;
    }
    const auto& stage_ref = ref.stage_states[k];
    const auto& stage_in = ref.stage_inputs[k];
    try {
      const StageResult step = rk4_model_step(
          x,
          [&](int i, const Vec8& xs) {
            return command(stage_in[i], xs, i == 0 ? xr : stage_ref[i - 1]);
          },
          params, ref.dt, opt.loop, warm);
      trace.u.push_back(command(stage_in[0], x, xr));
      trace.loop_residual.push_back(step.first.loop.residual);
      x = step.next;
      warm = step.last_sigma;
    } catch (const Error& err) {
      trace.u.push_back(ref.u[k]);
      trace.loop_residual.push_back(0.0);
      trace.diverged = true;
      trace.divergence_reason = err.what();
      break;
    }
  }

  if (trace.diverged) {
    trace.terminal_error = std::numeric_limits<double>::infinity();
    trace.converged = false;
  } else {
    const ErrorVector& e = trace.error.back();
    const double pos = std::max(std::abs(e(5)), std::abs(e(6)));
    const double vel = std::max(std::abs(e(0)), std::abs(e(1)));
    trace.terminal_error = std::max(pos / opt.converge_position, vel / opt.converge_velocity);
    trace.converged = trace.terminal_error < 1.0;
  }
  return trace;
}

namespace {

std::vector<double> axis_values(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) {
    throw Error(ErrorCode::kInvalidArgument, "sweep grid needs step > 0 and max >= min");
  }
  const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    // Snap to the step lattice so printed values are clean.
    out[i] = std::round((lo + static_cast<double>(i) * step) / step * 1e6) / 1e6 * step;
  }
  return out;
}

}  // namespace

std::vector<double> SweepGrid::dv_values() const { return axis_values(dv_min, dv_max, step); }
std::vector<double> SweepGrid::du_values() const { return axis_values(du_min, du_max, step); }

double SweepResult::max_converged_dv() const {
  double best = 0.0;
  for (const auto& p : points) {
    if (p.converged) best = std::max(best, std::abs(p.dv0));
  }
  return best;
}

double SweepResult::max_converged_du() const {
  double best = 0.0;
  for (const auto& p : points) {
    if (p.converged) best = std::max(best, std::abs(p.du0));
  }
  return best;
}

bool SweepResult::converged_set_connected() const {
  if (points.empty()) return false;
  std::size_t seed = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = std::hypot(points[i].dv0, points[i].du0);
    if (d < best) {
      best = d;
      seed = i;
    }
  }
  if (!points[seed].converged) return false;
  std::vector<char> seen(points.size(), 0);
  std::queue<std::size_t> queue;
  queue.push(seed);
  seen[seed] = 1;
  std::size_t reached = 0;
  while (!queue.empty()) {
    const std::size_t idx = queue.front();
    queue.pop();
    ++reached;
    const std::size_t i = idx / n_du;
    const std::size_t j = idx % n_du;
    const std::array<std::pair<long, long>, 4> nbrs = {
        {{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
    for (const auto& [di, dj] : nbrs) {
      const long ni = static_cast<long>(i) + di;
      const long nj = static_cast<long>(j) + dj;
      if (ni < 0 || nj < 0 || ni >= static_cast<long>(n_dv) || nj >= static_cast<long>(n_du)) {
        continue;
      }
      const std::size_t nidx = static_cast<std::size_t>(ni) * n_du + static_cast<std::size_t>(nj);
      if (!seen[nidx] && points[nidx].converged) {
        seen[nidx] = 1;
        queue.push(nidx);
      }
    }
  }
  const auto total = static_cast<std::size_t>(
      std::count_if(points.begin(), points.end(), [](const SweepPoint& p) { return p.converged; }));
  return reached == total;
}

bool SweepResult::converged_set_hole_free() const {
  // Flood the non-converged cells from the grid border; any cell left over is a hole.
  std::vector<char> seen(points.size(), 0);
  std::queue<std::size_t> queue;
  for (std::size_t i = 0; i < n_dv; ++i) {
    for (std::size_t j = 0; j < n_du; ++j) {
      const bool border = i == 0 || j == 0 || i + 1 == n_dv || j + 1 == n_du;
      const std::size_t idx = i * n_du + j;
      if (border && !points[idx].converged) {
        seen[idx] = 1;
        queue.push(idx);
      }
    }
  }
  while (!queue.empty()) {
    const std::size_t idx = queue.front();
    queue.pop();
    const std::size_t i = idx / n_du;
    const std::size_t j = idx % n_du;
    const std::array<std::pair<long, long>, 4> nbrs = {
        {{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
    for (const auto& [di, dj] : nbrs) {
      const long ni = static_cast<long>(i) + di;
      const long nj = static_cast<long>(j) + dj;
      if (ni < 0 || nj < 0 || ni >= static_cast<long>(n_dv) || nj >= static_cast<long>(n_du)) {
        continue;
      }
      const std::size_t nidx = static_cast<std::size_t>(ni) * n_du + static_cast<std::size_t>(nj);
      if (!seen[nidx] && !points[nidx].converged) {
        seen[nidx] = 1;
        queue.push(nidx);
      }
    }
  }
  for (std::size_t idx = 0; idx < points.size(); ++idx) {
    if (!points[idx].converged && !seen[idx]) return false;
  }
  return true;
}

SweepResult region_of_attraction_sweep(const GainMatrix& gain, const ReferenceTrajectory& ref,
                                       const SweepGrid& grid, const VehicleParams& params,
                                       const SimOptions& options, int threads) {
  const std::vector<double> dvs = grid.dv_values();
  const std::vector<double> dus = grid.du_values();
  SweepResult result;
  result.n_dv = dvs.size();
  result.n_du = dus.size();
  result.points.resize(dvs.size() * dus.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t idx = next++; idx < result.points.size(); idx = next++) {
      SweepPoint& pt = result.points[idx];
      pt.dv0 = dvs[idx / result.n_du];
      pt.du0 = dus[idx % result.n_du];
      ErrorVector offset = ErrorVector::Zero();
      offset(0) = pt.dv0;
      offset(1) = pt.du0;
      const SimTrace trace = simulate_closed_loop(gain, ref, offset, params, options);
      pt.converged = trace.converged;
      pt.diverged = trace.diverged;
      pt.terminal_error = trace.terminal_error;
    }
  };

  const int workers = std::max(1, threads);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return result;
}

}  // namespace lpvcar
