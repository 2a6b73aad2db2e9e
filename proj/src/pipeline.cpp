#include "lpvcar/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "lpvcar/errors.hpp"

namespace lpvcar {

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string short_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::filesystem::path out_dir(const CommandOptions& o) {
  return o.out_dir.empty() ? std::filesystem::path(o.config.output_dir) : o.out_dir;
}

// Runs the reference stage; ManeuverInfeasible becomes exit code 1.
std::optional<ReferenceTrajectory> reference_or_report(const RunConfig& cfg, std::ostream& log) {
  try {
    return generate_reference(cfg.maneuver, cfg.vehicle);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kManeuverInfeasible) throw;
    log << "reference: " << e.what() << '\n';
    return std::nullopt;
  }
}

std::string reference_summary(const ReferenceTrajectory& ref, const VehicleParams& p) {
  double kappa = 0.0, alpha = 0.0, psi = 0.0;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    const SlipState s = slip_quantities(ref.x[k], ref.u[k], p);
    kappa = std::max({kappa, std::abs(s.kappa_f), std::abs(s.kappa_r)});
    alpha = std::max({alpha, std::abs(s.alpha_f), std::abs(s.alpha_r)});
    psi = std::max(psi, std::abs(ref.x[k].psi));
  }
  std::ostringstream out;
  out << "samples " << ref.size() << '\n';
  out << "initial_speed_m_per_s " << num(ref.x.front().v) << '\n';
  out << "steering_amplitude_rad " << num(ref.steering_amplitude) << '\n';
  out << "final_lateral_displacement_m " << num(ref.lateral_displacement()) << '\n';
  out << "peak_abs_slip_ratio " << num(kappa) << '\n';
  out << "peak_abs_slip_angle_rad " << num(alpha) << '\n';
  out << "peak_abs_heading_rad " << num(psi) << '\n';
  return out.str();
}

}  // namespace

SynthesisRun run_synthesis(const RunConfig& cfg, std::uint64_t seed, int threads) {
  SynthesisRun run;
  run.reference = generate_reference(cfg.maneuver, cfg.vehicle);
  run.slopes = channel_slopes(run.reference, cfg.vehicle, cfg.linearization.slope_tolerance);
  run.sectors = sector_slopes(run.reference, cfg.vehicle, cfg.linearization.slope_tolerance);
  const auto family =
      lpv_family(run.reference, cfg.vehicle, run.sectors.K_sigma, cfg.linearization.fd_relative_step);
  const auto selection = select_varying_parameters(family, cfg.linearization.parameter_count);
  run.polytope = build_polytope(selection);
  run.vertices = to_vertices(run.polytope->vertices());

  SdpProblem problem;
  if (cfg.synthesis.mode == SynthesisMode::kDstab) {
    run.region = vertical_strip_region(cfg.synthesis.strip_max, cfg.synthesis.strip_min);
    run.region.validate(seed);
    problem = dstab_lmi(run.vertices, run.region);
  } else {
    run.region = half_plane_region(cfg.synthesis.beta);
    run.region.validate(seed);
    problem = contractivity_lmi(run.vertices, cfg.synthesis.beta);
  }
  SdpOptions opt;
  opt.threads = threads;
  opt.polish = cfg.synthesis.polish;
  run.result = solve_feasibility(problem, BarrierSdpSolver(opt));
  // Certification only makes sense on a gain that came out of a feasible solve.
  if (run.result.feasible()) {
    run.certification = certify_gain(run.result.K, run.vertices, run.region, 0.0, threads);
  }
  return run;
}

GainFile make_gain_file(const RunConfig& cfg, const SynthesisRun& run) {
  GainFile g;
  g.mode = cfg.synthesis.mode;
  g.beta = cfg.synthesis.beta;
  g.strip_max = cfg.synthesis.strip_max;
  g.strip_min = cfg.synthesis.strip_min;
  g.status = std::string(to_string(run.result.status));
  g.worst_residual = run.result.worst_residual;
  g.depth = run.result.depth;
  g.newton_steps = run.result.newton_steps;
  g.K = run.result.K;
  g.Q = run.result.Q;
  g.R = run.result.R;
  g.certification = run.certification;
  return g;
}

int cmd_reference(const CommandOptions& o, std::ostream& log) {
  const auto ref = reference_or_report(o.config, log);
  if (!ref) return kExitFailure;
  const auto dir = out_dir(o);
  write_text(dir / "reference.csv", reference_csv(*ref));
  const std::string summary = reference_summary(*ref, o.config.vehicle);
  write_text(dir / "reference_summary.txt", summary);
  log << summary;
  return kExitOk;
}

int cmd_synthesize(const CommandOptions& o, std::ostream& log) {
  SynthesisRun run;
  try {
    run = run_synthesis(o.config, o.seed, o.threads);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kManeuverInfeasible) throw;
    log << "synthesize: " << e.what() << '\n';
    return kExitFailure;
  }
  const auto dir = out_dir(o);
  write_text(dir / "sector_slopes.csv", sector_slopes_csv(run.reference, run.slopes));
  write_text(dir / "polytope.json", polytope_json(*run.polytope));

  std::ostringstream rep;
  rep << "mode " << to_string(o.config.synthesis.mode) << '\n';
  if (o.config.synthesis.mode == SynthesisMode::kDstab) {
    rep << "strip " << short_num(o.config.synthesis.strip_min) << ' '
        << short_num(o.config.synthesis.strip_max) << '\n';
  } else {
    rep << "beta " << short_num(o.config.synthesis.beta) << '\n';
  }
  rep << "sector slopes (k_min k_max):\n";
  static const char* names[kChannels] = {"N_f", "N_r", "F_xf", "F_xr", "F_yf", "F_yr"};
  for (int i = 0; i < kChannels; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    rep << "  " << names[i] << ' ' << short_num(run.sectors.k_min[ui]) << ' '
        << short_num(run.sectors.k_max[ui]) << '\n';
  }
  rep << "varying parameters:\n";
  for (const auto& d : run.polytope->parameters()) {
    rep << "  " << d.label << " [" << short_num(d.lower) << ", " << short_num(d.upper) << "]\n";
  }
  rep << "vertices " << run.vertices.size() << '\n';
  rep << "status " << to_string(run.result.status) << '\n';
  rep << "worst_residual " << num(run.result.worst_residual) << '\n';
  rep << "newton_steps " << run.result.newton_steps << '\n';
  if (!run.result.message.empty()) rep << "solver " << run.result.message << '\n';

  if (!run.result.feasible()) {
    rep << "certification skipped: synthesis did not return a gain\n";
    write_text(dir / "synthesis_report.txt", rep.str());
    log << rep.str();
    return kExitFailure;
  }
  const auto& cert = *run.certification;
  rep << "certification " << (cert.pass ? "pass" : "fail") << '\n';
  rep << "worst_region_depth " << num(cert.worst_depth) << '\n';
  rep << "worst_spectral_abscissa " << num(cert.worst_abscissa) << '\n';
  if (!cert.offending.empty()) {
    rep << "offending vertices:";
    for (std::size_t i : cert.offending) rep << ' ' << i;
    rep << '\n';
  }
  write_text(dir / "gain.txt", gain_text(make_gain_file(o.config, run)));
  write_text(dir / "synthesis_report.txt", rep.str());
  log << rep.str();
  return cert.pass ? kExitOk : kExitFailure;
}

int cmd_simulate(const CommandOptions& o, std::ostream& log) {
  const auto dir = out_dir(o);
  const GainFile gain = load_gain(o.gain_path.empty() ? dir / "gain.txt" : o.gain_path);
  const auto ref = reference_or_report(o.config, log);
  if (!ref) return kExitFailure;
  const GainMatrix K = gain.K;
  const auto& offsets = o.offsets ? *o.offsets : o.config.simulation.offsets;
  std::ostringstream rep;
  rep << "dv0 du0 converged diverged terminal_error peak_torque_command_n_m "
         "peak_steer_command_rad reason\n";
  for (const auto& off : offsets) {
    ErrorVector e = ErrorVector::Zero();
    e(0) = off[0];
    e(1) = off[1];
    const SimTrace tr = simulate_closed_loop(K, *ref, e, o.config.vehicle, o.config.simulation.options);
    char name[96];
    std::snprintf(name, sizeof name, "trace_dv%+.3f_du%+.3f.csv", off[0], off[1]);
    write_text(dir / name, trace_csv(tr));
    rep << short_num(off[0]) << ' ' << short_num(off[1]) << ' ' << (tr.converged ? 1 : 0) << ' '
        << (tr.diverged ? 1 : 0) << ' ' << short_num(tr.terminal_error) << ' '
        << short_num(tr.peak_torque_command) << ' ' << short_num(tr.peak_steer_command) << ' '
        << (tr.diverged ? tr.divergence_reason : "-") << '\n';
  }
  write_text(dir / "simulate_report.txt", rep.str());
  log << rep.str();
  return kExitOk;
}

int cmd_sweep(const CommandOptions& o, std::ostream& log) {
  const auto dir = out_dir(o);
  const GainFile gain = load_gain(o.gain_path.empty() ? dir / "gain.txt" : o.gain_path);
  const auto ref = reference_or_report(o.config, log);
  if (!ref) return kExitFailure;
  const GainMatrix K = gain.K;
  const SweepResult sweep = region_of_attraction_sweep(K, *ref, o.config.sweep, o.config.vehicle,
                                                       o.config.simulation.options, o.threads);
  write_text(dir / "sweep.csv", sweep_csv(sweep));
  std::size_t converged = 0;
  double dv_lo = 0.0, dv_hi = 0.0, du_lo = 0.0, du_hi = 0.0;
  bool first = true;
  for (const auto& p : sweep.points) {
    if (!p.converged) continue;
    ++converged;
    if (first) {
      dv_lo = dv_hi = p.dv0;
      du_lo = du_hi = p.du0;
      first = false;
    }
    dv_lo = std::min(dv_lo, p.dv0);
    dv_hi = std::max(dv_hi, p.dv0);
    du_lo = std::min(du_lo, p.du0);
    du_hi = std::max(du_hi, p.du0);
  }
  std::ostringstream rep;
  rep << "grid " << sweep.n_dv << " x " << sweep.n_du << '\n';
  rep << "converged " << converged << '\n';
  if (converged > 0) {
    rep << "bounding_box_dv " << short_num(dv_lo) << ' ' << short_num(dv_hi) << '\n';
    rep << "bounding_box_du " << short_num(du_lo) << ' ' << short_num(du_hi) << '\n';
  }
  rep << "max_abs_dv " << short_num(sweep.max_converged_dv()) << '\n';
  rep << "max_abs_du " << short_num(sweep.max_converged_du()) << '\n';
  rep << "connected " << (sweep.converged_set_connected() ? 1 : 0) << '\n';
  rep << "hole_free " << (sweep.converged_set_hole_free() ? 1 : 0) << '\n';
  write_text(dir / "sweep_summary.txt", rep.str());
  log << rep.str();
  return kExitOk;
}

}  // namespace lpvcar
