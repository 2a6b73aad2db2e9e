// Acceptance checks for the full pipeline. Prints one PASS/FAIL line per criterion and
// exits with the number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "lpvcar/pipeline.hpp"
#include "test_support.hpp"

using namespace lpvcar;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::max(1, std::atoi(argv[1])) : 1;
  const RunConfig cfg;  // the default 6 m lane change at 70 km/h, dstab mode
  const VehicleParams& p = cfg.vehicle;
  const ReferenceTrajectory& ref = test::default_reference();

  report(1, "polytope scale", [&] {
    const auto sec = sector_slopes(ref, p);
    const auto family = lpv_family(ref, p, sec.K_sigma);
    const auto t0 = Clock::now();
    const auto sel = select_varying_parameters(family, 6);
    const auto poly = build_polytope(sel);
    const auto verts = poly.vertices();
    const double dt = seconds_since(t0);
    bool dims = verts.size() == 256;
    for (const auto& v : verts) {
      dims = dims && v.A.rows() == 8 && v.A.cols() == 8 && v.B.rows() == 8 && v.B.cols() == 3;
    }
    return Outcome{dims && sel.parameters.size() == 8 && dt < 1.0,
                   fmt("%.0f vertices, 8x8 / 8x3 systems, %.0f time-varying entries, built in %.3f s",
                       static_cast<double>(verts.size()), sel.varying_entries, dt)};
  });

  std::optional<SynthesisRun> run;
  report(2, "synthesis certification", [&] {
    const auto t0 = Clock::now();
    run = run_synthesis(cfg, 0, threads);
    const double dt = seconds_since(t0);
    if (!run->result.feasible()) {
      return Outcome{false, "synthesis " + std::string(to_string(run->result.status)) +
                                fmt(", worst residual %.3g", run->result.worst_residual)};
    }
    const auto cert = certify_gain(run->result.K, run->vertices, run->region, 1e-6, threads);
    double min_real = INFINITY;
    for (const auto& v : cert.vertices) min_real = std::min(min_real, v.min_real);
    return Outcome{cert.pass && cert.vertices.size() == 256 && dt < 600.0,
                   fmt("%.0f/256 vertices inside (-40,-2) with depth >= 1e-6; eigenvalue real parts "
                       "in [%.3f, %.3f]; %.1f s",
                       static_cast<double>(cert.vertices.size() - cert.offending.size()), min_real,
                       cert.worst_abscissa, dt)};
  });

  report(3, "closed-loop convergence from (0.3, 0.3)", [&] {
    if (!run || !run->result.feasible()) return Outcome{false, "no gain"};
    ErrorVector off = ErrorVector::Zero();
    off(0) = 0.3;
    off(1) = 0.3;
    const GainMatrix K = run->result.K;
    const SimTrace tr = simulate_closed_loop(K, ref, off, p, cfg.simulation.options);
    if (tr.diverged) {
      return Outcome{false, "diverged at t = " + fmt("%.3f s", tr.t.back()) + " (" +
                                tr.divergence_reason + fmt("), peak torque command %.0f N m",
                                                           tr.peak_torque_command)};
    }
    const ErrorVector& e = tr.error.back();
    const double pos = std::max(std::abs(e(5)), std::abs(e(6)));
    const double vel = std::max(std::abs(e(0)), std::abs(e(1)));
    return Outcome{tr.converged, fmt("terminal |(x_L,y_L)| = %.3g m, |(dv,du)| = %.3g m/s", pos, vel)};
  });

  report(4, "region of attraction", [&] {
    if (!run || !run->result.feasible()) return Outcome{false, "no gain"};
    const GainMatrix K = run->result.K;
    const SweepResult sw =
        region_of_attraction_sweep(K, ref, cfg.sweep, p, cfg.simulation.options, threads);
    bool origin = false;
    for (const auto& pt : sw.points) {
      if (std::abs(pt.dv0) < 1e-12 && std::abs(pt.du0) < 1e-12) origin = pt.converged;
    }
    const double hv = sw.max_converged_dv(), hu = sw.max_converged_du();
    const bool conn = sw.converged_set_connected(), holes = sw.converged_set_hole_free();
    const bool scale = hv >= 0.4 / 3 && hv <= 0.4 * 3 && hu >= 0.64 / 3 && hu <= 0.64 * 3;
    return Outcome{origin && conn && holes && scale,
                   fmt("half-widths |dv| %.2f (need [0.133, 1.2]), |du| %.2f (need [0.213, 1.92]); ",
                       hv, hu) +
                       std::string(origin ? "origin converged, " : "origin NOT converged, ") +
                       (conn && holes ? "simply connected" : "not simply connected")};
  });

  report(5, "tire invariants", [&] {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> kappa(-1.0, 1.0), alpha(-0.6, 0.6), load(1.0, 16000.0),
        x(-1e5, 1e5);
    long circle = 0, nullity = 0, bounds = 0;
    TireParams t = p.tire;
    for (int i = 0; i < 100000; ++i) {
      const double n = load(rng);
      const WheelForce f = unsaturated_force(t, TireModel::kDugoff, n, kappa(rng), alpha(rng));
      const WheelForce s = saturate_wheel(f, t.mu, n);
      if (s.fx * s.fx + s.fy * s.fy > (t.mu * n) * (t.mu * n) * (1.0 + 1e-9)) ++circle;
      const WheelForce z = unsaturated_force(t, TireModel::kDugoff, n, 0.0, 0.0);
      if (z.fx != 0.0 || z.fy != 0.0) ++nullity;
      const double lo = -t.mu * n, hi = t.mu * n;
      const double y = logistic(x(rng), hi, lo);
      if (!(y >= lo && y <= hi)) ++bounds;
    }
    return Outcome{circle == 0 && nullity == 0 && bounds == 0,
                   fmt("1e5 samples: %.0f circle violations, %.0f nonzero zero-slip forces, %.0f "
                       "logistic bound violations",
                       static_cast<double>(circle), static_cast<double>(nullity),
                       static_cast<double>(bounds))};
  });

  report(6, "Jacobian oracle", [&] {
    VehicleParams lin_p = p;
    lin_p.tire_model = TireModel::kLinear;
    lin_p.saturation = SaturationMode::kIdentity;
    lin_p.f_r = 0.0;
    double worst_analytic = 0.0;
    for (std::size_t k = 500; k < ref.size(); k += 1000) {
      VehicleState s = ref.x[k];
      s.omega_wf *= 1.002;  // small longitudinal slip so every term is active
      const auto pt = test::loop_point(s, ref.u[k], lin_p);
      const auto closed = sector_closed_matrices(jacobians_at(pt, lin_p), Mat6::Identity());
      const auto an = test::linear_bicycle(pt.state, pt.input, lin_p);
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
          if (std::abs(an.A(i, j)) > 1e-3) {
            worst_analytic = std::max(worst_analytic,
                                      std::abs(closed.A_tilde(i, j) - an.A(i, j)) / std::abs(an.A(i, j)));
          }
        }
        for (int j = 0; j < 3; ++j) {
          if (std::abs(an.B(i, j)) > 1e-3) {
            worst_analytic = std::max(worst_analytic,
                                      std::abs(closed.B_tilde(i, j) - an.B(i, j)) / std::abs(an.B(i, j)));
          }
        }
      }
    }
    double worst_richardson = 0.0;
    for (std::size_t k = 250; k < ref.size(); k += 500) {
      const auto pt = operating_point(ref, k);
      const auto a = jacobians_at(pt, p, 1e-5);
      const auto b = jacobians_at(pt, p, 5e-6);
      auto upd = [&](const auto& x, const auto& y) {
        const double floor = 1e-6 * y.cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
          for (Eigen::Index j = 0; j < y.cols(); ++j) {
            if (std::abs(y(i, j)) > floor) {
              worst_richardson =
                  std::max(worst_richardson, std::abs(x(i, j) - y(i, j)) / std::abs(y(i, j)));
            }
          }
        }
      };
      upd(a.A, b.A);
      upd(a.B, b.B);
      upd(a.C, b.C);
      upd(a.D, b.D);
      upd(a.D_sigma, b.D_sigma);
    }
    return Outcome{worst_analytic < 1e-6 && worst_richardson < 1e-4,
                   fmt("analytic bicycle max rel. error %.2e (< 1e-6), step-halving max rel. change "
                       "%.2e (< 1e-4)",
                       worst_analytic, worst_richardson)};
  });

  report(7, "algebraic loop along the reference", [&] {
    double worst = 0.0;
    int max_it = 0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
      const LoopSolution s = resolve_algebraic_loop(ref.x[k], ref.u[k], p);
      worst = std::max(worst, s.residual);
      max_it = std::max(max_it, s.iterations);
    }
    return Outcome{worst < 1e-10 && max_it <= 30,
                   fmt("%.0f samples, max residual %.2e, max iterations %.0f",
                       static_cast<double>(ref.size()), worst, max_it)};
  });

  report(8, "scalar LMI verdicts", [&] {
    auto sc = [](double a, double b) {
      return LtiVertex{Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Constant(1, 1, b)};
    };
    const auto strip = vertical_strip_region(-2.0, -40.0);
    struct Case {
      const char* name;
      SdpProblem problem;
      bool feasible;
    };
    std::vector<Case> cases = {
        {"A=-1,B=0,beta=0.5", contractivity_lmi({sc(-1, 0)}, 0.5), true},
        {"A=1,B=0,beta=0.5", contractivity_lmi({sc(1, 0)}, 0.5), false},
        {"A=1,B=1,beta=0.5", contractivity_lmi({sc(1, 1)}, 0.5), true},
        {"strip A=-10", dstab_lmi({sc(-10, 0)}, strip), true},
        {"strip A=-1", dstab_lmi({sc(-1, 0)}, strip), false},
        {"strip A=0,B=1", dstab_lmi({sc(0, 1)}, strip), true},
    };
    int ok = 0;
    std::string wrong;
    for (auto& c : cases) {
      const auto r = solve_feasibility(c.problem);
      const bool verdict_ok = c.feasible ? r.feasible() : r.status == SdpStatus::kInfeasible;
      if (verdict_ok) ++ok;
      else wrong += std::string(" ") + c.name;
    }
    return Outcome{ok == 6, fmt("%.0f/6 verdicts reproduced", ok) + wrong};
  });

  report(9, "unit-slope sector closure", [&] {
    VehicleParams id = p;
    id.saturation = SaturationMode::kIdentity;
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const std::size_t k = 150 + static_cast<std::size_t>(i) * 290;
      const auto pt = test::loop_point(ref.x[k], ref.u[k], id);
      const Mat5 closed = sector_closed_matrices(jacobians_at(pt, id), Mat6::Identity()).A_tilde;
      const Mat5 direct = test::full_jacobian(pt, id);
      worst = std::max(worst, (closed - direct).cwiseAbs().maxCoeff() / direct.cwiseAbs().maxCoeff());
    }
    return Outcome{worst < 1e-5, fmt("20 points, max |A_tilde - J| / max|J| = %.2e (< 1e-5)", worst)};
  });

  report(10, "determinism of the gain file", [&] {
    const fs::path base = fs::temp_directory_path() / "lpvcar_acceptance";
    fs::remove_all(base);
    std::ostringstream sink;
    CommandOptions o;
    o.config = cfg;
    o.seed = 42;
    o.threads = threads;
    o.out_dir = base / "a";
    const int ea = cmd_synthesize(o, sink);
    o.out_dir = base / "b";
    const int eb = cmd_synthesize(o, sink);
    const std::string ga = slurp(base / "a" / "gain.txt"), gb = slurp(base / "b" / "gain.txt");
    const bool same = !ga.empty() && ga == gb;
    return Outcome{ea == 0 && eb == 0 && same,
                   fmt("exit codes %.0f/%.0f, ", ea, eb) +
                       (same ? "gain files byte-identical (" + std::to_string(ga.size()) + " bytes)"
                             : std::string("gain files differ or missing"))};
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}
