#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lpvcar/config.hpp"
#include "lpvcar/lmi_synthesis.hpp"

namespace lpvcar {

// All writers throw Error(kIo) when the file cannot be written. Numbers use %.17g
// so that files round-trip exactly and identical runs give identical bytes.

void write_text(const std::filesystem::path& path, const std::string& text);

// t, the 8 states, the 3 inputs, the 6 saturated channels, loop iterations/residual.
std::string reference_csv(const ReferenceTrajectory& ref);

// t, v, u, r, omega_wf, omega_wr, x, y, psi, delta_f, tau_wf, tau_wr, x_L, y_L, dpsi, dv, du, dr
std::string trace_csv(const SimTrace& trace);

// dv0, du0, converged (0/1), terminal_error
std::string sweep_csv(const SweepResult& sweep);

// channel, t, slope
std::string sector_slopes_csv(const ReferenceTrajectory& ref, const std::vector<Vec6>& slopes);

// Descriptors and frozen base; vertex i sets parameter j to its upper bound iff bit j of i.
std::string polytope_json(const PolytopicModel& model);

struct GainFile {
  SynthesisMode mode = SynthesisMode::kDstab;
  double beta = 0.0;               // contractivity runs
  double strip_max = 0.0;          // dstab runs
  double strip_min = 0.0;
  std::string status;              // feasible / infeasible / stalled
  double worst_residual = 0.0;
  double depth = 0.0;
  int newton_steps = 0;
  Eigen::MatrixXd K, Q, R;
  std::optional<CertificationReport> certification;
};

std::string gain_text(const GainFile& gain);
GainFile parse_gain_text(const std::string& text);
// Reads a gain file and checks that K is a finite 3 x 8 matrix. Throws Error(kIo).
GainFile load_gain(const std::filesystem::path& path);

}  // namespace lpvcar
