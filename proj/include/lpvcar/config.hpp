#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "lpvcar/trajectory_sim.hpp"

namespace lpvcar {

enum class SynthesisMode { kContractivity, kDstab };

std::string_view to_string(SynthesisMode mode);
SynthesisMode parse_synthesis_mode(std::string_view text);

struct LinearizationConfig {
  double fd_relative_step = 1e-6;
  double slope_tolerance = 1e-6;  // |h - centre| below which a slope counts as 1
  int parameter_count = 6;        // selected entries of (A_tilde, B_tilde)
};

struct SynthesisConfig {
  SynthesisMode mode = SynthesisMode::kDstab;
  double beta = 2.0;          // 1/s, contractivity level
  double strip_max = -2.0;    // 1/s
  double strip_min = -40.0;   // 1/s
  bool polish = false;
};

struct SimulationConfig {
  SimOptions options;
  std::vector<std::array<double, 2>> offsets = {{0.3, 0.3}};  // (dv0, du0), m/s
};

struct RunConfig {
  VehicleParams vehicle;
  ManeuverSpec maneuver;
  LinearizationConfig linearization;
  SynthesisConfig synthesis;
  SimulationConfig simulation;
  SweepGrid sweep;
  std::string output_dir = "out";

  RunConfig();  // defaults: 6 m calibrated lane change
  void validate() const;
};

// Parses JSON text. Every block must be present; keys inside a block are optional
// and fall back to the defaults; unknown keys are rejected. Throws Error(kConfig).
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Canonical JSON (sorted keys, two-space indent, trailing newline).
std::string serialize_config(const RunConfig& config);

}  // namespace lpvcar
