#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "lpvcar/config.hpp"
#include "lpvcar/io.hpp"

namespace lpvcar {

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // infeasible / stalled synthesis, infeasible maneuver
inline constexpr int kExitUsage = 2;    // usage or config error

struct CommandOptions {
  RunConfig config;
  std::filesystem::path out_dir;  // empty: config.output_dir
  std::uint64_t seed = 0;
  int threads = 1;
  std::filesystem::path gain_path;  // simulate / sweep; empty: <out>/gain.txt
  std::optional<std::vector<std::array<double, 2>>> offsets;  // overrides the config
};

// Everything the synthesis stage produces, in pipeline order. Later members stay
// empty when an earlier stage failed.
struct SynthesisRun {
  ReferenceTrajectory reference;
  SectorBounds sectors;
  std::vector<Vec6> slopes;
  std::optional<PolytopicModel> polytope;
  std::vector<LtiVertex> vertices;
  LmiRegion region;  // strip, or the half-plane Re z < -beta for contractivity
  SynthesisResult result;
  std::optional<CertificationReport> certification;
};

SynthesisRun run_synthesis(const RunConfig& config, std::uint64_t seed = 0, int threads = 1);
GainFile make_gain_file(const RunConfig& config, const SynthesisRun& run);

// Each command writes its artifacts and a short report to `log` and returns an exit
// code. Error exceptions other than ManeuverInfeasible propagate.
int cmd_reference(const CommandOptions& options, std::ostream& log);
int cmd_synthesize(const CommandOptions& options, std::ostream& log);
int cmd_simulate(const CommandOptions& options, std::ostream& log);
int cmd_sweep(const CommandOptions& options, std::ostream& log);

}  // namespace lpvcar
