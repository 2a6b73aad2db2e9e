// Command-line front end: reference, synthesize, simulate, sweep.
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "lpvcar/errors.hpp"
#include "lpvcar/pipeline.hpp"

namespace {

std::array<double, 2> parse_offset(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw lpvcar::Error(lpvcar::ErrorCode::kConfig, "offset must look like dv,du: '" + text + "'");
  }
  try {
    return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw lpvcar::Error(lpvcar::ErrorCode::kConfig, "bad offset '" + text + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LPV robust tracking controller pipeline"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir, mode, gain_path;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<std::string> offsets;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory (default: output_dir of the config)");
    sub->add_option("--seed", seed, "seed for the randomized checks");
    sub->add_option("--threads", threads, "worker cap")->check(CLI::Range(1, 256));
    sub->add_option("--mode", mode, "synthesis mode")
        ->check(CLI::IsMember({"contractivity", "dstab"}));
  };
  auto* reference = app.add_subcommand("reference", "integrate the open-loop maneuver");
  auto* synthesize = app.add_subcommand("synthesize", "linearize, build the polytope, solve the LMIs");
  auto* simulate = app.add_subcommand("simulate", "closed-loop runs from given offsets");
  auto* sweep = app.add_subcommand("sweep", "empirical region of attraction");
  for (auto* sub : {reference, synthesize, simulate, sweep}) add_common(sub);
  for (auto* sub : {simulate, sweep}) {
    sub->add_option("--gain", gain_path, "gain file (default: <out>/gain.txt)");
  }
  simulate->add_option("--offset", offsets, "initial offset dv,du in m/s (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return lpvcar::kExitUsage;
  }

  lpvcar::CommandOptions opt;
  try {
    opt.config = lpvcar::load_config(config_path);
    if (!mode.empty()) opt.config.synthesis.mode = lpvcar::parse_synthesis_mode(mode);
    if (!offsets.empty()) {
      opt.offsets.emplace();
      for (const auto& s : offsets) opt.offsets->push_back(parse_offset(s));
    }
  } catch (const lpvcar::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return lpvcar::kExitUsage;
  }
  opt.out_dir = out_dir;
  opt.seed = seed;
  opt.threads = threads;
  opt.gain_path = gain_path;

  try {
    if (*reference) return lpvcar::cmd_reference(opt, std::cout);
    if (*synthesize) return lpvcar::cmd_synthesize(opt, std::cout);
    if (*simulate) return lpvcar::cmd_simulate(opt, std::cout);
    return lpvcar::cmd_sweep(opt, std::cout);
  } catch (const lpvcar::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == lpvcar::ErrorCode::kConfig ? lpvcar::kExitUsage : lpvcar::kExitFailure;
  }
}
