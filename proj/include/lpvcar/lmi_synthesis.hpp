#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "lpvcar/linearization.hpp"
#include "lpvcar/sdp_solver.hpp"

namespace lpvcar {

// Linear vertex system x' = A x + B u of any size.
struct LtiVertex {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
};

std::vector<LtiVertex> to_vertices(const std::vector<AugmentedSystem>& systems);

// { z : L + z M + conj(z) M^T < 0 }.
struct LmiRegion {
  Eigen::MatrixXd L;
  Eigen::MatrixXd M;

  // Largest eigenvalue of L + z M + conj(z) M^T; negative inside.
  double characteristic(std::complex<double> z) const;
  bool contains(std::complex<double> z) const { return characteristic(z) < 0.0; }
  // -characteristic / 2: the distance to the boundary for half-planes and strips.
  double depth(std::complex<double> z) const { return -0.5 * characteristic(z); }
  // Checks symmetry of L and finds an interior point by seeded sampling.
  void validate(std::uint64_t seed = 0) const;
};

// lambda_min < Re z < lambda_max. Throws InvalidStrip unless lambda_min < lambda_max < 0.
LmiRegion vertical_strip_region(double lambda_max = -2.0, double lambda_min = -40.0);
// Re z < -beta.
LmiRegion half_plane_region(double beta);

inline constexpr double kRelativeMargin = 1e-7;

// Per vertex: Q A^T + A Q + R^T B^T + B R + 2 beta Q < -eps_i I, plus Q > eps I.
SdpProblem contractivity_lmi(const std::vector<LtiVertex>& vertices, double beta);

// Per vertex: L (x) Q + M (x) (A Q + B R) + M^T (x) (A Q + B R)^T < -eps_i I, plus Q > eps I.
SdpProblem dstab_lmi(const std::vector<LtiVertex>& vertices, const LmiRegion& region);

struct SynthesisResult {
  SdpStatus status = SdpStatus::kStalled;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  Eigen::MatrixXd K;  // R Q^-1
  double worst_residual = 0.0;  // max_i lambda_max(F_i + eps_i I)
  double depth = 0.0;
  double lower_bound = 0.0;
  int newton_steps = 0;
  std::string message;

  bool feasible() const { return status == SdpStatus::kFeasible; }
};

SynthesisResult solve_feasibility(const SdpProblem& problem, const SdpSolver& solver);
SynthesisResult solve_feasibility(const SdpProblem& problem, int threads = 1);

struct VertexCertificate {
  std::size_t index = 0;
  double spectral_abscissa = 0.0;
  double min_real = 0.0;
  double depth = 0.0;  // smallest region depth over the eigenvalues
  bool inside = false;
};

struct CertificationReport {
  std::vector<VertexCertificate> vertices;
  std::vector<std::size_t> offending;
  double worst_depth = 0.0;
  double worst_abscissa = 0.0;
  bool pass = false;
};

// Eigenvalues of A_i + B_i K for every vertex; pass iff every eigenvalue lies in the
// region with depth above min_depth.
CertificationReport certify_gain(const Eigen::MatrixXd& K, const std::vector<LtiVertex>& vertices,
                                 const LmiRegion& region, double min_depth = 0.0,
                                 int threads = 1);

}  // namespace lpvcar
