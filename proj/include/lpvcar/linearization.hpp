#pragma once

#include <array>
#include <string>
#include <vector>

#include "lpvcar/trajectory_sim.hpp"

namespace lpvcar {

using Mat5 = Eigen::Matrix<double, kDynStates, kDynStates>;
using Mat53 = Eigen::Matrix<double, kDynStates, kInputs>;
using Mat65 = Eigen::Matrix<double, kChannels, kDynStates>;
using Mat63 = Eigen::Matrix<double, kChannels, kInputs>;
using Mat6 = Eigen::Matrix<double, kChannels, kChannels>;
using Mat8 = Eigen::Matrix<double, kErrorStates, kErrorStates>;
using Mat83 = Eigen::Matrix<double, kErrorStates, kInputs>;

// A point of the reference where the algebraic loop is satisfied.
struct OperatingPoint {
  double t = 0.0;
  VehicleState state;
  VehicleInput input;
  Vec5 xdot = Vec5::Zero();
  SigmaVector sigma = SigmaVector::Zero();
};

OperatingPoint operating_point(const ReferenceTrajectory& ref, std::size_t k);

// dx' = A dx + B du + B_sigma dsigma,  dh = C dx + D du + D_sigma dsigma.
struct LinearizedSystem {
  double t = 0.0;
  Mat5 A = Mat5::Zero();
  Mat53 B = Mat53::Zero();
  SigmaMatrix B_sigma = SigmaMatrix::Zero();
  Mat65 C = Mat65::Zero();
  Mat63 D = Mat63::Zero();
  Mat6 D_sigma = Mat6::Zero();
};

inline constexpr double kDefaultFdStep = 1e-6;

// Central finite differences with per-coordinate step rel_step * max(1, |value|);
// C, D and D_sigma include the dh/dxdot chain terms.
LinearizedSystem jacobians_at(const OperatingPoint& point, const VehicleParams& params,
                              double rel_step = kDefaultFdStep);

std::vector<LinearizedSystem> linearize_reference(const ReferenceTrajectory& ref,
                                                  const VehicleParams& params,
                                                  double rel_step = kDefaultFdStep);

struct SectorBounds {
  std::array<double, kChannels> k_min{};
  std::array<double, kChannels> k_max{};
  Mat6 K_sigma = Mat6::Identity();
};

// Per-sample secant slopes of each channel about its saturation centre; 1 where the
// input sits within tol_h of the centre.
std::vector<Vec6> channel_slopes(const ReferenceTrajectory& ref, const VehicleParams& params,
                                 double tol_h = 1e-6);

// Slope envelope over the reference; K_sigma is the diagonal of sector midpoints.
SectorBounds sector_slopes(const ReferenceTrajectory& ref, const VehicleParams& params,
                           double tol_h = 1e-6);

struct ClosedSector {
  Mat5 A_tilde = Mat5::Zero();
  Mat53 B_tilde = Mat53::Zero();
};

// A + B_s K (I - D_s K)^-1 C and B + B_s K (I - D_s K)^-1 D. Throws SingularLoop when
// I - D_s K has condition number above 1e8.
ClosedSector sector_closed_matrices(const LinearizedSystem& lin, const Mat6& K_sigma);

struct AugmentedSystem {
  double t = 0.0;
  Mat8 A = Mat8::Zero();
  Mat83 B = Mat83::Zero();
};

// Appends x_L' = dv, y_L' = dv psi0 + dpsi v0 cos psi0, dpsi' = dr.
AugmentedSystem augment_error_dynamics(const Mat5& A_tilde, const Mat53& B_tilde, double psi0,
                                       double v0);

// Linearize, close the sectors with K_sigma and augment at every reference sample.
std::vector<AugmentedSystem> lpv_family(const ReferenceTrajectory& ref,
                                        const VehicleParams& params, const Mat6& K_sigma,
                                        double rel_step = kDefaultFdStep);

struct ParameterDescriptor {
  enum class Matrix { kA, kB };
  Matrix matrix = Matrix::kA;
  int row = 0;
  int col = 0;
  double lower = 0.0;
  double upper = 0.0;
  double mean = 0.0;
  std::string label;
};

struct ParameterSelection {
  std::vector<ParameterDescriptor> parameters;
  AugmentedSystem base;  // trajectory means of every entry
  int varying_entries = 0;  // time-varying entries of (A_tilde, B_tilde)
};

// Picks the `count` entries of (A_tilde, B_tilde) with the largest range relative to
// their peak magnitude and appends psi0 and v0 cos psi0 (the y_L row couplings).
ParameterSelection select_varying_parameters(const std::vector<AugmentedSystem>& family,
                                             int count = 6);

inline constexpr int kMaxPolytopeParameters = 12;

class PolytopicModel {
 public:
  PolytopicModel(AugmentedSystem base, std::vector<ParameterDescriptor> parameters);

  const AugmentedSystem& base() const { return base_; }
  const std::vector<ParameterDescriptor>& parameters() const { return parameters_; }
  std::size_t vertex_count() const { return std::size_t{1} << parameters_.size(); }
  // Bit i of `index` puts parameter i at its upper bound.
  AugmentedSystem vertex(std::size_t index) const;
  std::vector<AugmentedSystem> vertices() const;

 private:
  AugmentedSystem base_;
  std::vector<ParameterDescriptor> parameters_;
};

// Throws TooManyParameters beyond kMaxPolytopeParameters.
PolytopicModel build_polytope(const ParameterSelection& selection);

}  // namespace lpvcar
