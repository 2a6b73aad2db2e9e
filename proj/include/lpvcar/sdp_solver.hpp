#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lpvcar {

// One affine matrix inequality F(Q, R) < -margin * I. `map` must be affine in (Q, R)
// and return a symmetric size x size matrix. `scale` normalizes the constraint inside
// the solver so that blocks of very different magnitude are weighted evenly.
struct AffineConstraint {
  std::string label;
  int size = 0;
  double margin = 0.0;
  double scale = 1.0;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R)> map;
};

// Decision variables: symmetric Q (n x n) and R (m x n).
struct SdpProblem {
  int n = 0;
  int m = 0;
  std::vector<AffineConstraint> constraints;

  void validate() const;
  // Largest eigenvalue of each F_i(Q, R) + margin_i I.
  std::vector<double> residuals(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) const;
};

enum class SdpStatus {
  kFeasible,
  kInfeasible,  // not found: the optimal depth cannot reach the margins
  kStalled,     // iteration cap hit before a verdict
};

std::string_view to_string(SdpStatus status);

struct SdpSolution {
  SdpStatus status = SdpStatus::kStalled;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  // max_i lambda_max(F_i + margin_i I) at the returned point; negative iff feasible.
  double worst_residual = 0.0;
  double depth = 0.0;        // min over normalized constraints of -lambda_max(F_i / scale_i)
  double lower_bound = 0.0;  // certified lower bound on the normalized objective
  int newton_steps = 0;
  int outer_iterations = 0;
  std::string message;
};

struct SdpOptions {
  int max_newton_steps = 3000;
  int max_outer_iterations = 40;
  double mu = 10.0;           // barrier weight growth
  double initial_weight = 1.0;
  double rel_gap = 1e-4;      // stop once the gap is below rel_gap * |objective|
  double abs_gap = 1e-9;
  double r_radius = 1e6;      // bound on ||R||_F that keeps the problem compact
  // When false the first verified central point is returned; when true the
  // objective is driven to the gap tolerance first.
  bool polish = false;
  int threads = 1;
};

class SdpSolver {
 public:
  virtual ~SdpSolver() = default;
  virtual SdpSolution solve(const SdpProblem& problem) const = 0;
};

// Primal log-barrier method for
//   minimize t  s.t.  F_i(Q, R) / scale_i <= t I,  Q <= I,  ||R||_F <= r_radius.
// The constraints are homogeneous in practice, so the normalization only fixes the
// scale of (Q, R). Results depend only on the problem and the thread count.
class BarrierSdpSolver final : public SdpSolver {
 public:
  explicit BarrierSdpSolver(SdpOptions options = {}) : options_(options) {}
  SdpSolution solve(const SdpProblem& problem) const override;

 private:
  SdpOptions options_;
};

}  // namespace lpvcar
