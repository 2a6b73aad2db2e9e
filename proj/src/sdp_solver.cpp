#include "lpvcar/sdp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <thread>

#include "lpvcar/errors.hpp"

namespace lpvcar {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(SdpStatus status) {
  switch (status) {
    case SdpStatus::kFeasible: return "feasible";
    case SdpStatus::kInfeasible: return "infeasible";
    case SdpStatus::kStalled: return "stalled";
  }
  return "unknown";
}

void SdpProblem::validate() const {
  if (n <= 0 || m < 0) throw Error(ErrorCode::kInvalidArgument, "bad SDP variable dimensions");
  if (constraints.empty()) throw Error(ErrorCode::kInvalidArgument, "SDP without constraints");
  for (const auto& c : constraints) {
    if (c.size <= 0 || !c.map || !(c.scale > 0.0) || c.margin < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "malformed constraint '" + c.label + "'");
    }
    const MatrixXd probe = c.map(MatrixXd::Identity(n, n), MatrixXd::Zero(m, n));
    if (probe.rows() != c.size || probe.cols() != c.size) {
      throw Error(ErrorCode::kInvalidArgument, "constraint '" + c.label + "' has the wrong size");
    }
  }
}

std::vector<double> SdpProblem::residuals(const MatrixXd& Q, const MatrixXd& R) const {
  std::vector<double> out;
  out.reserve(constraints.size());
  for (const auto& c : constraints) {
    const MatrixXd f = c.map(Q, R);
    const MatrixXd sym = 0.5 * (f + f.transpose());
    const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
    out.push_back(eig.eigenvalues().maxCoeff() + c.margin);
  }
  return out;
}

namespace {

// Decision vector z = (t, half-vectorized Q, column-major R).
struct Layout {
  int n = 0;
  int m = 0;
  int nq = 0;
  int nr = 0;
  int size() const { return 1 + nq + nr; }

  void basis(int k, MatrixXd& Q, MatrixXd& R) const {
    Q.setZero(n, n);
    R.setZero(m, n);
    if (k < 1 + nq) {
      int idx = 1;
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i <= j; ++i, ++idx) {
          if (idx == k) {
            Q(i, j) = 1.0;
            Q(j, i) = 1.0;
            return;
          }
        }
      }
    } else {
      const int idx = k - 1 - nq;
      R(idx % m, idx / m) = 1.0;
    }
  }

  MatrixXd q_of(const VectorXd& z) const {
    MatrixXd Q(n, n);
    int idx = 1;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i <= j; ++i, ++idx) {
        Q(i, j) = z(idx);
        Q(j, i) = z(idx);
      }
    }
    return Q;
  }

  MatrixXd r_of(const VectorXd& z) const {
    MatrixXd R(m, n);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < m; ++i) R(i, j) = z(1 + nq + j * m + i);
    }
    return R;
  }

  VectorXd pack(const MatrixXd& Q, const MatrixXd& R, double t) const {
    VectorXd z(size());
    z(0) = t;
    int idx = 1;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i <= j; ++i, ++idx) z(idx) = Q(i, j);
    }
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < m; ++i) z(1 + nq + j * m + i) = R(i, j);
    }
    return z;
  }
};

// S(z) = t_coeff * t * I - (f0 + sum_k z_k basis_k), required positive definite.
struct Block {
  int size = 0;
  double t_coeff = 1.0;
  MatrixXd f0;
  std::vector<int> vars;  // indices into z (excluding t)
  std::vector<MatrixXd> basis;

  MatrixXd slack(const VectorXd& z) const {
    MatrixXd s = -f0;
    s.diagonal().array() += t_coeff * z(0);
    for (std::size_t k = 0; k < vars.size(); ++k) s.noalias() -= z(vars[k]) * basis[k];
    return s;
  }
};

// Splits each normalized constraint along its sparsity pattern; block-diagonal
// constraints (e.g. Kronecker products with diagonal region matrices) become
// independent smaller blocks.
std::vector<Block> build_blocks(const SdpProblem& problem, const Layout& lay) {
  std::vector<Block> blocks;
  const MatrixXd q0 = MatrixXd::Zero(lay.n, lay.n);
  const MatrixXd r0 = MatrixXd::Zero(lay.m, lay.n);
  MatrixXd qb;
  MatrixXd rb;
  for (const auto& c : problem.constraints) {
    const MatrixXd f0 = c.map(q0, r0) / c.scale;
    if (f0.rows() != c.size || f0.cols() != c.size) {
      throw Error(ErrorCode::kInvalidArgument, "constraint '" + c.label + "' has wrong size");
    }
    std::vector<MatrixXd> full(static_cast<std::size_t>(lay.size() - 1));
    MatrixXd pattern = f0.cwiseAbs();
    for (int k = 1; k < lay.size(); ++k) {
      lay.basis(k, qb, rb);
      MatrixXd fk = c.map(qb, rb) / c.scale - f0;
      if ((fk - fk.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + fk.cwiseAbs().maxCoeff())) {
        throw Error(ErrorCode::kInvalidArgument, "constraint '" + c.label + "' is not symmetric");
      }
      pattern += fk.cwiseAbs();
      full[static_cast<std::size_t>(k - 1)] = std::move(fk);
    }

    // Connected components of the sparsity graph.
    std::vector<int> parent(static_cast<std::size_t>(c.size));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int a) {
      while (parent[static_cast<std::size_t>(a)] != a) {
        a = parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      }
      return a;
    };
    for (int i = 0; i < c.size; ++i) {
      for (int j = i + 1; j < c.size; ++j) {
        if (pattern(i, j) != 0.0) parent[static_cast<std::size_t>(find(j))] = find(i);
      }
    }
    std::vector<std::vector<int>> groups;
    std::vector<int> group_of(static_cast<std::size_t>(c.size), -1);
    for (int i = 0; i < c.size; ++i) {
      const int root = find(i);
      if (group_of[static_cast<std::size_t>(root)] < 0) {
        group_of[static_cast<std::size_t>(root)] = static_cast<int>(groups.size());
        groups.emplace_back();
      }
      groups[static_cast<std::size_t>(group_of[static_cast<std::size_t>(root)])].push_back(i);
    }

    for (const auto& idx : groups) {
      const int b = static_cast<int>(idx.size());
      auto extract = [&](const MatrixXd& f) {
        MatrixXd out(b, b);
        for (int i = 0; i < b; ++i) {
          for (int j = 0; j < b; ++j) out(i, j) = f(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
        return out;
      };
      Block blk;
      blk.size = b;
      blk.f0 = extract(f0);
      for (int k = 1; k < lay.size(); ++k) {
        MatrixXd sub = extract(full[static_cast<std::size_t>(k - 1)]);
        if (sub.cwiseAbs().maxCoeff() > 0.0) {
          blk.vars.push_back(k);
          blk.basis.push_back(std::move(sub));
        }
      }
      blocks.push_back(std::move(blk));
    }
  }

  // Normalization Q <= I.
  Block norm;
  norm.size = lay.n;
  norm.t_coeff = 0.0;
  norm.f0 = -MatrixXd::Identity(lay.n, lay.n);
  for (int k = 1; k <= lay.nq; ++k) {
    lay.basis(k, qb, rb);
    norm.vars.push_back(k);
    norm.basis.push_back(qb);
  }
  blocks.push_back(std::move(norm));
  return blocks;
}

struct Derivatives {
  VectorXd grad;
  MatrixXd hess;
};

class BarrierProblem {
 public:
  BarrierProblem(std::vector<Block> blocks, const Layout& lay, double r_radius, int threads)
      : blocks_(std::move(blocks)), lay_(lay), r2_(r_radius * r_radius),
        threads_(std::max(1, threads)) {}

  double nu() const {
    double total = 1.0;  // the R-ball barrier
    for (const auto& b : blocks_) total += b.size;
    return total;
  }

  // Barrier value, or nullopt outside the domain.
  std::optional<double> barrier(const VectorXd& z) const {
    double value = 0.0;
    for (const auto& b : blocks_) {
      const Eigen::LLT<MatrixXd> llt(b.slack(z));
      if (llt.info() != Eigen::Success) return std::nullopt;
      const auto diag = llt.matrixLLT().diagonal();
      for (int i = 0; i < b.size; ++i) {
        if (!(diag(i) > 0.0)) return std::nullopt;
        value -= 2.0 * std::log(diag(i));
      }
    }
    const double d = r2_ - z.tail(lay_.nr).squaredNorm();
    if (!(d > 0.0)) return std::nullopt;
    return value - std::log(d);
  }

  Derivatives derivatives(const VectorXd& z) const {
    const int p = lay_.size();
    const int workers = std::min<int>(threads_, static_cast<int>(blocks_.size()));
    std::vector<Derivatives> partial(static_cast<std::size_t>(workers));
    auto work = [&](int w) {
      Derivatives& acc = partial[static_cast<std::size_t>(w)];
      acc.grad = VectorXd::Zero(p);
      acc.hess = MatrixXd::Zero(p, p);
      const std::size_t lo = blocks_.size() * static_cast<std::size_t>(w) / static_cast<std::size_t>(workers);
      const std::size_t hi = blocks_.size() * static_cast<std::size_t>(w + 1) / static_cast<std::size_t>(workers);
      for (std::size_t i = lo; i < hi; ++i) accumulate(blocks_[i], z, acc);
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
      for (auto& th : pool) th.join();
    }
    Derivatives out = std::move(partial[0]);
    for (std::size_t w = 1; w < partial.size(); ++w) {
      out.grad += partial[w].grad;
      out.hess += partial[w].hess;
    }
    const auto r = z.tail(lay_.nr);
    const double d = r2_ - r.squaredNorm();
    out.grad.tail(lay_.nr) += 2.0 * r / d;
    out.hess.bottomRightCorner(lay_.nr, lay_.nr) +=
        (2.0 / d) * MatrixXd::Identity(lay_.nr, lay_.nr) + (4.0 / (d * d)) * r * r.transpose();
    return out;
  }

 private:
  // Adds grad_k = -tr(S^-1 G_k) and H_kl = tr(S^-1 G_k S^-1 G_l), G_k = dS/dz_k.
  void accumulate(const Block& b, const VectorXd& z, Derivatives& acc) const {
    const Eigen::LLT<MatrixXd> llt(b.slack(z));
    const auto L = llt.matrixL();
    const bool has_t = b.t_coeff != 0.0;
    const int nv = static_cast<int>(b.vars.size()) + (has_t ? 1 : 0);
    const int half = b.size * (b.size + 1) / 2;
    MatrixXd P(half, nv);
    std::vector<int> index;
    index.reserve(static_cast<std::size_t>(nv));
    const double root2 = std::sqrt(2.0);
    auto add_column = [&](const MatrixXd& g, int col) {
      const MatrixXd x = L.solve(g);
      const MatrixXd gh = L.solve(x.transpose());  // L^-1 G L^-T (symmetric)
      int row = 0;
      for (int j = 0; j < b.size; ++j) {
        P(row++, col) = gh(j, j);
        for (int i = j + 1; i < b.size; ++i) P(row++, col) = root2 * 0.5 * (gh(i, j) + gh(j, i));
      }
    };
    int col = 0;
    if (has_t) {
      add_column(b.t_coeff * MatrixXd::Identity(b.size, b.size), col++);
      index.push_back(0);
    }
    for (std::size_t k = 0; k < b.vars.size(); ++k) {
      add_column(-b.basis[k], col++);
      index.push_back(b.vars[k]);
    }
    MatrixXd local = MatrixXd::Zero(nv, nv);
    local.selfadjointView<Eigen::Lower>().rankUpdate(P.transpose());
    local = local.selfadjointView<Eigen::Lower>();
    for (int a = 0; a < nv; ++a) {
      // The trace of the symmetric block sits on the diagonal rows of P.
      double trace = 0.0;
      int row = 0;
      for (int j = 0; j < b.size; ++j) {
        trace += P(row, a);
        row += b.size - j;
      }
      acc.grad(index[static_cast<std::size_t>(a)]) -= trace;
      for (int c = 0; c < nv; ++c) {
        acc.hess(index[static_cast<std::size_t>(a)], index[static_cast<std::size_t>(c)]) += local(a, c);
      }
    }
  }

  std::vector<Block> blocks_;
  Layout lay_;
  double r2_;
  int threads_;
};

}  // namespace

SdpSolution BarrierSdpSolver::solve(const SdpProblem& problem) const {
  problem.validate();
  const SdpOptions& opt = options_;
  Layout lay;
  lay.n = problem.n;
  lay.m = problem.m;
  lay.nq = problem.n * (problem.n + 1) / 2;
  lay.nr = problem.n * problem.m;

  std::vector<Block> blocks = build_blocks(problem, lay);
  double required_depth = std::numeric_limits<double>::infinity();
  for (const auto& c : problem.constraints) {
    required_depth = std::min(required_depth, c.margin / c.scale);
  }

  // Start from Q = I/2, R = 0 and a t that makes every block strictly feasible.
  VectorXd z = lay.pack(0.5 * MatrixXd::Identity(lay.n, lay.n), MatrixXd::Zero(lay.m, lay.n), 0.0);
  double t0 = -std::numeric_limits<double>::infinity();
  for (const auto& b : blocks) {
    if (b.t_coeff == 0.0) continue;
    const MatrixXd f = -b.slack(z);
    const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(f, Eigen::EigenvaluesOnly);
    t0 = std::max(t0, eig.eigenvalues().maxCoeff());
  }
  z(0) = t0 + 1.0;

  BarrierProblem barrier(std::move(blocks), lay, opt.r_radius, opt.threads);
  const double nu = barrier.nu();

  SdpSolution sol;
  auto finish = [&](SdpStatus status, std::string message) {
    sol.status = status;
    sol.Q = lay.q_of(z);
    sol.R = lay.r_of(z);
    const auto res = problem.residuals(sol.Q, sol.R);
    sol.worst_residual = *std::max_element(res.begin(), res.end());
    if (status == SdpStatus::kFeasible && !(sol.worst_residual < 0.0)) {
      sol.status = SdpStatus::kInfeasible;
      message += "; final verification failed";
    }
    sol.depth = -z(0);
    sol.message = std::move(message);
    return sol;
  };

  double weight = opt.initial_weight;
  auto objective = [&](const VectorXd& x) -> std::optional<double> {
    const auto b = barrier.barrier(x);
    if (!b) return std::nullopt;
    return weight * x(0) + *b;
  };

  for (int outer = 1; outer <= opt.max_outer_iterations; ++outer) {
    sol.outer_iterations = outer;
    // Centering by damped Newton steps.
    for (;;) {
      if (sol.newton_steps >= opt.max_newton_steps) {
        sol.lower_bound = z(0) - nu / weight;
        return finish(SdpStatus::kStalled, "Newton step cap reached");
      }
      Derivatives d = barrier.derivatives(z);
      d.grad(0) += weight;
      Eigen::LDLT<MatrixXd> ldlt(d.hess);
      VectorXd step = ldlt.solve(-d.grad);
      if (ldlt.info() != Eigen::Success || !step.allFinite()) {
        const double reg = 1e-12 * (1.0 + d.hess.diagonal().cwiseAbs().maxCoeff());
        ldlt.compute(d.hess + reg * MatrixXd::Identity(d.hess.rows(), d.hess.cols()));
        step = ldlt.solve(-d.grad);
      }
      const double slope = d.grad.dot(step);
      ++sol.newton_steps;
      if (!(slope < 0.0) || -slope / 2.0 < 1e-9) break;
      // Near the central path the objective is bounded below even before the
      // centering finishes: with Newton decrement lam < 1,
      //   weight (t - t*) <= nu + lam (lam + sqrt(nu)) / (1 - lam).
      // Ill-conditioned centerings can crawl for thousands of steps, so the
      // infeasibility test is applied here as well.
      const double lam = std::sqrt(-slope);
      if (lam < 0.25) {
        const double slack = (nu + lam * (lam + std::sqrt(nu)) / (1.0 - lam)) / weight;
        if (z(0) - slack >= -required_depth) {
          sol.lower_bound = z(0) - slack;
          return finish(SdpStatus::kInfeasible, "objective bound above the required margin");
        }
      }
      const double f0 = *objective(z);
      double alpha = 1.0;
      bool moved = false;
      while (alpha > 1e-14) {
        const VectorXd trial = z + alpha * step;
        const auto f = objective(trial);
        if (f && *f <= f0 + 0.25 * alpha * slope) {
          z = trial;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;  // numerical floor of the centering
    }

    const double t = z(0);
    const double gap = nu / weight;
    sol.lower_bound = t - gap;
    const auto res = problem.residuals(lay.q_of(z), lay.r_of(z));
    const bool feasible = *std::max_element(res.begin(), res.end()) < 0.0;
    const bool converged = gap <= std::max(opt.abs_gap, opt.rel_gap * std::abs(t));
    if (feasible && (converged || !opt.polish)) {
      return finish(SdpStatus::kFeasible, "centered and verified");
    }
    if (sol.lower_bound >= -required_depth) {
      return finish(SdpStatus::kInfeasible, "objective bound above the required margin");
    }
    if (converged) return finish(SdpStatus::kInfeasible, "optimum does not meet the margins");
    weight *= opt.mu;
  }
  return finish(SdpStatus::kStalled, "outer iteration cap reached");
}

}  // namespace lpvcar
