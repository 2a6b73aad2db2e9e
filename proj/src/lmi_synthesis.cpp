#include "lpvcar/lmi_synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include <unsupported/Eigen/KroneckerProduct>

#include "lpvcar/errors.hpp"

namespace lpvcar {

using Eigen::MatrixXd;

std::vector<LtiVertex> to_vertices(const std::vector<AugmentedSystem>& systems) {
  std::vector<LtiVertex> out;
  out.reserve(systems.size());
  for (const auto& s : systems) out.push_back({s.A, s.B});
  return out;
}

double LmiRegion::characteristic(std::complex<double> z) const {
  const Eigen::MatrixXcd f = L.cast<std::complex<double>>() + z * M.cast<std::complex<double>>() +
                             std::conj(z) * M.transpose().cast<std::complex<double>>();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(f, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

void LmiRegion::validate(std::uint64_t seed) const {
  if (L.rows() == 0 || L.rows() != L.cols() || M.rows() != L.rows() || M.cols() != L.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "region matrices must be square and equal-sized");
  }
  if ((L - L.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + L.cwiseAbs().maxCoeff())) {
    throw Error(ErrorCode::kInvalidArgument, "region matrix L is not symmetric");
  }
  const double scale = 1.0 + L.cwiseAbs().maxCoeff() / std::max(1e-12, M.cwiseAbs().maxCoeff());
  // Real-axis scan first (every region of interest here meets it), then random points.
  const int scan = 20001;
  for (int i = 0; i < scan; ++i) {
    const double x = -2.0 * scale + 4.0 * scale * i / (scan - 1);
    if (contains({x, 0.0})) return;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-2.0 * scale, 2.0 * scale);
  for (int i = 0; i < 4096; ++i) {
    const double re = dist(rng);
    const double im = dist(rng);
    if (contains({re, im})) return;
  }
  throw Error(ErrorCode::kInvalidArgument, "LMI region appears to be empty");
}

LmiRegion vertical_strip_region(double lambda_max, double lambda_min) {
  if (!(lambda_min < lambda_max && lambda_max < 0.0) || !std::isfinite(lambda_min)) {
    throw Error(ErrorCode::kInvalidStrip, "strip needs lambda_min < lambda_max < 0, got (" +
                                              std::to_string(lambda_min) + ", " +
                                              std::to_string(lambda_max) + ")");
  }
  LmiRegion r;
  r.L = MatrixXd::Zero(2, 2);
  r.M = MatrixXd::Zero(2, 2);
  r.L(0, 0) = -2.0 * lambda_max;  // 2 Re z - 2 lambda_max < 0
  r.M(0, 0) = 1.0;
  r.L(1, 1) = 2.0 * lambda_min;   // 2 lambda_min - 2 Re z < 0
  r.M(1, 1) = -1.0;
  return r;
}

LmiRegion half_plane_region(double beta) {
  LmiRegion r;
  r.L = MatrixXd::Constant(1, 1, 2.0 * beta);
  r.M = MatrixXd::Constant(1, 1, 1.0);
  return r;
}

namespace {

void check_vertices(const std::vector<LtiVertex>& vertices) {
  if (vertices.empty()) throw Error(ErrorCode::kInvalidArgument, "no vertices");
  const auto n = vertices.front().A.rows();
  const auto m = vertices.front().B.cols();
  for (const auto& v : vertices) {
    if (v.A.rows() != n || v.A.cols() != n || v.B.rows() != n || v.B.cols() != m) {
      throw Error(ErrorCode::kInvalidArgument, "vertex dimensions disagree");
    }
  }
}

double vertex_scale(const LtiVertex& v) {
  return 1.0 + Eigen::JacobiSVD<MatrixXd>(v.A).singularValues()(0);
}

AffineConstraint positivity_constraint(int n) {
  AffineConstraint c;
  c.label = "Q > eps I";
  c.size = n;
  c.scale = 1.0;
  c.margin = kRelativeMargin;
  c.map = [](const MatrixXd& Q, const MatrixXd&) -> MatrixXd { return -Q; };
  return c;
}

}  // namespace

SdpProblem contractivity_lmi(const std::vector<LtiVertex>& vertices, double beta) {
  if (!(beta > 0.0)) throw Error(ErrorCode::kInvalidArgument, "contractivity level must be > 0");
  check_vertices(vertices);
  SdpProblem p;
  p.n = static_cast<int>(vertices.front().A.rows());
  p.m = static_cast<int>(vertices.front().B.cols());
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    AffineConstraint c;
    c.label = "contractivity vertex " + std::to_string(i);
    c.size = p.n;
    c.scale = vertex_scale(vertices[i]);
    c.margin = kRelativeMargin * c.scale;
    const MatrixXd A = vertices[i].A;
    const MatrixXd B = vertices[i].B;
    c.map = [A, B, beta](const MatrixXd& Q, const MatrixXd& R) -> MatrixXd {
      const MatrixXd aq = A * Q + B * R;
      return aq + aq.transpose() + 2.0 * beta * Q;
    };
    p.constraints.push_back(std::move(c));
  }
  p.constraints.push_back(positivity_constraint(p.n));
  return p;
}

SdpProblem dstab_lmi(const std::vector<LtiVertex>& vertices, const LmiRegion& region) {
  check_vertices(vertices);
  region.validate();
  SdpProblem p;
  p.n = static_cast<int>(vertices.front().A.rows());
  p.m = static_cast<int>(vertices.front().B.cols());
  const auto s = static_cast<int>(region.L.rows());
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    AffineConstraint c;
    c.label = "region vertex " + std::to_string(i);
    c.size = s * p.n;
    c.scale = vertex_scale(vertices[i]);
    c.margin = kRelativeMargin * c.scale;
    const MatrixXd A = vertices[i].A;
    const MatrixXd B = vertices[i].B;
    const MatrixXd L = region.L;
    const MatrixXd M = region.M;
    c.map = [A, B, L, M](const MatrixXd& Q, const MatrixXd& R) -> MatrixXd {
      const MatrixXd aq = A * Q + B * R;
      MatrixXd f = Eigen::kroneckerProduct(L, Q);
      f += Eigen::kroneckerProduct(M, aq);
      f += Eigen::kroneckerProduct(M.transpose(), aq.transpose());
      return f;
    };
    p.constraints.push_back(std::move(c));
  }
  p.constraints.push_back(positivity_constraint(p.n));
  return p;
}

SynthesisResult solve_feasibility(const SdpProblem& problem, const SdpSolver& solver) {
  const SdpSolution sol = solver.solve(problem);
  SynthesisResult out;
  out.status = sol.status;
  out.Q = 0.5 * (sol.Q + sol.Q.transpose());
  out.R = sol.R;
  out.worst_residual = sol.worst_residual;
  out.depth = sol.depth;
  out.lower_bound = sol.lower_bound;
  out.newton_steps = sol.newton_steps;
  out.message = sol.message;
  const Eigen::LLT<MatrixXd> llt(out.Q);
  if (llt.info() == Eigen::Success) {
    out.K = llt.solve(out.R.transpose()).transpose();
  } else {
    out.K = MatrixXd::Constant(out.R.rows(), out.R.cols(), std::numeric_limits<double>::quiet_NaN());
    if (out.status == SdpStatus::kFeasible) out.status = SdpStatus::kInfeasible;
  }
  return out;
}

SynthesisResult solve_feasibility(const SdpProblem& problem, int threads) {
  SdpOptions opt;
  opt.threads = threads;
  return solve_feasibility(problem, BarrierSdpSolver(opt));
}

CertificationReport certify_gain(const MatrixXd& K, const std::vector<LtiVertex>& vertices,
                                 const LmiRegion& region, double min_depth, int threads) {
  CertificationReport rep;
  rep.vertices.resize(vertices.size());
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const MatrixXd acl = vertices[i].A + vertices[i].B * K;
      const Eigen::EigenSolver<MatrixXd> eig(acl, false);
      VertexCertificate& c = rep.vertices[i];
      c.index = i;
      c.spectral_abscissa = -std::numeric_limits<double>::infinity();
      c.min_real = std::numeric_limits<double>::infinity();
      c.depth = std::numeric_limits<double>::infinity();
      const bool ok = eig.info() == Eigen::Success;
      for (Eigen::Index k = 0; ok && k < eig.eigenvalues().size(); ++k) {
        const std::complex<double> z = eig.eigenvalues()(k);
        c.spectral_abscissa = std::max(c.spectral_abscissa, z.real());
        c.min_real = std::min(c.min_real, z.real());
        c.depth = std::min(c.depth, region.depth(z));
      }
      if (!ok) c.depth = -std::numeric_limits<double>::infinity();
      c.inside = c.depth > min_depth;
    }
  };
  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), 1, std::max<std::size_t>(1, vertices.size()));
  if (workers == 1) {
    work(0, vertices.size());
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back(work, vertices.size() * w / workers, vertices.size() * (w + 1) / workers);
    }
    for (auto& th : pool) th.join();
  }
  rep.worst_depth = std::numeric_limits<double>::infinity();
  rep.worst_abscissa = -std::numeric_limits<double>::infinity();
  for (const auto& c : rep.vertices) {
    rep.worst_depth = std::min(rep.worst_depth, c.depth);
    rep.worst_abscissa = std::max(rep.worst_abscissa, c.spectral_abscissa);
    if (!c.inside) rep.offending.push_back(c.index);
  }
  rep.pass = !vertices.empty() && rep.offending.empty();
  return rep;
}

}  // namespace lpvcar
