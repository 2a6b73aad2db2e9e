#include "lpvcar/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "lpvcar/errors.hpp"

namespace lpvcar {

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

constexpr const char* kChannelNames[kChannels] = {"N_f", "N_r", "F_xf", "F_xr", "F_yf", "F_yr"};

void append_matrix(std::ostringstream& out, const std::string& name, const Eigen::MatrixXd& m) {
  out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << num(m(i, j));
    out << '\n';
  }
}

[[noreturn]] void bad_gain(const std::string& what) {
  throw Error(ErrorCode::kIo, "gain file: " + what);
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

std::string reference_csv(const ReferenceTrajectory& ref) {
  std::ostringstream out;
  out << "t,v,u,r,omega_wf,omega_wr,x,y,psi,delta_f,tau_wf,tau_wr";
  for (const char* c : kChannelNames) out << ",sigma_" << c;
  out << ",loop_iterations,loop_residual\n";
  for (std::size_t k = 0; k < ref.size(); ++k) {
    out << num(ref.t[k]);
    const Vec8 s = ref.x[k].to_vector();
    for (int i = 0; i < 8; ++i) out << ',' << num(s(i));
    const Vec3 u = ref.u[k].to_vector();
    for (int i = 0; i < 3; ++i) out << ',' << num(u(i));
    for (int i = 0; i < kChannels; ++i) out << ',' << num(ref.sigma[k](i));
    out << ',' << ref.loop_iterations[k] << ',' << num(ref.loop_residual[k]) << '\n';
  }
  return out.str();
}

std::string trace_csv(const SimTrace& trace) {
  std::ostringstream out;
  out << "t,v,u,r,omega_wf,omega_wr,x,y,psi,delta_f,tau_wf,tau_wr,x_L,y_L,dpsi,dv,du,dr\n";
  for (std::size_t k = 0; k < trace.t.size(); ++k) {
    out << num(trace.t[k]);
    const Vec8 s = trace.x[k].to_vector();
    for (int i = 0; i < 8; ++i) out << ',' << num(s(i));
    const Vec3 u = trace.u[k].to_vector();
    for (int i = 0; i < 3; ++i) out << ',' << num(u(i));
    const ErrorVector& e = trace.error[k];
    // error vector is (dv, du, dr, domega_wf, domega_wr, x_L, y_L, dpsi)
    for (int i : {5, 6, 7, 0, 1, 2}) out << ',' << num(e(i));
    out << '\n';
  }
  return out.str();
}

std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out << "dv0,du0,converged,terminal_error\n";
  for (const auto& p : sweep.points) {
    out << num(p.dv0) << ',' << num(p.du0) << ',' << (p.converged ? 1 : 0) << ','
        << num(p.terminal_error) << '\n';
  }
  return out.str();
}

std::string sector_slopes_csv(const ReferenceTrajectory& ref, const std::vector<Vec6>& slopes) {
  std::ostringstream out;
  out << "channel,t,slope\n";
  for (int c = 0; c < kChannels; ++c) {
    for (std::size_t k = 0; k < slopes.size() && k < ref.size(); ++k) {
      out << kChannelNames[c] << ',' << num(ref.t[k]) << ',' << num(slopes[k](c)) << '\n';
    }
  }
  return out.str();
}

std::string polytope_json(const PolytopicModel& model) {
  using nlohmann::ordered_json;
  auto matrix = [](const auto& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      ordered_json row = ordered_json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(row);
    }
    return rows;
  };
  ordered_json root;
  root["state_dimension"] = kErrorStates;
  root["input_dimension"] = kInputs;
  root["vertex_count"] = model.vertex_count();
  root["vertex_rule"] =
      "vertex i equals the base with parameter j at its upper bound if bit j of i is set, "
      "else at its lower bound";
  ordered_json params = ordered_json::array();
  for (const auto& d : model.parameters()) {
    params.push_back({{"label", d.label},
                      {"matrix", d.matrix == ParameterDescriptor::Matrix::kA ? "A" : "B"},
                      {"row", d.row},
                      {"col", d.col},
                      {"lower", d.lower},
                      {"upper", d.upper},
                      {"mean", d.mean}});
  }
  root["parameters"] = params;
  root["base"] = {{"A", matrix(model.base().A)}, {"B", matrix(model.base().B)}};
  return root.dump(2) + "\n";
}

std::string gain_text(const GainFile& g) {
  std::ostringstream out;
  out << "lpvcar-gain 1\n";
  out << "mode " << to_string(g.mode) << '\n';
  if (g.mode == SynthesisMode::kContractivity) {
    out << "beta " << num(g.beta) << '\n';
  } else {
    out << "strip_max " << num(g.strip_max) << '\n';
    out << "strip_min " << num(g.strip_min) << '\n';
  }
  out << "status " << g.status << '\n';
  out << "worst_residual " << num(g.worst_residual) << '\n';
  out << "depth " << num(g.depth) << '\n';
  out << "newton_steps " << g.newton_steps << '\n';
  append_matrix(out, "K", g.K);
  append_matrix(out, "Q", g.Q);
  append_matrix(out, "R", g.R);
  if (g.certification) {
    const auto& c = *g.certification;
    out << "certification " << (c.pass ? "pass" : "fail") << '\n';
    out << "certified_vertices " << c.vertices.size() << '\n';
    out << "worst_depth " << num(c.worst_depth) << '\n';
    out << "worst_abscissa " << num(c.worst_abscissa) << '\n';
    out << "offending";
    for (std::size_t i : c.offending) out << ' ' << i;
    out << '\n';
  } else {
    out << "certification skipped\n";
  }
  return out.str();
}

GainFile parse_gain_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "lpvcar-gain 1") bad_gain("missing header");
  GainFile g;
  bool have_k = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "mode") {
      std::string m;
      ls >> m;
      try {
        g.mode = parse_synthesis_mode(m);
      } catch (const Error&) {
        bad_gain("unknown mode '" + m + "'");
      }
    } else if (key == "beta") {
      ls >> g.beta;
    } else if (key == "strip_max") {
      ls >> g.strip_max;
    } else if (key == "strip_min") {
      ls >> g.strip_min;
    } else if (key == "status") {
      ls >> g.status;
    } else if (key == "worst_residual") {
      ls >> g.worst_residual;
    } else if (key == "depth") {
      ls >> g.depth;
    } else if (key == "newton_steps") {
      ls >> g.newton_steps;
    } else if (key == "matrix") {
      std::string name;
      long rows = -1, cols = -1;
      ls >> name >> rows >> cols;
      if (!ls || rows < 0 || cols < 0 || rows > 1000 || cols > 1000) bad_gain("bad matrix header");
      Eigen::MatrixXd m(rows, cols);
      for (long i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) bad_gain("truncated matrix " + name);
        std::istringstream rs(line);
        for (long j = 0; j < cols; ++j) {
          std::string tok;
          if (!(rs >> tok)) bad_gain("short row in matrix " + name);
          try {
            m(i, j) = std::stod(tok);
          } catch (const std::exception&) {
            bad_gain("bad number '" + tok + "' in matrix " + name);
          }
        }
      }
      if (name == "K") {
        g.K = m;
        have_k = true;
      } else if (name == "Q") {
        g.Q = m;
      } else if (name == "R") {
        g.R = m;
      }
    }
    // Certification lines are informational; they are regenerated, never read back.
    if (ls.fail() && key != "matrix") bad_gain("bad value on line '" + line + "'");
  }
  if (!have_k) bad_gain("no gain matrix K");
  return g;
}

GainFile load_gain(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open gain file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  GainFile g = parse_gain_text(buf.str());
  if (g.K.rows() != kInputs || g.K.cols() != kErrorStates) {
    bad_gain("K must be " + std::to_string(kInputs) + " x " + std::to_string(kErrorStates));
  }
  if (!g.K.allFinite()) bad_gain("K has non-finite entries");
  return g;
}

}  // namespace lpvcar
