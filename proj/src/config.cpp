#include "lpvcar/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "lpvcar/errors.hpp"

namespace lpvcar {

using nlohmann::json;

std::string_view to_string(SynthesisMode mode) {
  return mode == SynthesisMode::kContractivity ? "contractivity" : "dstab";
}

SynthesisMode parse_synthesis_mode(std::string_view text) {
  if (text == "contractivity") return SynthesisMode::kContractivity;
  if (text == "dstab") return SynthesisMode::kDstab;
  throw Error(ErrorCode::kConfig, "unknown synthesis mode '" + std::string(text) + "'");
}

RunConfig::RunConfig() { maneuver.target_lateral = 6.0; }

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::kConfig, what);
  };
  try {
    vehicle.validate();
    maneuver.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  require(maneuver.target_band > 0.0 && maneuver.target_band < 1.0, "target band must be in (0, 1)");
  require(!maneuver.target_lateral || *maneuver.target_lateral >= 0.0,
          "target lateral displacement must be non-negative");
  require(linearization.fd_relative_step > 0.0 && linearization.fd_relative_step < 1e-2,
          "finite-difference step must be in (0, 1e-2)");
  require(linearization.slope_tolerance >= 0.0, "slope tolerance must be non-negative");
  require(linearization.parameter_count >= 0 && linearization.parameter_count <= 10,
          "parameter count must be in [0, 10]");
  require(synthesis.beta > 0.0, "beta must be positive");
  require(synthesis.strip_min < synthesis.strip_max && synthesis.strip_max < 0.0,
          "strip needs strip_min < strip_max < 0");
  const SimOptions& so = simulation.options;
  require(so.steer_limit > 0.0 && so.torque_limit > 0.0, "actuator limits must be positive");
  require(so.converge_position > 0.0 && so.converge_velocity > 0.0,
          "convergence thresholds must be positive");
  require(sweep.step > 0.0 && sweep.dv_min <= sweep.dv_max && sweep.du_min <= sweep.du_max,
          "sweep grid needs min <= max and a positive step");
  require(!output_dir.empty(), "output directory must be set");
}

namespace {

// Reads keys of one block and rejects the ones nobody asked for.
class Block {
 public:
  Block(const json& root, const std::string& name) : name_(name) {
    if (!root.contains(name)) throw Error(ErrorCode::kConfig, "missing block '" + name + "'");
    obj_ = &root.at(name);
    if (!obj_->is_object()) throw Error(ErrorCode::kConfig, "block '" + name + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!obj_->contains(key)) return;
    try {
      out = obj_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfig, name_ + "." + key + ": " + e.what());
    }
  }

  bool has(const std::string& key) const { return obj_->contains(key) && !obj_->at(key).is_null(); }
  const json& raw(const std::string& key) {
    used_.insert(key);
    return obj_->at(key);
  }

  void finish() const {
    for (const auto& item : obj_->items()) {
      if (!used_.count(item.key())) {
        throw Error(ErrorCode::kConfig, "unknown key '" + name_ + "." + item.key() + "'");
      }
    }
  }

 private:
  std::string name_;
  const json* obj_ = nullptr;
  std::set<std::string> used_;
};

std::string tire_model_name(TireModel m) { return m == TireModel::kDugoff ? "dugoff" : "linear"; }
std::string saturation_name(SaturationMode m) {
  return m == SaturationMode::kLogistic ? "logistic" : "identity";
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw Error(ErrorCode::kConfig, "config must be a JSON object");

  RunConfig cfg;
  for (const auto& item : root.items()) {
    static const std::set<std::string> known = {"vehicle", "maneuver", "linearization", "synthesis",
                                                "simulation", "sweep", "output_dir"};
    if (!known.count(item.key())) throw Error(ErrorCode::kConfig, "unknown block '" + item.key() + "'");
  }

  {
    Block b(root, "vehicle");
    VehicleParams& v = cfg.vehicle;
    b.get("mass_kg", v.m);
    b.get("yaw_inertia_kg_m2", v.i_zz);
    b.get("wheel_inertia_kg_m2", v.i_wy);
    b.get("cg_to_front_axle_m", v.ell_f);
    b.get("cg_to_rear_axle_m", v.ell_r);
    b.get("cg_height_m", v.h);
    b.get("wheel_radius_m", v.tire.r_e);
    b.get("longitudinal_stiffness_n", v.tire.c_kappa);
    b.get("cornering_stiffness_n_per_rad", v.tire.c_alpha);
    b.get("friction_coefficient", v.tire.mu);
    b.get("drag_coefficient_kg_per_m", v.rho_cda);
    b.get("rolling_resistance", v.f_r);
    b.get("gravity_m_per_s2", v.g);
    b.get("min_speed_m_per_s", v.v_min);
    std::string tire = tire_model_name(v.tire_model);
    b.get("tire_model", tire);
    if (tire == "dugoff") {
      v.tire_model = TireModel::kDugoff;
    } else if (tire == "linear") {
      v.tire_model = TireModel::kLinear;
    } else {
      throw Error(ErrorCode::kConfig, "vehicle.tire_model must be 'dugoff' or 'linear'");
    }
    std::string sat = saturation_name(v.saturation);
    b.get("saturation", sat);
    if (sat == "logistic") {
      v.saturation = SaturationMode::kLogistic;
    } else if (sat == "identity") {
      v.saturation = SaturationMode::kIdentity;
    } else {
      throw Error(ErrorCode::kConfig, "vehicle.saturation must be 'logistic' or 'identity'");
    }
    b.finish();
  }
  {
    Block b(root, "maneuver");
    ManeuverSpec& m = cfg.maneuver;
    double speed_kmh = m.initial_speed * 3.6;
    b.get("initial_speed_km_per_h", speed_kmh);
    m.initial_speed = speed_kmh / 3.6;
    std::string kind = m.steering.kind == SteeringProfile::Kind::kSine ? "sine" : "none";
    b.get("steering", kind);
    if (kind == "sine") {
      m.steering.kind = SteeringProfile::Kind::kSine;
    } else if (kind == "none") {
      m.steering.kind = SteeringProfile::Kind::kNone;
    } else {
      throw Error(ErrorCode::kConfig, "maneuver.steering must be 'sine' or 'none'");
    }
    b.get("steering_period_s", m.steering.period);
    b.get("steering_start_s", m.steering.start);
    b.get("steering_amplitude_rad", m.steering.amplitude);
    if (b.has("target_lateral_m")) {
      double target = 0.0;
      b.get("target_lateral_m", target);
      m.target_lateral = target;
    } else if (root.at("maneuver").contains("target_lateral_m")) {
      b.raw("target_lateral_m");  // explicit null: keep the amplitude as given
      m.target_lateral.reset();
    }
    b.get("target_band", m.target_band);
    b.get("front_torque_n_m", m.tau_wf);
    b.get("rear_torque_n_m", m.tau_wr);
    b.get("duration_s", m.duration);
    b.get("time_step_s", m.dt);
    b.finish();
  }
  {
    Block b(root, "linearization");
    b.get("fd_relative_step", cfg.linearization.fd_relative_step);
    b.get("slope_tolerance", cfg.linearization.slope_tolerance);
    b.get("parameter_count", cfg.linearization.parameter_count);
    b.finish();
  }
  {
    Block b(root, "synthesis");
    std::string mode(to_string(cfg.synthesis.mode));
    b.get("mode", mode);
    cfg.synthesis.mode = parse_synthesis_mode(mode);
    b.get("beta_per_s", cfg.synthesis.beta);
    b.get("strip_max_per_s", cfg.synthesis.strip_max);
    b.get("strip_min_per_s", cfg.synthesis.strip_min);
    b.get("polish", cfg.synthesis.polish);
    b.finish();
  }
  {
    Block b(root, "simulation");
    SimOptions& o = cfg.simulation.options;
    b.get("steer_limit_rad", o.steer_limit);
    b.get("torque_limit_n_m", o.torque_limit);
    b.get("blowup_velocity_m_per_s", o.blowup_velocity);
    b.get("blowup_position_m", o.blowup_position);
    b.get("blowup_angle_rad", o.blowup_angle);
    b.get("blowup_rate_rad_per_s", o.blowup_rate);
    b.get("converge_position_m", o.converge_position);
    b.get("converge_velocity_m_per_s", o.converge_velocity);
    b.get("offsets_m_per_s", cfg.simulation.offsets);
    b.finish();
  }
  {
    Block b(root, "sweep");
    b.get("dv_min_m_per_s", cfg.sweep.dv_min);
    b.get("dv_max_m_per_s", cfg.sweep.dv_max);
    b.get("du_min_m_per_s", cfg.sweep.du_min);
    b.get("du_max_m_per_s", cfg.sweep.du_max);
    b.get("step_m_per_s", cfg.sweep.step);
    b.finish();
  }
  if (root.contains("output_dir")) {
    try {
      cfg.output_dir = root.at("output_dir").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfig, std::string("output_dir: ") + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
  json root;
  const VehicleParams& v = cfg.vehicle;
  root["vehicle"] = {
      {"mass_kg", v.m},
      {"yaw_inertia_kg_m2", v.i_zz},
      {"wheel_inertia_kg_m2", v.i_wy},
      {"cg_to_front_axle_m", v.ell_f},
      {"cg_to_rear_axle_m", v.ell_r},
      {"cg_height_m", v.h},
      {"wheel_radius_m", v.tire.r_e},
      {"longitudinal_stiffness_n", v.tire.c_kappa},
      {"cornering_stiffness_n_per_rad", v.tire.c_alpha},
      {"friction_coefficient", v.tire.mu},
      {"drag_coefficient_kg_per_m", v.rho_cda},
      {"rolling_resistance", v.f_r},
      {"gravity_m_per_s2", v.g},
      {"min_speed_m_per_s", v.v_min},
      {"tire_model", tire_model_name(v.tire_model)},
      {"saturation", saturation_name(v.saturation)},
  };
  const ManeuverSpec& m = cfg.maneuver;
  root["maneuver"] = {
      {"initial_speed_km_per_h", m.initial_speed * 3.6},
      {"steering", m.steering.kind == SteeringProfile::Kind::kSine ? "sine" : "none"},
      {"steering_period_s", m.steering.period},
      {"steering_start_s", m.steering.start},
      {"steering_amplitude_rad", m.steering.amplitude},
      {"target_band", m.target_band},
      {"front_torque_n_m", m.tau_wf},
      {"rear_torque_n_m", m.tau_wr},
      {"duration_s", m.duration},
      {"time_step_s", m.dt},
  };
  root["maneuver"]["target_lateral_m"] =
      m.target_lateral ? json(*m.target_lateral) : json(nullptr);
  root["linearization"] = {
      {"fd_relative_step", cfg.linearization.fd_relative_step},
      {"slope_tolerance", cfg.linearization.slope_tolerance},
      {"parameter_count", cfg.linearization.parameter_count},
  };
  root["synthesis"] = {
      {"mode", std::string(to_string(cfg.synthesis.mode))},
      {"beta_per_s", cfg.synthesis.beta},
      {"strip_max_per_s", cfg.synthesis.strip_max},
      {"strip_min_per_s", cfg.synthesis.strip_min},
      {"polish", cfg.synthesis.polish},
  };
  const SimOptions& o = cfg.simulation.options;
  root["simulation"] = {
      {"steer_limit_rad", o.steer_limit},
      {"torque_limit_n_m", o.torque_limit},
      {"blowup_velocity_m_per_s", o.blowup_velocity},
      {"blowup_position_m", o.blowup_position},
      {"blowup_angle_rad", o.blowup_angle},
      {"blowup_rate_rad_per_s", o.blowup_rate},
      {"converge_position_m", o.converge_position},
      {"converge_velocity_m_per_s", o.converge_velocity},
      {"offsets_m_per_s", cfg.simulation.offsets},
  };
  root["sweep"] = {
      {"dv_min_m_per_s", cfg.sweep.dv_min},
      {"dv_max_m_per_s", cfg.sweep.dv_max},
      {"du_min_m_per_s", cfg.sweep.du_min},
      {"du_max_m_per_s", cfg.sweep.du_max},
      {"step_m_per_s", cfg.sweep.step},
  };
  root["output_dir"] = cfg.output_dir;
  return root.dump(2) + "\n";
}

}  // namespace lpvcar
