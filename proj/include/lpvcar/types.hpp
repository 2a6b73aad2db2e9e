#pragma once

#include <Eigen/Dense>

namespace lpvcar {

using Vec3 = Eigen::Matrix<double, 3, 1>;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec8 = Eigen::Matrix<double, 8, 1>;

// Number of dynamic states (v, u, r, omega_wf, omega_wr), inputs and
// saturation channels (N_f, N_r, F_xf, F_xr, F_yf, F_yr).
inline constexpr int kDynStates = 5;
inline constexpr int kInputs = 3;
inline constexpr int kChannels = 6;
// Dynamic states plus the tracking errors (x_L, y_L, dpsi).
inline constexpr int kErrorStates = 8;

enum class TireModel {
  kDugoff,  // load- and combined-slip-dependent stiffness
  kLinear,  // constant c_kappa / c_alpha
};

enum class SaturationMode {
  kLogistic,
  kIdentity,  // sigma(h) = h, used for the smoothed model
};

enum class LogisticForm {
  kCentered,   // centre (upper + lower) / 2
  kAsPrinted,  // centre (upper - lower) / 2, kept for comparison only
};

struct TireParams {
  double c_kappa = 80000.0;  // N per unit slip
  double c_alpha = 60000.0;  // N/rad
  double mu = 1.0;
  double r_e = 0.30;  // m

  void validate() const;
};

struct VehicleParams {
  double m = 1600.0;      // kg
  double i_zz = 2500.0;   // kg m^2
  double i_wy = 1.2;      // kg m^2
  double ell_f = 1.2;     // m
  double ell_r = 1.4;     // m
  double h = 0.55;        // m
  TireParams tire;
  double rho_cda = 0.40;  // kg/m, lumped 0.5*rho*Cd*A
  double f_r = 0.012;
  double g = 9.81;        // m/s^2

  // Model variant switches.
  TireModel tire_model = TireModel::kDugoff;
  SaturationMode saturation = SaturationMode::kLogistic;
  LogisticForm logistic_form = LogisticForm::kCentered;
  double v_min = 0.5;  // m/s, guard for the slip formulas

  double weight() const { return m * g; }
  void validate() const;
};

// State ordering used throughout.
struct VehicleState {
  double v = 0.0;         // longitudinal speed, m/s
  double u = 0.0;         // lateral speed, m/s
  double r = 0.0;         // yaw rate, rad/s
  double omega_wf = 0.0;  // rad/s
  double omega_wr = 0.0;  // rad/s
  double x = 0.0;         // m
  double y = 0.0;         // m
  double psi = 0.0;       // rad

  Vec8 to_vector() const;
  static VehicleState from_vector(const Vec8& s);
  Vec5 dynamic() const { return to_vector().head<kDynStates>(); }
  void set_dynamic(const Vec5& d);
};

struct VehicleInput {
  double delta_f = 0.0;  // rad
  double tau_wf = 0.0;   // N m
  double tau_wr = 0.0;   // N m

  Vec3 to_vector() const { return {delta_f, tau_wf, tau_wr}; }
  static VehicleInput from_vector(const Vec3& u) { return {u(0), u(1), u(2)}; }
};

}  // namespace lpvcar
