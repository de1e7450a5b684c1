#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "clasp/error.hpp"
#include "clasp/geometry.hpp"

namespace clasp {

/// Virtual-target offsets shorter than this reconstruct as isotropic k_max.
inline constexpr double kStiffnessDegenerateOffset = 1e-4;  // m

// ---------------------------------------------------------------------------
// Parameter and state types
// ---------------------------------------------------------------------------

/// Scalar compliance encoding: one stiffness value plus a reference /
/// virtual-target pose pair. The offset direction carries stiffness k, the
/// orthogonal complement carries k_max.
struct StiffnessSpec {
  double k = 3000.0;      // N/m along the offset direction
  double k_max = 3000.0;  // N/m ceiling (orthogonal directions)
  Pose reference_pose;
  Pose virtual_target_pose;

  void validate() const {
    if (!(k > 0.0) || !(k <= k_max))
      throw ConfigError("stiffness spec requires 0 < k <= k_max");
    if (reference_pose.from_frame() != virtual_target_pose.from_frame() ||
        reference_pose.to_frame() != virtual_target_pose.to_frame())
      throw FrameError("stiffness spec poses must share frames");
  }
};

struct AdmittanceParams {
  Vec3 mass = Vec3(2.0, 2.0, 2.0);  // virtual inertia per axis, kg
  double damping_ratio = 1.0;
  double rate = 500.0;              // Hz
  double k_max = 3000.0;            // N/m
  double v_max = 0.5;               // m/s commanded-velocity ceiling

  void validate() const {
    if (!(mass.minCoeff() > 0.0)) throw ConfigError("admittance mass must be > 0");
    if (!(damping_ratio > 0.0)) throw ConfigError("damping ratio must be > 0");
    if (!(rate > 0.0)) throw ConfigError("admittance rate must be > 0");
    if (!(v_max > 0.0)) throw ConfigError("v_max must be > 0");
  }
};

struct AdmittanceState {
  Vec3 commanded_position = Vec3::Zero();   // base frame, m
  Vec3 commanded_velocity = Vec3::Zero();   // base frame, m/s
  Rotation commanded_rotation;

  bool finite() const {
    return commanded_position.allFinite() && commanded_velocity.allFinite();
  }
};

struct GraspControllerParams {
  double k_p = 0.0;       // 1/s
  double k_f = 0.002;     // m/(s*N)
  std::array<double, 2> width_limits{0.0, 0.11};  // m
  double v_max = 0.05;    // m/s
  double rate = 30.0;     // Hz

  void validate() const {
    if (k_p < 0.0 || k_f < 0.0) throw ConfigError("grasp gains must be >= 0");
    if (!(width_limits[0] < width_limits[1]))
      throw ConfigError("grasp width limits must satisfy min < max");
    if (!(v_max > 0.0)) throw ConfigError("grasp v_max must be > 0");
    if (!(rate > 0.0)) throw ConfigError("grasp rate must be > 0");
  }
};

struct GraspState {
  double width = 0.05;          // x_G, m
  double measured_force = 0.0;  // f_G, N
  double target_width = 0.05;   // x_G*, m
  double target_force = 0.0;    // f_G*, N
};

struct SafetyLimits {
  double grasp_axis_limit = 25.0;  // N, sensor z
  double other_axes_limit = 20.0;  // N, sensor x/y

  void validate() const {
    if (!(grasp_axis_limit > 0.0) || !(other_axes_limit > 0.0))
      throw ConfigError("safety limits must be > 0");
  }
};

// ---------------------------------------------------------------------------
// Wrench fusion (per-finger sensors -> TCP)
// ---------------------------------------------------------------------------

/// Transforms both finger wrenches to the tool frame (TCP, centered between
/// the fingertips) and sums them. Internal grasp forces cancel; external
/// contact on either finger or both survives.
inline Wrench combine_finger_wrenches(const Wrench& w1, const Wrench& w2,
                                      const Pose& s1_in_tcp,
                                      const Pose& s2_in_tcp) {
  if (s1_in_tcp.to_frame() != s2_in_tcp.to_frame())
    throw FrameError("combine_finger_wrenches: sensor poses target different frames");
  const Wrench a = transform_wrench(w1, s1_in_tcp);
  const Wrench b = transform_wrench(w2, s2_in_tcp);
  return Wrench(a.force + b.force, a.torque + b.torque, a.frame);
}

/// Grasp force: average compression along sensor +z (pad into object).
inline double measure_grasp_force(const Wrench& w1, const Wrench& w2) {
  if (!w1.finite() || !w2.finite())
    throw ControllerFault("measure_grasp_force: non-finite wrench");
  return 0.5 * (w1.force.z() + w2.force.z());
}

// ---------------------------------------------------------------------------
// Stiffness reconstruction
// ---------------------------------------------------------------------------

/// Expands the scalar encoding into a full 3x3 stiffness matrix:
///   K = k_max I + (k - k_max) d d^T
/// with d the normalized virtual-target offset. Spectrum {k, k_max, k_max}.
/// A degenerate offset (< kStiffnessDegenerateOffset) yields exactly k_max I.
inline Mat3 reconstruct_stiffness(const StiffnessSpec& spec) {
  spec.validate();
  const Vec3 offset = spec.virtual_target_pose.translation() -
                      spec.reference_pose.translation();
  const double n = offset.norm();
  if (n < kStiffnessDegenerateOffset) return spec.k_max * Mat3::Identity();
  const Vec3 d = offset / n;
  return spec.k_max * Mat3::Identity() +
         (spec.k - spec.k_max) * (d * d.transpose());
}

// ---------------------------------------------------------------------------
// Wrist admittance
// ---------------------------------------------------------------------------

enum class IntegratorKind {
  exact_zoh,             // per-mode closed-form update, exact for constant input
  semi_implicit_euler,   // classic symplectic Euler
};

namespace detail {

/// Modal form of M xdd + D xd + K (x - x_vt) = f with diagonal M and modal
/// damping D = 2 zeta sqrt(K_mode M): eigenbasis of M^-1/2 K M^-1/2.
struct ModalSystem {
  Mat3 sqrt_m;      // diag
  Mat3 inv_sqrt_m;  // diag
  Mat3 q;           // eigenvectors
  Vec3 lambda;      // eigenvalues (omega^2 per mode), all > 0 for K SPD
};

inline ModalSystem modal_system(const Mat3& stiffness, const Vec3& mass) {
  ModalSystem m;
  m.sqrt_m = mass.cwiseSqrt().asDiagonal();
  m.inv_sqrt_m = mass.cwiseSqrt().cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Mat3> es(m.inv_sqrt_m * stiffness *
                                         m.inv_sqrt_m);
  m.q = es.eigenvectors();
  m.lambda = es.eigenvalues();
  return m;
}

/// Exact ZOH update of ydd + 2 zeta w yd + w^2 y = u over dt.
inline void mode_step_exact(double& y, double& yd, double u, double w,
                            double zeta, double dt) {
  const double yp = u / (w * w);
  double z = y - yp;
  double zd = yd;
  if (std::abs(zeta - 1.0) < 1e-9) {
    const double e = std::exp(-w * dt);
    const double c0 = z, c1 = zd + w * z;
    z = e * (c0 + c1 * dt);
    zd = e * (zd - c1 * w * dt);
  } else if (zeta < 1.0) {
    const double wd = w * std::sqrt(1.0 - zeta * zeta);
    const double e = std::exp(-zeta * w * dt);
    const double c = std::cos(wd * dt), s = std::sin(wd * dt);
    const double z0 = z, zd0 = zd;
    z = e * (z0 * c + ((zd0 + zeta * w * z0) / wd) * s);
    zd = e * (zd0 * c - ((w * w * z0 + zeta * w * zd0) / wd) * s);
  } else {
    const double wd = w * std::sqrt(zeta * zeta - 1.0);
    const double e = std::exp(-zeta * w * dt);
    const double c = std::cosh(wd * dt), s = std::sinh(wd * dt);
    const double z0 = z, zd0 = zd;
    z = e * (z0 * c + ((zd0 + zeta * w * z0) / wd) * s);
    zd = e * (zd0 * c - ((w * w * z0 + zeta * w * zd0) / wd) * s);
  }
  y = z + yp;
  yd = zd;
}

}  // namespace detail

/// One wrist control step: renders M xdd + D xd + K (x - x_vt) = f_ext on the
/// translational axes, with K = reconstruct_stiffness(spec) and per-mode
/// damping D = 2 zeta sqrt(K_mode M). Rotation tracks the virtual target
/// directly (translational-only compliance). The external wrench must be
/// expressed in the reference pose's from_frame (the TCP); its force is
/// rotated into the base frame with the current commanded rotation.
///
/// dt must equal 1/params.rate. A non-finite wrench raises ControllerFault;
/// callers freeze motion on fault.
inline AdmittanceState admittance_step(
    const AdmittanceState& state, const StiffnessSpec& spec,
    const AdmittanceParams& params, const Wrench& w_ext, double dt,
    IntegratorKind kind = IntegratorKind::exact_zoh) {
  params.validate();
  spec.validate();
  if (std::abs(dt * params.rate - 1.0) > 1e-9)
    throw ConfigError("admittance_step: dt must equal 1/params.rate");
  if (!w_ext.finite())
    throw ControllerFault("admittance_step: non-finite external wrench");
  if (w_ext.frame != spec.reference_pose.from_frame())
    throw FrameError("admittance_step: wrench in '" + w_ext.frame +
                     "', expected '" + spec.reference_pose.from_frame() + "'");

  const Mat3 stiffness = reconstruct_stiffness(spec);
  const Vec3 x_vt = spec.virtual_target_pose.translation();
  const Vec3 f_base = state.commanded_rotation.matrix() * w_ext.force;

  AdmittanceState next = state;
  const double zeta = params.damping_ratio;

  if (kind == IntegratorKind::exact_zoh) {
    const detail::ModalSystem ms = detail::modal_system(stiffness, params.mass);
    Vec3 y = ms.q.transpose() * (ms.sqrt_m * (state.commanded_position - x_vt));
    Vec3 yd = ms.q.transpose() * (ms.sqrt_m * state.commanded_velocity);
    const Vec3 u = ms.q.transpose() * (ms.inv_sqrt_m * f_base);
    for (int i = 0; i < 3; ++i)
      detail::mode_step_exact(y(i), yd(i), u(i), std::sqrt(ms.lambda(i)), zeta,
                              dt);
    next.commanded_position = ms.inv_sqrt_m * (ms.q * y) + x_vt;
    next.commanded_velocity = ms.inv_sqrt_m * (ms.q * yd);
  } else {
    const detail::ModalSystem ms = detail::modal_system(stiffness, params.mass);
    const Mat3 damping = ms.sqrt_m * ms.q *
                         (2.0 * zeta * ms.lambda.cwiseSqrt()).asDiagonal() *
                         ms.q.transpose() * ms.sqrt_m;
    const Vec3 accel =
        (f_base - damping * state.commanded_velocity -
         stiffness * (state.commanded_position - x_vt))
            .cwiseQuotient(params.mass);
    next.commanded_velocity = state.commanded_velocity + accel * dt;
    const double speed = next.commanded_velocity.norm();
    if (speed > params.v_max)
      next.commanded_velocity *= params.v_max / speed;
    next.commanded_position =
        state.commanded_position + next.commanded_velocity * dt;
    next.commanded_rotation = spec.virtual_target_pose.rotation();
    return next;
  }

  const double speed = next.commanded_velocity.norm();
  if (speed > params.v_max) {
    next.commanded_velocity *= params.v_max / speed;
    next.commanded_position =
        state.commanded_position + next.commanded_velocity * dt;
  }
  next.commanded_rotation = spec.virtual_target_pose.rotation();
  return next;
}

/// Stateful wrapper: advances one step per call at params.rate, latches a
/// fault on non-finite input and freezes the state until clear_fault().
/// Target updates are latest-value-wins snapshots.
class AdmittanceController {
 public:
  AdmittanceController(AdmittanceParams params, AdmittanceState initial,
                       IntegratorKind kind = IntegratorKind::exact_zoh)
      : params_(std::move(params)), state_(std::move(initial)), kind_(kind) {
    params_.validate();
  }

  void set_target(const StiffnessSpec& spec) {
    spec.validate();
    spec_ = spec;
  }

  const AdmittanceState& step(const Wrench& w_ext) {
    if (fault_) return state_;
    if (!spec_.has_value())
      throw ConfigError("AdmittanceController: no target set");
    if (!w_ext.finite()) {
      fault_ = true;
      return state_;
    }
    state_ = admittance_step(state_, *spec_, params_, w_ext,
                             1.0 / params_.rate, kind_);
    return state_;
  }

  const AdmittanceState& state() const { return state_; }
  const AdmittanceParams& params() const { return params_; }
  bool faulted() const { return fault_; }
  void clear_fault() { fault_ = false; }

 private:
  AdmittanceParams params_;
  AdmittanceState state_;
  IntegratorKind kind_;
  std::optional<StiffnessSpec> spec_;
  bool fault_ = false;
};

// ---------------------------------------------------------------------------
// Grasp force control
// ---------------------------------------------------------------------------

/// Velocity-resolved grasp law: v_G = K_p (x_G* - x_G) + K_f (f_G* - f_G),
/// clamped to +/- v_max. Positive v_G closes the gripper (compression rises).
inline double grasp_control_step(const GraspState& gs,
                                 const GraspControllerParams& params) {
  params.validate();
  const double v = params.k_p * (gs.target_width - gs.width) +
                   params.k_f * (gs.target_force - gs.measured_force);
  return std::clamp(v, -params.v_max, params.v_max);
}

class GraspController {
 public:
  GraspController(GraspControllerParams params, double initial_width)
      : params_(std::move(params)) {
    params_.validate();
    state_.width = initial_width;
    state_.target_width = initial_width;
  }

  void set_targets(double target_width, double target_force) {
    state_.target_width = target_width;
    state_.target_force = target_force;
  }

  /// Feeds the latest measurements and returns the commanded grasp velocity.
  double step(double measured_width, double measured_force) {
    if (!std::isfinite(measured_width) || !std::isfinite(measured_force))
      throw ControllerFault("GraspController: non-finite measurement");
    state_.width = measured_width;
    state_.measured_force = measured_force;
    return grasp_control_step(state_, params_);
  }

  const GraspState& state() const { return state_; }
  const GraspControllerParams& params() const { return params_; }

 private:
  GraspControllerParams params_;
  GraspState state_;
};

// ---------------------------------------------------------------------------
// Safety
// ---------------------------------------------------------------------------

struct SafetyViolation {
  int sensor = 1;   // 1 or 2
  int axis = 2;     // 0=x, 1=y, 2=z (grasp axis)
  double value = 0.0;
  double limit = 0.0;

  std::string describe() const {
    static constexpr const char* names[] = {"x (shear)", "y (shear)",
                                            "z (grasp axis)"};
    return "sensor " + std::to_string(sensor) + " axis " + names[axis] + ": |" +
           std::to_string(value) + "| N exceeds " + std::to_string(limit) +
           " N";
  }
};

using SafetyVerdict = std::optional<SafetyViolation>;  // nullopt == OK

/// Checks per-sensor force components against the thresholds. The grasp axis
/// is sensor z; all comparisons use absolute values.
inline SafetyVerdict check_safety(const Wrench& w1, const Wrench& w2,
                                  const SafetyLimits& limits) {
  limits.validate();
  const Wrench* sensors[2] = {&w1, &w2};
  for (int s = 0; s < 2; ++s) {
    const Vec3& f = sensors[s]->force;
    if (std::abs(f.z()) > limits.grasp_axis_limit)
      return SafetyViolation{s + 1, 2, f.z(), limits.grasp_axis_limit};
    for (int axis = 0; axis < 2; ++axis)
      if (std::abs(f(axis)) > limits.other_axes_limit)
        return SafetyViolation{s + 1, axis, f(axis), limits.other_axes_limit};
  }
  return std::nullopt;
}

/// Latching monitor: the first violation persists until reset() and callers
/// must freeze commanded motion increments while tripped.
class SafetyMonitor {
 public:
  explicit SafetyMonitor(SafetyLimits limits) : limits_(limits) {
    limits_.validate();
  }

  const SafetyVerdict& check(const Wrench& w1, const Wrench& w2) {
    if (!latched_) latched_ = check_safety(w1, w2, limits_);
    return latched_;
  }

  bool tripped() const { return latched_.has_value(); }
  const SafetyVerdict& violation() const { return latched_; }
  void reset() { latched_.reset(); }
  const SafetyLimits& limits() const { return limits_; }

 private:
  SafetyLimits limits_;
  SafetyVerdict latched_;
};

}  // namespace clasp
