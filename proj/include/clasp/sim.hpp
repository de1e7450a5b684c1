#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "clasp/compliance.hpp"
#include "clasp/error.hpp"
#include "clasp/geometry.hpp"
#include "clasp/log.hpp"
#include "clasp/policy.hpp"

namespace clasp {

// ---------------------------------------------------------------------------
// Contact models
// ---------------------------------------------------------------------------

/// Penalty plane: normal force k_env * penetration, Coulomb friction against
/// tangential motion (viscous taper below kFrictionVelEps to stay smooth).
struct CompliantPlane {
  Vec3 normal = Vec3(0, 0, 1);  // unit, base frame, pointing out of the surface
  Vec3 origin = Vec3::Zero();
  double k_env = 1e4;  // N/m
  double mu = 0.4;

  void validate() const {
    if (!(k_env > 0.0)) throw ConfigError("plane k_env must be > 0");
    if (mu < 0.0 || mu > 2.0) throw ConfigError("plane mu must be in [0, 2]");
    if (std::abs(normal.norm() - 1.0) > 1e-9)
      throw ConfigError("plane normal must be unit length");
  }
};

/// Spring-loaded receptacle along an axis: resists with preload + k * depth;
/// the engaged flag latches once the axial force first reaches engage_force.
struct SpringSocket {
  Vec3 axis = Vec3(0, 0, 1);  // unit, base frame, pointing out of the socket
  Vec3 origin = Vec3::Zero();
  double preload = 10.0;       // N
  double k_spring = 1000.0;    // N/m
  double engage_force = 15.0;  // N

  void validate() const {
    if (!(k_spring > 0.0)) throw ConfigError("socket spring must be > 0");
    if (!(engage_force > 0.0))
      throw ConfigError("socket engage force must be > 0");
    if (std::abs(axis.norm() - 1.0) > 1e-9)
      throw ConfigError("socket axis must be unit length");
  }
};

/// Axial puncture resistance (skewering): ramps with depth until the puncture
/// depth, then drops to a small sliding force.
struct AxialResistance {
  Vec3 axis = Vec3(0, 0, 1);  // unit, base frame, pointing back at the tool
  Vec3 origin = Vec3::Zero();
  double ramp = 800.0;          // N/m
  double puncture_depth = 0.01; // m
  double post_force = 1.0;      // N
};

/// Held object: stiff grasp spring per finger plus a Coulomb grasp-friction
/// budget. The object slips (and is dropped) when the tangential load
/// transmitted through the fingers exceeds mu_grasp * f_G.
struct GraspSlipModel {
  double object_width = 0.03;  // m, width at first finger contact
  double mass = 0.05;          // kg
  double mu_grasp = 1.0;
  double k_obj = 2e4;          // N/m per finger
  std::optional<AxialResistance> resistance;

  void validate() const {
    if (mu_grasp < 0.0 || mu_grasp > 2.0)
      throw ConfigError("mu_grasp must be in [0, 2]");
    if (!(k_obj > 0.0)) throw ConfigError("object stiffness must be > 0");
    if (mass < 0.0) throw ConfigError("object mass must be >= 0");
    if (!(object_width > 0.0)) throw ConfigError("object width must be > 0");
  }
};

using ContactModel = std::variant<CompliantPlane, SpringSocket, GraspSlipModel>;

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

struct Scenario {
  std::string name = "wipe";
  std::string policy = "wipe";  // wipe | skewer | insert
  double duration = 14.0;       // s
  uint64_t seed = 0;
  double sensor_noise_sd = 0.0; // N per axis, off by default
  SafetyLimits limits{25.0, 20.0};
  AdmittanceParams admittance{};
  GraspControllerParams grasp{};
  ActionLimits action{};
  std::vector<ContactModel> contacts;

  Vec3 initial_position = Vec3::Zero();  // TCP in base, rotation starts identity
  double initial_width = 0.05;           // m
  double tool_length = 0.02;             // tip offset along TCP -z, m

  // Script knobs (scripted-policy targets; see scripted_policy()).
  double contact_force_target = 8.0;  // N, wipe normal / insert press
  double grasp_force_target = 12.0;   // N
  double press_stiffness = 500.0;     // N/m along the pressing direction
  double approach_lead = 0.002;       // m per policy tick while approaching
  double wipe_speed = 0.05;           // m/s lateral
  double wipe_span = 0.06;            // m
  double wipe_start_time = 4.0;       // s
  double advance_lead = 0.005;        // m per policy tick while skewering
  double advance_depth = 0.02;        // m, skewer completion depth
  double rotation_angle = M_PI / 4;   // rad, insert twist
  double rotation_step = M_PI / 40;   // rad per policy tick

  static constexpr double kWristRate = 500.0;
  static constexpr double kGripperRate = 30.0;
  static constexpr double kPolicyRate = 10.0;

  const GraspSlipModel& object() const {
    for (const auto& c : contacts)
      if (const auto* o = std::get_if<GraspSlipModel>(&c)) return *o;
    throw ConfigError("scenario has no grasp_slip object model");
  }
  const CompliantPlane* plane() const {
    for (const auto& c : contacts)
      if (const auto* p = std::get_if<CompliantPlane>(&c)) return p;
    return nullptr;
  }
  const SpringSocket* socket() const {
    for (const auto& c : contacts)
      if (const auto* s = std::get_if<SpringSocket>(&c)) return s;
    return nullptr;
  }

  void validate() const {
    if (!(duration > 0.0)) throw ConfigError("scenario duration must be > 0");
    if (sensor_noise_sd < 0.0) throw ConfigError("noise sd must be >= 0");
    limits.validate();
    admittance.validate();
    grasp.validate();
    action.validate();
    object().validate();
    for (const auto& c : contacts) {
      if (const auto* p = std::get_if<CompliantPlane>(&c)) p->validate();
      if (const auto* s = std::get_if<SpringSocket>(&c)) s->validate();
    }
    if (policy != "wipe" && policy != "skewer" && policy != "insert")
      throw ConfigError("unknown scripted policy '" + policy + "'");
  }
};

// ---------------------------------------------------------------------------
// Simulation state
// ---------------------------------------------------------------------------

struct ObjectState {
  bool held = false;
  bool slipped = false;
  int slip_events = 0;
  double insertion_depth = 0.0;  // m, >= 0
  bool engaged = false;
};

/// Contact quantities as sensed this step. On a slip tick these hold the
/// pre-drop values, so a trace scan sees the load that caused the slip.
struct ContactSnapshot {
  double axial_force = 0.0;      // plane normal / socket / resistance, N
  double depth = 0.0;            // m
  double tangential_load = 0.0;  // through the grasp, N
  double capacity = 0.0;         // mu_grasp * f_G, N
};

struct SimState {
  double time = 0.0;
  Pose tcp = Pose::identity("tcp", "base");
  Vec3 tcp_velocity = Vec3::Zero();
  double gripper_width = 0.05;
  Wrench s1 = Wrench::zero("s1");
  Wrench s2 = Wrench::zero("s2");
  double grasp_force = 0.0;  // measured, N
  ObjectState object;
  ContactSnapshot contact;
};

/// Finger sensor poses: fingers sit at +-width/2 along TCP x, local +z points
/// from the pad into the object (compression positive).
inline Pose sensor_pose_in_tcp(int which, double width) {
  Mat3 r;
  if (which == 1) {
    r.col(0) = Vec3(0, 0, 1);
    r.col(1) = Vec3(0, 1, 0);
    r.col(2) = Vec3(-1, 0, 0);
  } else {
    r.col(0) = Vec3(0, 0, 1);
    r.col(1) = Vec3(0, -1, 0);
    r.col(2) = Vec3(1, 0, 0);
  }
  const Vec3 t(which == 1 ? width / 2.0 : -width / 2.0, 0.0, 0.0);
  return Pose(Rotation::trusted(r), t, which == 1 ? "s1" : "s2", "tcp");
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kFrictionVelEps = 1e-3;  // m/s
inline constexpr double kContactForceEps = 1e-12;
inline constexpr double kGravity = 9.81;

struct EnvForces {
  Vec3 force = Vec3::Zero();    // on the tool/object, base frame
  Vec3 torque = Vec3::Zero();   // about the TCP origin, base frame
  double axial_force = 0.0;     // plane normal / socket / resistance magnitude
  double depth = 0.0;           // penetration or insertion depth
  double tangential_load = 0.0; // transmitted through the grasp friction
};

/// Contact forces for the current pose/velocity. Zero unless the object is
/// held (contact is mediated by the grasped tool).
inline EnvForces environment_forces(const SimState& st, const Scenario& scn) {
  EnvForces env;
  if (!st.object.held) return env;

  const Mat3& r = st.tcp.rotation().matrix();
  const Vec3 tip =
      st.tcp.translation() + r * Vec3(0, 0, -scn.tool_length);

  if (const CompliantPlane* plane = scn.plane()) {
    const double s = plane->normal.dot(tip - plane->origin);
    const double pen = std::max(0.0, -s);
    env.depth = pen;
    if (pen > 0.0) {
      const double fn = plane->k_env * pen;
      env.axial_force = fn;
      env.force += fn * plane->normal;
      const Vec3 v_t = st.tcp_velocity -
                       plane->normal.dot(st.tcp_velocity) * plane->normal;
      const double speed = v_t.norm();
      if (speed > kFrictionVelEps)
        env.force += -plane->mu * fn * v_t / speed;
      else if (speed > 0.0)
        env.force += -plane->mu * fn * v_t / kFrictionVelEps;
    }
  }
  if (const SpringSocket* socket = scn.socket()) {
    const double d = socket->axis.dot(socket->origin - tip);
    if (d > 0.0) {
      const double mag = socket->preload + socket->k_spring * d;
      env.depth = d;
      env.axial_force = mag;
      env.force += mag * socket->axis;
    }
  }
  if (const auto& resist = scn.object().resistance) {
    const double d = resist->axis.dot(resist->origin - tip);
    if (d > 0.0) {
      const double mag =
          d < resist->puncture_depth ? resist->ramp * d : resist->post_force;
      env.depth = d;
      env.axial_force = mag;
      env.force += mag * resist->axis;
    }
  }

  env.torque = (tip - st.tcp.translation()).cross(env.force);

  const Vec3 grasp_axis = r.col(0);
  const Vec3 transmitted =
      env.force + Vec3(0, 0, -scn.object().mass * kGravity);
  env.tangential_load =
      (transmitted - grasp_axis.dot(transmitted) * grasp_axis).norm();
  return env;
}

}  // namespace detail

/// Advances the environment by one wrist period: ideal tracking of the
/// commanded pose, gripper width integrated from the commanded grasp
/// velocity (positive closes), contact forces from the models, object
/// hold/slip/engage transitions, and per-finger sensor synthesis (optionally
/// noisy). Deterministic for a fixed rng state.
inline SimState sim_step(const SimState& prev, const Pose& commanded_tcp,
                         double grasp_velocity, const Scenario& scn, double dt,
                         std::mt19937_64* noise_rng = nullptr) {
  if (!(dt > 0.0)) throw ConfigError("sim_step: dt must be > 0");
  SimState st = prev;
  st.tcp_velocity = (commanded_tcp.translation() - prev.tcp.translation()) / dt;
  st.tcp = commanded_tcp;
  st.gripper_width =
      std::clamp(prev.gripper_width - grasp_velocity * dt,
                 scn.grasp.width_limits[0], scn.grasp.width_limits[1]);
  st.time = prev.time + dt;

  const GraspSlipModel& obj = scn.object();
  const double f_per_finger =
      st.object.slipped
          ? 0.0
          : obj.k_obj * std::max(0.0, obj.object_width - st.gripper_width);

  // The object commits to the grasp once friction can carry its weight with
  // 50% margin; before that it is externally supported.
  if (!st.object.held && !st.object.slipped) {
    const double hold_force =
        std::max(0.5, 1.5 * obj.mass * detail::kGravity /
                          std::max(obj.mu_grasp, 1e-6));
    if (f_per_finger >= hold_force) st.object.held = true;
  }

  detail::EnvForces env = detail::environment_forces(st, scn);
  st.contact.axial_force = env.axial_force;
  st.contact.depth = env.depth;
  st.contact.tangential_load = env.tangential_load;
  st.contact.capacity = obj.mu_grasp * f_per_finger;

  bool dropped_now = false;
  if (st.object.held &&
      env.tangential_load > obj.mu_grasp * f_per_finger) {
    st.object.slipped = true;
    st.object.held = false;
    st.object.slip_events += 1;
    dropped_now = true;
  }

  st.object.insertion_depth = env.depth;
  if (scn.socket() && env.axial_force >= scn.socket()->engage_force &&
      env.depth > 0.0)
    st.object.engaged = true;  // latches; never un-engages within a run
  if (dropped_now) env = detail::EnvForces{};  // dropped: contact is gone

  // Sensor synthesis: half of the external TCP wrench through each finger
  // plus the grasp compression on local z.
  const Mat3& r = st.tcp.rotation().matrix();
  Wrench w_tcp(r.transpose() * env.force, r.transpose() * env.torque, "tcp");
  Wrench half(0.5 * w_tcp.force, 0.5 * w_tcp.torque, "tcp");
  Wrench s1 =
      transform_wrench(half, invert(sensor_pose_in_tcp(1, st.gripper_width)));
  Wrench s2 =
      transform_wrench(half, invert(sensor_pose_in_tcp(2, st.gripper_width)));
  const double f_g = st.object.slipped ? 0.0 : f_per_finger;
  s1.force.z() += f_g;
  s2.force.z() += f_g;
  if (scn.sensor_noise_sd > 0.0 && noise_rng != nullptr) {
    std::normal_distribution<double> gauss(0.0, scn.sensor_noise_sd);
    for (int i = 0; i < 3; ++i) {
      s1.force(i) += gauss(*noise_rng);
      s2.force(i) += gauss(*noise_rng);
      s1.torque(i) += 0.01 * gauss(*noise_rng);
      s2.torque(i) += 0.01 * gauss(*noise_rng);
    }
  }
  st.s1 = s1;
  st.s2 = s2;
  st.grasp_force = measure_grasp_force(s1, s2);
  return st;
}

// ---------------------------------------------------------------------------
// Scripted policies
// ---------------------------------------------------------------------------

namespace detail {

inline double triangle_sweep(double distance, double span) {
  if (span <= 0.0) return 0.0;
  const double m = std::fmod(std::max(0.0, distance), 2.0 * span);
  return m < span ? m : 2.0 * span - m;
}

}  // namespace detail

/// Stateless scripted policy standing in for the learned loop: emits a
/// 21-D action per tick from the observable state. Free space runs at
/// k_max; in contact the stiffness drops along the pressing direction and
/// the virtual target is placed so the spring renders the target force.
inline Action21 scripted_policy(const SimState& st, const Scenario& scn) {
  const ActionLimits& lim = scn.action;
  const double k_max = lim.k_max;
  const GraspSlipModel& obj = scn.object();

  DecodedAction act;
  act.reference = st.tcp;
  act.virtual_target = st.tcp;
  act.stiffness = k_max;
  act.grasp_force = scn.grasp_force_target;
  act.width = std::clamp(obj.object_width - 0.005, scn.grasp.width_limits[0],
                         scn.grasp.width_limits[1]);

  const bool grasped = st.grasp_force >= 0.8 * scn.grasp_force_target;
  const Vec3 pos = st.tcp.translation();

  if (scn.policy == "wipe") {
    const CompliantPlane* plane = scn.plane();
    if (plane == nullptr) throw ConfigError("wipe scenario needs a plane");
    // Normal force as observed by the finger sensors, combined at the TCP.
    const Wrench w_tcp = combine_finger_wrenches(
        st.s1, st.s2, sensor_pose_in_tcp(1, st.gripper_width),
        sensor_pose_in_tcp(2, st.gripper_width));
    const double f_n =
        plane->normal.dot(st.tcp.rotation().matrix() * w_tcp.force);
    const double surface_tcp_z =
        plane->origin.z() + scn.tool_length;  // TCP height at tip contact

    if (!grasped) {
      // Hold pose, close on the object.
    } else if (f_n < 2.0) {
      // Approach: chase the virtual target down until contact.
      Vec3 vt = pos;
      vt.z() = std::max(pos.z() - scn.approach_lead, surface_tcp_z - 0.002);
      act.virtual_target.set_translation(vt);
      act.reference.set_translation(pos);
    } else {
      // Press to the force target and sweep laterally. Soft along the
      // normal (offset direction), k_max in the sweep plane.
      const double f = scn.contact_force_target;
      const double k = scn.press_stiffness;
      const double lat = detail::triangle_sweep(
          scn.wipe_speed * (st.time - scn.wipe_start_time), scn.wipe_span);
      Vec3 ref(scn.initial_position.x(), scn.initial_position.y() + lat,
               surface_tcp_z);
      Vec3 vt = ref;
      vt.z() = surface_tcp_z - f / plane->k_env - f / k;
      act.reference.set_translation(ref);
      act.virtual_target.set_translation(vt);
      act.stiffness = k;
    }
  } else if (scn.policy == "skewer") {
    const auto& resist = obj.resistance;
    if (!resist.has_value())
      throw ConfigError("skewer scenario needs an axial resistance profile");
    if (grasped && st.object.insertion_depth < scn.advance_depth) {
      // Advance the virtual target ahead of the tool along the spike axis.
      act.reference.set_translation(pos);
      act.virtual_target.set_translation(pos - resist->axis * scn.advance_lead);
    }
    act.grasp_force = scn.grasp_force_target;
  } else if (scn.policy == "insert") {
    const SpringSocket* socket = scn.socket();
    if (socket == nullptr) throw ConfigError("insert scenario needs a socket");
    const Wrench w_tcp = combine_finger_wrenches(
        st.s1, st.s2, sensor_pose_in_tcp(1, st.gripper_width),
        sensor_pose_in_tcp(2, st.gripper_width));
    const double f_axial =
        socket->axis.dot(st.tcp.rotation().matrix() * w_tcp.force);

    if (!grasped) {
      // Hold pose, build up grasp force on the bulb.
    } else if (f_axial < 0.8 * socket->preload) {
      // Descend gently until the preload is felt.
      Vec3 vt = pos - socket->axis * scn.approach_lead;
      act.reference.set_translation(pos);
      act.virtual_target.set_translation(vt);
    } else {
      // Press to the target force; once engaged, twist about the axis.
      const double f = scn.contact_force_target;
      const double k = scn.press_stiffness;
      const double d_eq = (f - socket->preload) / socket->k_spring;
      const Vec3 seat = socket->origin +
                        socket->axis * (scn.tool_length - d_eq);
      Vec3 ref(seat.x(), seat.y(), seat.z());
      Vec3 vt = ref - socket->axis * (f / k);
      act.reference.set_translation(ref);
      act.virtual_target.set_translation(vt);
      act.stiffness = k;
      if (st.object.engaged) {
        const double current = Rotation::identity().angle_to(st.tcp.rotation());
        const double target_angle =
            std::min(current + scn.rotation_step, scn.rotation_angle);
        const Rotation rot = Rotation::about_axis(socket->axis, target_angle);
        act.reference.set_rotation(rot);
        act.virtual_target.set_rotation(rot);
      }
    }
  } else {
    throw ConfigError("unknown scripted policy '" + scn.policy + "'");
  }

  return encode_action(act, lim);
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct MetricCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  std::string cmp;  // ">=", "<=", "=="
  bool pass = false;
};

struct ScenarioMetrics {
  std::string scenario;
  uint64_t seed = 0;

  double contact_time = 0.0;
  double band_occupancy = 0.0;       // fraction of contact time in +-20% band
  double grasp_ss_error = 0.0;       // relative, last 20% of the run
  double max_grasp_axis_force = 0.0; // per-sensor |z|, N
  double max_shear_force = 0.0;      // per-sensor |x|,|y|, N
  double max_depth = 0.0;
  double max_axial_pre_rotation = 0.0;
  double first_engage_time = -1.0;
  double first_rotation_time = -1.0;
  double first_latch_time = -1.0;
  int slip_events = 0;
  int held_actions = 0;  // policy outputs rejected and held
  bool engaged = false;
  bool safety_latched = false;
  bool slip_scan_ok = true;
  bool contact_consistency_ok = true;
  bool engaged_monotone_ok = true;
  bool freeze_after_latch_ok = true;
  bool rate_fidelity_ok = true;
  uint64_t trace_hash = 0;

  std::vector<MetricCheck> checks;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  std::string pretty() const {
    std::ostringstream out;
    out << "scenario " << scenario << " (seed " << seed << ")\n";
    char line[160];
    std::snprintf(line, sizeof(line),
                  "  contact time %.2f s | band occupancy %.1f%% | grasp ss "
                  "err %.2f%% | slips %d\n",
                  contact_time, 100.0 * band_occupancy, 100.0 * grasp_ss_error,
                  slip_events);
    out << line;
    std::snprintf(line, sizeof(line),
                  "  max grasp-axis %.2f N | max shear %.2f N | max depth %.4f "
                  "m | engaged %s | safety latched %s\n",
                  max_grasp_axis_force, max_shear_force, max_depth,
                  engaged ? "yes" : "no", safety_latched ? "yes" : "no");
    out << line;
    for (const auto& c : checks) {
      std::snprintf(line, sizeof(line), "  [%s] %-28s %12.5g %s %g\n",
                    c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value,
                    c.cmp.c_str(), c.threshold);
      out << line;
    }
    return out.str();
  }

  std::string to_json() const;
};

// (implementation below, after the trace schema)

namespace detail {

struct TraceStreams {
  int wrist = -1, wrench_tcp = -1, s1 = -1, s2 = -1, grasp = -1, policy = -1,
      safety = -1, contact = -1;
};

inline TraceStreams register_trace_streams(SessionLog& log) {
  TraceStreams t;
  t.wrist = log.add_stream({"wrist_state", Scenario::kWristRate, 6, 0});
  t.wrench_tcp = log.add_stream({"wrench_tcp", Scenario::kWristRate, 6, 0});
  t.s1 = log.add_stream({"wrench_s1", Scenario::kWristRate, 6, 0});
  t.s2 = log.add_stream({"wrench_s2", Scenario::kWristRate, 6, 0});
  t.grasp = log.add_stream({"grasp", Scenario::kGripperRate, 4, 0});
  t.policy = log.add_stream({"policy", Scenario::kPolicyRate, 21, 0});
  t.safety = log.add_stream({"safety", Scenario::kWristRate, 3, 0});
  t.contact = log.add_stream({"contact", Scenario::kWristRate, 8, 0});
  return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenario runner
// ---------------------------------------------------------------------------

struct RunResult {
  ScenarioMetrics metrics;
  SessionLog trace;
};

ScenarioMetrics metrics_report(const SessionLog& trace, const Scenario& scn);

/// Closes the three loops at their spec rates (wrist 500 Hz, gripper 30 Hz,
/// policy 10 Hz; fixed order sense -> safety -> wrist -> gripper -> policy
/// within a tick) against the contact models, in simulated time only.
/// Byte-identical traces for identical (scenario, seed).
inline RunResult run_scenario(const Scenario& scn) {
  scn.validate();

  SessionLog trace(scn.name + " seed=" + std::to_string(scn.seed), 0);
  const detail::TraceStreams ts = detail::register_trace_streams(trace);

  SimState st;
  st.tcp = Pose(Rotation::identity(), scn.initial_position, "tcp", "base");
  st.gripper_width = scn.initial_width;
  const double dt = 1.0 / Scenario::kWristRate;
  st.time = -dt;  // first sense lands on t = 0

  AdmittanceState wrist_state;
  wrist_state.commanded_position = scn.initial_position;
  AdmittanceController wrist(scn.admittance, wrist_state);
  GraspController grip(scn.grasp, scn.initial_width);
  SafetyMonitor safety(scn.limits);
  std::mt19937_64 noise_rng(scn.seed);

  const int64_t n_ticks = static_cast<int64_t>(
      std::llround(scn.duration * Scenario::kWristRate));

  // Bootstrap targets from the initial state.
  int held_actions = 0;
  Action21 action = scripted_policy(st, scn);
  DecodedAction decoded = decode_action(action, scn.action);
  wrist.set_target(decoded.stiffness_spec(scn.action.k_max));
  grip.set_targets(decoded.width, decoded.grasp_force);

  double latest_v_g = 0.0;  // zero-order hold between gripper updates
  Pose commanded = st.tcp;

  for (int64_t tick = 0; tick < n_ticks; ++tick) {
    const uint64_t t_ns = static_cast<uint64_t>(tick) * 2'000'000ULL;

    // Sense: environment + sensors for the current commanded pose/velocity.
    st = sim_step(st, commanded, latest_v_g, scn, dt,
                  scn.sensor_noise_sd > 0.0 ? &noise_rng : nullptr);

    // Safety.
    safety.check(st.s1, st.s2);
    const bool frozen = safety.tripped() || wrist.faulted();
    if (frozen) latest_v_g = 0.0;

    // Wrist admittance.
    const Wrench w_tcp = combine_finger_wrenches(
        st.s1, st.s2, sensor_pose_in_tcp(1, st.gripper_width),
        sensor_pose_in_tcp(2, st.gripper_width));
    if (!frozen) {
      const AdmittanceState& ws = wrist.step(w_tcp);
      commanded = Pose(ws.commanded_rotation, ws.commanded_position, "tcp",
                       "base");
    }

    // Gripper (30 Hz inside the 500 Hz tick pattern).
    const bool gripper_due =
        ((tick + 1) * 30) / 500 != (tick * 30) / 500;
    double v_g = latest_v_g;
    if (gripper_due) {
      v_g = grip.step(st.gripper_width, st.grasp_force);
      latest_v_g = frozen ? 0.0 : v_g;
    }

    // Policy (10 Hz, last in the tick; acts from the next tick).
    const bool policy_due = ((tick + 1) % 50) == 0;
    if (policy_due) {
      action = scripted_policy(st, scn);
      try {
        decoded = decode_action(action, scn.action);
        wrist.set_target(decoded.stiffness_spec(scn.action.k_max));
        grip.set_targets(decoded.width, decoded.grasp_force);
      } catch (const DecodeError&) {
        ++held_actions;  // keep previous targets
      }
    }

    // Trace.
    {
      Eigen::VectorXd row(6);
      row << wrist.state().commanded_position, wrist.state().commanded_velocity;
      trace.append(ts.wrist, t_ns, row);
      trace.append(ts.wrench_tcp, t_ns, w_tcp.as_vector());
      trace.append(ts.s1, t_ns, st.s1.as_vector());
      trace.append(ts.s2, t_ns, st.s2.as_vector());
      Eigen::VectorXd safe(3);
      const auto& v = safety.violation();
      safe << (safety.tripped() ? 1.0 : 0.0),
          (v ? static_cast<double>(v->sensor) : 0.0),
          (v ? static_cast<double>(v->axis) : -1.0);
      trace.append(ts.safety, t_ns, safe);

      Eigen::VectorXd contact(8);
      contact << st.contact.axial_force, st.contact.depth,
          (st.object.engaged ? 1.0 : 0.0), (st.object.held ? 1.0 : 0.0),
          (st.object.slipped ? 1.0 : 0.0), st.contact.tangential_load,
          st.contact.capacity, static_cast<double>(st.object.slip_events);
      trace.append(ts.contact, t_ns, contact);

      if (gripper_due) {
        Eigen::VectorXd g(4);
        g << st.gripper_width, st.grasp_force, grip.state().target_force, v_g;
        trace.append(ts.grasp, t_ns, g);
      }
      if (policy_due) trace.append(ts.policy, t_ns, action);
    }
  }

  RunResult result{metrics_report(trace, scn), std::move(trace)};
  result.metrics.held_actions = held_actions;
  return result;
}

// ---------------------------------------------------------------------------
// Metrics implementation
// ---------------------------------------------------------------------------

inline ScenarioMetrics metrics_report(const SessionLog& trace,
                                      const Scenario& scn) {
  ScenarioMetrics m;
  m.scenario = scn.name;
  m.seed = scn.seed;

  const auto& contact = trace.samples("contact");
  const auto& s1 = trace.samples("wrench_s1");
  const auto& s2 = trace.samples("wrench_s2");
  const auto& grasp = trace.samples("grasp");
  const auto& policy = trace.samples("policy");
  const auto& safety = trace.samples("safety");
  const auto& wrist = trace.samples("wrist_state");
  if (contact.empty() || wrist.empty())
    throw ConfigError("metrics_report: incomplete trace");

  const double dt = 1.0 / Scenario::kWristRate;
  const double band_lo = 0.8 * scn.contact_force_target;
  const double band_hi = 1.2 * scn.contact_force_target;

  double in_band = 0.0;
  double prev_slips = 0.0;
  bool prev_engaged = false;
  for (size_t i = 0; i < contact.size(); ++i) {
    const auto& c = contact[i].payload;
    const double force = c(0), depth = c(1);
    const bool engaged = c(2) > 0.5;
    const double load = c(5), capacity = c(6), slips = c(7);

    if (force > 0.5) {
      m.contact_time += dt;
      if (force >= band_lo && force <= band_hi) in_band += dt;
    }
    m.max_depth = std::max(m.max_depth, depth);
    m.engaged = m.engaged || engaged;
    if (engaged && m.first_engage_time < 0.0)
      m.first_engage_time = static_cast<double>(contact[i].t_ns) * 1e-9;
    if (engaged != prev_engaged && !engaged) m.engaged_monotone_ok = false;
    prev_engaged = engaged;

    if (slips > prev_slips && !(load > capacity)) m.slip_scan_ok = false;
    prev_slips = slips;

    // Plane/socket/resistance force exists iff there is depth.
    if ((force > detail::kContactForceEps) != (depth > detail::kContactForceEps))
      m.contact_consistency_ok = false;
  }
  m.slip_events = static_cast<int>(contact.back().payload(7));
  m.band_occupancy =
      m.contact_time > 0.0 ? in_band / m.contact_time : 0.0;

  for (size_t i = 0; i < s1.size(); ++i) {
    m.max_grasp_axis_force =
        std::max({m.max_grasp_axis_force, std::abs(s1[i].payload(2)),
                  std::abs(s2[i].payload(2))});
    m.max_shear_force =
        std::max({m.max_shear_force, std::abs(s1[i].payload(0)),
                  std::abs(s1[i].payload(1)), std::abs(s2[i].payload(0)),
                  std::abs(s2[i].payload(1))});
  }

  // Grasp steady state over the last 20% of the run.
  if (!grasp.empty()) {
    const size_t start = grasp.size() - std::max<size_t>(1, grasp.size() / 5);
    double err = 0.0;
    int n = 0;
    for (size_t i = start; i < grasp.size(); ++i) {
      const double target = grasp[i].payload(2);
      if (target > 1e-9) {
        err += std::abs(grasp[i].payload(1) - target) / target;
        ++n;
      }
    }
    m.grasp_ss_error = n > 0 ? err / n : 0.0;
  }

  // First rotation command (insert): virtual-target rotation deviates from
  // the first policy row.
  if (!policy.empty()) {
    const Eigen::VectorXd first = policy.front().payload.segment(kActVtRot, 6);
    for (const auto& p : policy) {
      if ((p.payload.segment(kActVtRot, 6) - first).cwiseAbs().maxCoeff() >
          1e-9) {
        m.first_rotation_time = static_cast<double>(p.t_ns) * 1e-9;
        break;
      }
    }
  }
  const double rotation_cutoff = m.first_rotation_time < 0.0
                                     ? std::numeric_limits<double>::infinity()
                                     : m.first_rotation_time;
  for (const auto& c : contact) {
    if (static_cast<double>(c.t_ns) * 1e-9 < rotation_cutoff)
      m.max_axial_pre_rotation =
          std::max(m.max_axial_pre_rotation, c.payload(0));
  }

  // Safety latch and post-latch freeze.
  size_t latch_row = safety.size();
  for (size_t i = 0; i < safety.size(); ++i) {
    if (safety[i].payload(0) > 0.5) {
      m.safety_latched = true;
      m.first_latch_time = static_cast<double>(safety[i].t_ns) * 1e-9;
      latch_row = i;
      break;
    }
  }
  if (m.safety_latched) {
    for (size_t i = latch_row + 1; i < wrist.size(); ++i) {
      const Vec3 delta = (wrist[i].payload.head<3>() -
                          wrist[i - 1].payload.head<3>());
      if (delta.cwiseAbs().maxCoeff() > 0.0) {
        m.freeze_after_latch_ok = false;
        break;
      }
    }
  }

  // Rate fidelity: 50 wrist rows and 3 grasp rows per policy interval.
  for (size_t p = 1; p < policy.size(); ++p) {
    const uint64_t lo = policy[p - 1].t_ns, hi = policy[p].t_ns;
    int n_wrist = 0, n_grasp = 0;
    for (const auto& w : wrist)
      if (w.t_ns > lo && w.t_ns <= hi) ++n_wrist;
    for (const auto& g : grasp)
      if (g.t_ns > lo && g.t_ns <= hi) ++n_grasp;
    if (n_wrist != 50 || n_grasp != 3) {
      m.rate_fidelity_ok = false;
      break;
    }
  }

  // Scenario pass/fail checks.
  const auto add = [&m](const std::string& name, double value,
                        const std::string& cmp, double threshold) {
    bool pass = false;
    if (cmp == ">=") pass = value >= threshold;
    if (cmp == "<=") pass = value <= threshold;
    if (cmp == "==") pass = value == threshold;
    m.checks.push_back(MetricCheck{name, value, threshold, cmp, pass});
  };
  add("no_safety_latch", m.safety_latched ? 1.0 : 0.0, "==", 0.0);
  add("slip_events", static_cast<double>(m.slip_events), "==", 0.0);
  if (scn.policy == "wipe") {
    add("band_occupancy", m.band_occupancy, ">=", 0.8);
    add("grasp_ss_error", m.grasp_ss_error, "<=", 0.02);
  } else if (scn.policy == "skewer") {
    add("advance_depth", m.max_depth, ">=", scn.advance_depth);
    add("grasp_ss_error", m.grasp_ss_error, "<=", 0.02);
  } else if (scn.policy == "insert") {
    add("engaged", m.engaged ? 1.0 : 0.0, "==", 1.0);
    add("axial_pre_rotation", m.max_axial_pre_rotation, ">=", 15.0);
    add("peak_grasp_axis", m.max_grasp_axis_force, "<=", 50.0);
  }
  return m;
}

inline std::string ScenarioMetrics::to_json() const {
  std::ostringstream out;
  out.precision(12);
  out << "{\n";
  out << "  \"scenario\": \"" << scenario << "\",\n";
  out << "  \"seed\": " << seed << ",\n";
  out << "  \"contact_time\": " << contact_time << ",\n";
  out << "  \"band_occupancy\": " << band_occupancy << ",\n";
  out << "  \"grasp_ss_error\": " << grasp_ss_error << ",\n";
  out << "  \"max_grasp_axis_force\": " << max_grasp_axis_force << ",\n";
  out << "  \"max_shear_force\": " << max_shear_force << ",\n";
  out << "  \"max_depth\": " << max_depth << ",\n";
  out << "  \"max_axial_pre_rotation\": " << max_axial_pre_rotation << ",\n";
  out << "  \"first_engage_time\": " << first_engage_time << ",\n";
  out << "  \"first_rotation_time\": " << first_rotation_time << ",\n";
  out << "  \"first_latch_time\": " << first_latch_time << ",\n";
  out << "  \"slip_events\": " << slip_events << ",\n";
  out << "  \"held_actions\": " << held_actions << ",\n";
  out << "  \"engaged\": " << (engaged ? "true" : "false") << ",\n";
  out << "  \"safety_latched\": " << (safety_latched ? "true" : "false")
      << ",\n";
  out << "  \"slip_scan_ok\": " << (slip_scan_ok ? "true" : "false") << ",\n";
  out << "  \"contact_consistency_ok\": "
      << (contact_consistency_ok ? "true" : "false") << ",\n";
  out << "  \"engaged_monotone_ok\": "
      << (engaged_monotone_ok ? "true" : "false") << ",\n";
  out << "  \"freeze_after_latch_ok\": "
      << (freeze_after_latch_ok ? "true" : "false") << ",\n";
  out << "  \"rate_fidelity_ok\": " << (rate_fidelity_ok ? "true" : "false")
      << ",\n";
  out << "  \"trace_hash\": \"" << std::hex << trace_hash << std::dec
      << "\",\n";
  out << "  \"all_pass\": " << (all_pass() ? "true" : "false") << ",\n";
  out << "  \"checks\": [\n";
  for (size_t i = 0; i < checks.size(); ++i) {
    out << "    {\"name\": \"" << checks[i].name << "\", \"value\": "
        << checks[i].value << ", \"cmp\": \"" << checks[i].cmp
        << "\", \"threshold\": " << checks[i].threshold << ", \"pass\": "
        << (checks[i].pass ? "true" : "false") << "}"
        << (i + 1 < checks.size() ? "," : "") << "\n";
  }
  out << "  ]\n}\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Built-in scenario registry
// ---------------------------------------------------------------------------

inline Scenario make_wipe_scenario(uint64_t seed = 0) {
  Scenario s;
  s.name = "wipe";
  s.policy = "wipe";
  s.duration = 14.0;
  s.seed = seed;
  s.limits = SafetyLimits{25.0, 20.0};
  s.contact_force_target = 8.0;
  s.grasp_force_target = 12.0;
  s.press_stiffness = 500.0;
  s.wipe_start_time = 4.0;
  CompliantPlane plane;
  plane.origin = Vec3(0, 0, 0);
  plane.k_env = 1e4;
  plane.mu = 0.4;
  GraspSlipModel eraser;
  eraser.object_width = 0.03;
  eraser.mass = 0.05;
  eraser.mu_grasp = 1.2;
  s.contacts = {plane, eraser};
  s.initial_position = Vec3(0, 0, s.tool_length + 0.02);
  s.initial_width = 0.05;
  return s;
}

inline Scenario make_skewer_scenario(uint64_t seed = 0) {
  Scenario s;
  s.name = "skewer";
  s.policy = "skewer";
  s.duration = 10.0;
  s.seed = seed;
  s.limits = SafetyLimits{25.0, 20.0};
  s.grasp_force_target = 15.0;
  s.advance_lead = 0.005;
  s.advance_depth = 0.02;
  GraspSlipModel slice;
  slice.object_width = 0.025;
  slice.mass = 0.2;
  slice.mu_grasp = 0.8;
  AxialResistance spike;
  spike.axis = Vec3(0, 0, 1);
  spike.origin = Vec3(0, 0, 0);
  spike.ramp = 800.0;
  spike.puncture_depth = 0.01;
  spike.post_force = 1.0;
  slice.resistance = spike;
  s.contacts = {slice};
  s.initial_position = Vec3(0, 0, s.tool_length + 0.03);
  s.initial_width = slice.object_width;  // pre-grasped
  return s;
}

inline Scenario make_insert_scenario(uint64_t seed = 0) {
  Scenario s;
  s.name = "insert";
  s.policy = "insert";
  s.duration = 12.0;
  s.seed = seed;
  s.limits = SafetyLimits{50.0, 20.0};  // lightbulb task thresholds
  s.contact_force_target = 17.0;
  s.grasp_force_target = 25.0;
  s.press_stiffness = 800.0;
  s.approach_lead = 0.003;
  SpringSocket socket;
  socket.axis = Vec3(0, 0, 1);
  socket.origin = Vec3(0, 0, 0);
  socket.preload = 10.0;
  socket.k_spring = 1000.0;
  socket.engage_force = 15.0;
  GraspSlipModel bulb;
  bulb.object_width = 0.045;
  bulb.mass = 0.1;
  bulb.mu_grasp = 1.0;
  s.contacts = {socket, bulb};
  s.initial_position = Vec3(0, 0, s.tool_length + 0.015);
  s.initial_width = bulb.object_width;  // pre-grasped
  return s;
}

inline std::vector<std::string> builtin_scenarios() {
  return {"wipe", "skewer", "insert"};
}

inline Scenario scenario_by_name(const std::string& name, uint64_t seed = 0) {
  if (name == "wipe") return make_wipe_scenario(seed);
  if (name == "skewer") return make_skewer_scenario(seed);
  if (name == "insert") return make_insert_scenario(seed);
  throw ConfigError("unknown scenario '" + name + "'");
}

}  // namespace clasp
