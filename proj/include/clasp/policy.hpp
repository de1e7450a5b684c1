#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "clasp/compliance.hpp"
#include "clasp/error.hpp"
#include "clasp/geometry.hpp"
#include "clasp/log.hpp"

namespace clasp {

// ---------------------------------------------------------------------------
// 21-D action vector
//
// [0..3)   reference position        [3..9)   reference rotation (rot6d)
// [9..12)  virtual target position   [12..18) virtual target rotation (rot6d)
// [18] stiffness scalar (N/m)        [19] gripper width (m)
// [20] grasp force (N)
// ---------------------------------------------------------------------------

using Action21 = Eigen::Matrix<double, 21, 1>;

inline constexpr int kActRefPos = 0;
inline constexpr int kActRefRot = 3;
inline constexpr int kActVtPos = 9;
inline constexpr int kActVtRot = 12;
inline constexpr int kActStiffness = 18;
inline constexpr int kActWidth = 19;
inline constexpr int kActGraspForce = 20;

struct ActionLimits {
  double k_min = 100.0;   // N/m
  double k_max = 3000.0;  // N/m
  std::array<double, 2> width_limits{0.0, 0.11};  // m

  void validate() const {
    if (!(k_min > 0.0) || !(k_min <= k_max))
      throw ConfigError("action limits require 0 < k_min <= k_max");
    if (!(width_limits[0] < width_limits[1]))
      throw ConfigError("action width limits require min < max");
  }
};

struct DecodedAction {
  Pose reference;        // TCP pose, from tcp to base
  Pose virtual_target;
  double stiffness = 0.0;
  double width = 0.0;
  double grasp_force = 0.0;
  bool stiffness_clamped = false;  // raised when the raw scalar was out of range

  StiffnessSpec stiffness_spec(double k_max) const {
    return StiffnessSpec{stiffness, k_max, reference, virtual_target};
  }
};

/// Decodes an action vector into controller targets. Rotations go through the
/// Gram-Schmidt rot6d decoder; an undecodable sextet raises DecodeError so
/// the caller can hold the previous action. The stiffness scalar is clamped
/// into [k_min, k_max] (flagged); width and grasp force outside their
/// invariants are rejected.
inline DecodedAction decode_action(const Action21& a, const ActionLimits& lim,
                                   const std::string& tcp_frame = "tcp",
                                   const std::string& base_frame = "base") {
  lim.validate();
  if (!a.allFinite()) throw DecodeError("action vector has non-finite entries");

  DecodedAction out;
  out.reference = Pose(decode_rot6d(a.segment<6>(kActRefRot)),
                       a.segment<3>(kActRefPos), tcp_frame, base_frame);
  out.virtual_target = Pose(decode_rot6d(a.segment<6>(kActVtRot)),
                            a.segment<3>(kActVtPos), tcp_frame, base_frame);

  const double raw_k = a(kActStiffness);
  out.stiffness = std::clamp(raw_k, lim.k_min, lim.k_max);
  out.stiffness_clamped = out.stiffness != raw_k;

  out.width = a(kActWidth);
  if (out.width < lim.width_limits[0] || out.width > lim.width_limits[1])
    throw DecodeError("action width outside gripper limits");
  out.grasp_force = a(kActGraspForce);
  if (out.grasp_force < 0.0) throw DecodeError("action grasp force < 0");
  return out;
}

/// Inverse of decode_action on its image.
inline Action21 encode_action(const DecodedAction& action,
                              const ActionLimits& lim) {
  lim.validate();
  if (action.width < lim.width_limits[0] ||
      action.width > lim.width_limits[1])
    throw ConfigError("encode_action: width outside gripper limits");
  if (action.grasp_force < 0.0)
    throw ConfigError("encode_action: grasp force < 0");
  if (!(action.stiffness > 0.0))
    throw ConfigError("encode_action: stiffness must be > 0");

  Action21 a;
  a.segment<3>(kActRefPos) = action.reference.translation();
  a.segment<6>(kActRefRot) = encode_rot6d(action.reference.rotation());
  a.segment<3>(kActVtPos) = action.virtual_target.translation();
  a.segment<6>(kActVtRot) = encode_rot6d(action.virtual_target.rotation());
  a(kActStiffness) = action.stiffness;
  a(kActWidth) = action.width;
  a(kActGraspForce) = action.grasp_force;
  return a;
}

// ---------------------------------------------------------------------------
// Wrench observation window
// ---------------------------------------------------------------------------

/// Ring buffer of the most recent wrench samples (default 32), timestamps
/// strictly increasing. Single-writer; snapshot() yields oldest-first.
class WrenchWindow {
 public:
  explicit WrenchWindow(size_t capacity = 32) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("window capacity must be > 0");
  }

  /// Appends a sample; returns false (window unchanged) when the timestamp
  /// does not advance past the newest entry.
  bool push(const Wrench& w, double t) {
    if (!std::isfinite(t)) return false;
    if (!entries_.empty() && t <= entries_.back().t) return false;
    entries_.push_back(Entry{t, w});
    if (entries_.size() > capacity_) entries_.pop_front();
    return true;
  }

  struct Entry {
    double t;
    Wrench wrench;
  };

  size_t size() const { return entries_.size(); }
  size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }

  std::vector<Entry> snapshot() const {
    return std::vector<Entry>(entries_.begin(), entries_.end());
  }

 private:
  size_t capacity_;
  std::deque<Entry> entries_;
};

/// Builds a policy observation window from a logged wrench stream (arity 6,
/// [force; torque]) by zero-order-hold resampling at the policy tick, ending
/// at t_now. Ticks before the stream's first sample are skipped.
inline WrenchWindow window_from_log(const SessionLog& log,
                                    const std::string& stream_name,
                                    double policy_rate, double t_now,
                                    const std::string& frame,
                                    size_t window = 32) {
  const int idx = log.stream_index(stream_name);
  const auto& spec = log.streams()[idx];
  if (spec.arity != 6)
    throw ConfigError("wrench stream must have arity 6");
  if (!(policy_rate > 0.0)) throw ConfigError("policy rate must be > 0");
  const auto& samples = log.samples(idx);
  if (samples.empty()) throw ConfigError("wrench stream is empty");

  std::vector<double> ts;
  ts.reserve(samples.size());
  for (const auto& s : samples)
    ts.push_back((static_cast<double>(s.t_ns) +
                  static_cast<double>(spec.clock_offset_ns)) *
                 1e-9);

  WrenchWindow win(window);
  for (size_t k = window; k-- > 0;) {
    const double t = t_now - static_cast<double>(k) / policy_rate;
    auto it = std::upper_bound(ts.begin(), ts.end(), t + detail::kTimeSnapTol);
    if (it == ts.begin()) continue;  // before stream start
    const auto& sample = samples[static_cast<size_t>(it - ts.begin()) - 1];
    win.push(Wrench::from_vector(sample.payload, frame), t);
  }
  return win;
}

// ---------------------------------------------------------------------------
// Demonstration trajectories and compliance labels
// ---------------------------------------------------------------------------

struct DemoSample {
  double t = 0.0;            // s
  Pose tcp_pose;             // tcp -> base
  Wrench tcp_wrench;         // TCP frame
  double gripper_width = 0.0;
  double grasp_force = 0.0;
};

struct DemoTrajectory {
  std::vector<DemoSample> samples;

  void validate() const {
    if (samples.size() < 2)
      throw ConfigError("demo trajectory needs at least 2 samples");
    for (size_t i = 0; i < samples.size(); ++i) {
      if (!samples[i].tcp_wrench.finite())
        throw ConfigError("demo trajectory has a non-finite wrench");
      if (i > 0 && !(samples[i].t > samples[i - 1].t))
        throw ConfigError("demo trajectory timestamps must strictly increase");
    }
  }
};

struct LabelingConfig {
  double k_min = 100.0;          // N/m
  double k_max = 3000.0;         // N/m
  double f_ref = 40.0;           // N; force at which stiffness would hit zero
  double smoothing_window = 0.1; // s, centered moving average

  void validate() const {
    if (!(k_min > 0.0) || !(k_min <= k_max))
      throw ConfigError("labeling requires 0 < k_min <= k_max");
    if (!(f_ref > 0.0)) throw ConfigError("labeling f_ref must be > 0");
    if (smoothing_window < 0.0)
      throw ConfigError("labeling smoothing window must be >= 0");
  }
};

struct ComplianceLabel {
  StiffnessSpec spec;        // reference = recorded pose, virtual target offset
  double grasp_force = 0.0;  // recorded grasp force
  Vec3 smoothed_force;       // base frame, the force the label spring renders
};

/// Time-varying virtual-spring labeling. Per timestep: the TCP force is
/// rotated into the base frame and smoothed with a centered moving average;
/// stiffness follows the monotone non-increasing map
///   k_t = clamp(k_max (1 - |f|/f_ref), k_min, k_max)
/// and the virtual target sits at x_vt = x_t + f_t / k_t, so the spring
/// reproduces the smoothed force exactly: k_t (x_vt - x_t) = f_t.
inline std::vector<ComplianceLabel> extract_compliance_labels(
    const DemoTrajectory& demo, const LabelingConfig& cfg) {
  cfg.validate();
  demo.validate();
  const auto& s = demo.samples;
  const size_t n = s.size();

  std::vector<Vec3> f_base(n);
  for (size_t i = 0; i < n; ++i)
    f_base[i] = s[i].tcp_pose.rotation().matrix() * s[i].tcp_wrench.force;

  std::vector<ComplianceLabel> labels(n);
  const double half = cfg.smoothing_window / 2.0;
  size_t lo = 0, hi = 0;
  for (size_t i = 0; i < n; ++i) {
    while (lo < n && s[lo].t < s[i].t - half - 1e-12) ++lo;
    while (hi < n && s[hi].t <= s[i].t + half + 1e-12) ++hi;
    Vec3 f = Vec3::Zero();
    for (size_t j = lo; j < hi; ++j) f += f_base[j];
    f /= static_cast<double>(hi - lo);

    const double k =
        std::clamp(cfg.k_max * (1.0 - f.norm() / cfg.f_ref), cfg.k_min,
                   cfg.k_max);
    Pose vt = s[i].tcp_pose;
    vt.set_translation(s[i].tcp_pose.translation() + f / k);

    labels[i].spec = StiffnessSpec{k, cfg.k_max, s[i].tcp_pose, vt};
    labels[i].grasp_force = s[i].grasp_force;
    labels[i].smoothed_force = f;
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Log serialization (shared session-log format)
// ---------------------------------------------------------------------------

/// Demo stream layout: "tcp_pose" arity 9 (position + rot6d), "tcp_wrench"
/// arity 6, "gripper" arity 2 (width, grasp force), common timestamps.
inline SessionLog demo_to_log(const DemoTrajectory& demo,
                              const std::string& session_id,
                              double nominal_rate = 60.0) {
  demo.validate();
  SessionLog log(session_id, 0);
  log.add_stream(StreamSpec{"tcp_pose", nominal_rate, 9, 0});
  log.add_stream(StreamSpec{"tcp_wrench", nominal_rate, 6, 0});
  log.add_stream(StreamSpec{"gripper", nominal_rate, 2, 0});
  for (const auto& s : demo.samples) {
    const uint64_t t_ns = static_cast<uint64_t>(std::llround(s.t * 1e9));
    Eigen::VectorXd pose(9);
    pose.segment<3>(0) = s.tcp_pose.translation();
    pose.segment<6>(3) = encode_rot6d(s.tcp_pose.rotation());
    log.append(0, t_ns, pose);
    log.append(1, t_ns, s.tcp_wrench.as_vector());
    log.append(2, t_ns, Eigen::Vector2d(s.gripper_width, s.grasp_force));
  }
  return log;
}

inline DemoTrajectory demo_from_log(const SessionLog& log,
                                    const std::string& tcp_frame = "tcp",
                                    const std::string& base_frame = "base") {
  const auto& poses = log.samples("tcp_pose");
  const auto& wrenches = log.samples("tcp_wrench");
  const auto& gripper = log.samples("gripper");
  if (poses.size() != wrenches.size() || poses.size() != gripper.size())
    throw IoError("demo log streams have mismatched lengths");
  DemoTrajectory demo;
  demo.samples.reserve(poses.size());
  for (size_t i = 0; i < poses.size(); ++i) {
    DemoSample s;
    s.t = static_cast<double>(poses[i].t_ns) * 1e-9;
    s.tcp_pose = Pose(decode_rot6d(poses[i].payload.segment<6>(3)),
                      poses[i].payload.segment<3>(0), tcp_frame, base_frame);
    s.tcp_wrench = Wrench::from_vector(wrenches[i].payload, tcp_frame);
    s.gripper_width = gripper[i].payload(0);
    s.grasp_force = gripper[i].payload(1);
    demo.samples.push_back(std::move(s));
  }
  demo.validate();
  return demo;
}

/// Label stream layout: "labels" arity 20 = stiffness k, reference pose (9),
/// virtual target pose (9), grasp force.
inline SessionLog labels_to_log(const std::vector<ComplianceLabel>& labels,
                                const std::vector<double>& times,
                                const std::string& session_id,
                                double nominal_rate = 60.0) {
  if (labels.size() != times.size())
    throw ConfigError("labels_to_log: labels/times size mismatch");
  SessionLog log(session_id, 0);
  log.add_stream(StreamSpec{"labels", nominal_rate, 20, 0});
  for (size_t i = 0; i < labels.size(); ++i) {
    Eigen::VectorXd row(20);
    row(0) = labels[i].spec.k;
    row.segment<3>(1) = labels[i].spec.reference_pose.translation();
    row.segment<6>(4) = encode_rot6d(labels[i].spec.reference_pose.rotation());
    row.segment<3>(10) = labels[i].spec.virtual_target_pose.translation();
    row.segment<6>(13) =
        encode_rot6d(labels[i].spec.virtual_target_pose.rotation());
    row(19) = labels[i].grasp_force;
    log.append(0, static_cast<uint64_t>(std::llround(times[i] * 1e9)), row);
  }
  return log;
}

}  // namespace clasp
