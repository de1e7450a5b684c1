#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>

#include <cmath>
#include <string>
#include <utility>

#include "clasp/error.hpp"

namespace clasp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Orthonormality/determinant tolerance for a valid Rotation.
inline constexpr double kRotationTol = 1e-9;
/// Drift threshold after which composed rotations are re-orthogonalized.
inline constexpr double kReorthThreshold = 1e-12;
/// Degeneracy tolerance for the 6-D rotation decoder (zero / parallel rows).
inline constexpr double kRot6dDegenerateTol = 1e-8;

/// Max absolute entry of R^T R - I.
inline double orthonormality_error(const Mat3& m) {
  return (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
}

/// Nearest rotation matrix in Frobenius norm (SVD projection, det +1).
inline Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) = -u.col(2);
  return u * v.transpose();
}

// ---------------------------------------------------------------------------
// Rotation
// ---------------------------------------------------------------------------

/// Proper rotation matrix. Construction is validated: columns orthonormal and
/// det = +1 within kRotationTol.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  static Rotation identity() { return Rotation(); }

  static Rotation from_matrix(const Mat3& m) {
    const double err = orthonormality_error(m);
    if (err > kRotationTol) {
      throw ConfigError("rotation matrix not orthonormal (error " +
                        std::to_string(err) + ")");
    }
    if (std::abs(m.determinant() - 1.0) > kRotationTol) {
      throw ConfigError("rotation matrix determinant is not +1");
    }
    Rotation r;
    r.m_ = m;
    return r;
  }

  static Rotation about_x(double rad) {
    const double c = std::cos(rad), s = std::sin(rad);
    Mat3 m;
    m << 1, 0, 0, 0, c, -s, 0, s, c;
    return trusted(m);
  }
  static Rotation about_y(double rad) {
    const double c = std::cos(rad), s = std::sin(rad);
    Mat3 m;
    m << c, 0, s, 0, 1, 0, -s, 0, c;
    return trusted(m);
  }
  static Rotation about_z(double rad) {
    const double c = std::cos(rad), s = std::sin(rad);
    Mat3 m;
    m << c, -s, 0, s, c, 0, 0, 0, 1;
    return trusted(m);
  }

  /// Axis-angle about an arbitrary (normalized internally) axis.
  static Rotation about_axis(const Vec3& axis, double rad) {
    const double n = axis.norm();
    if (n < kRot6dDegenerateTol) throw ConfigError("rotation axis is zero");
    const Vec3 a = axis / n;
    const double c = std::cos(rad), s = std::sin(rad);
    Mat3 m = c * Mat3::Identity() + s * skew(a) +
             (1.0 - c) * (a * a.transpose());
    return trusted(project_if_needed(m));
  }

  const Mat3& matrix() const { return m_; }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  Rotation transposed() const { return trusted(m_.transpose()); }

  /// Rotation angle in [0, pi] (used for progress checks, not control math).
  double angle_to(const Rotation& other) const {
    const double tr = (m_.transpose() * other.m_).trace();
    return std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
  }

  static Mat3 skew(const Vec3& v) {
    Mat3 s;
    s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return s;
  }

  /// Internal: wraps a matrix already known to satisfy the invariant.
  static Rotation trusted(const Mat3& m) {
    Rotation r;
    r.m_ = m;
    return r;
  }

 private:
  static Mat3 project_if_needed(const Mat3& m) {
    return orthonormality_error(m) > kReorthThreshold ? project_to_rotation(m)
                                                      : m;
  }

  Mat3 m_;
};

// ---------------------------------------------------------------------------
// Pose
// ---------------------------------------------------------------------------

/// Rigid transform between two named frames. Maps coordinates expressed in
/// from_frame into to_frame: x_to = R * x_from + t.
class Pose {
 public:
  Pose() = default;
  Pose(Rotation rotation, Vec3 translation, std::string from_frame,
       std::string to_frame)
      : rotation_(std::move(rotation)),
        translation_(std::move(translation)),
        from_(std::move(from_frame)),
        to_(std::move(to_frame)) {
    if (from_.empty() || to_.empty())
      throw ConfigError("pose frame ids must be non-empty");
  }

  static Pose identity(const std::string& from, const std::string& to) {
    return Pose(Rotation::identity(), Vec3::Zero(), from, to);
  }

  const Rotation& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  const std::string& from_frame() const { return from_; }
  const std::string& to_frame() const { return to_; }

  /// Point transform: from_frame coordinates -> to_frame coordinates.
  Vec3 apply(const Vec3& p_from) const {
    return rotation_.matrix() * p_from + translation_;
  }

  void set_rotation(const Rotation& r) { rotation_ = r; }
  void set_translation(const Vec3& t) { translation_ = t; }

 private:
  Rotation rotation_;
  Vec3 translation_ = Vec3::Zero();
  std::string from_ = "a";
  std::string to_ = "b";
};

// ---------------------------------------------------------------------------
// Wrench
// ---------------------------------------------------------------------------

/// 6-D force/torque acting at the origin of a named frame, expressed in that
/// frame. Serialized ordering is always [force; torque].
struct Wrench {
  Vec3 force = Vec3::Zero();    // N
  Vec3 torque = Vec3::Zero();   // N*m
  std::string frame = "tcp";

  Wrench() = default;
  Wrench(Vec3 f, Vec3 tau, std::string frame_id)
      : force(std::move(f)), torque(std::move(tau)), frame(std::move(frame_id)) {}

  static Wrench zero(const std::string& frame_id) {
    return Wrench(Vec3::Zero(), Vec3::Zero(), frame_id);
  }
  static Wrench from_vector(const Vec6& v, const std::string& frame_id) {
    return Wrench(v.head<3>(), v.tail<3>(), frame_id);
  }

  Vec6 as_vector() const {
    Vec6 v;
    v << force, torque;
    return v;
  }
  bool finite() const {
    return force.allFinite() && torque.allFinite();
  }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Chains two transforms in pipeline order: the result maps a.from_frame
/// through a and then through b, landing in b.to_frame. Requires
/// a.to_frame == b.from_frame. Rotation is re-orthogonalized when drift
/// exceeds kReorthThreshold (matters for long 500 Hz chains).
inline Pose compose(const Pose& a, const Pose& b) {
  if (a.to_frame() != b.from_frame()) {
    throw FrameError("compose: frame chain broken ('" + a.to_frame() +
                     "' vs '" + b.from_frame() + "')");
  }
  Mat3 r = b.rotation().matrix() * a.rotation().matrix();
  if (orthonormality_error(r) > kReorthThreshold) r = project_to_rotation(r);
  const Vec3 t = b.rotation().matrix() * a.translation() + b.translation();
  return Pose(Rotation::trusted(r), t, a.from_frame(), b.to_frame());
}

inline Pose invert(const Pose& p) {
  const Mat3 rt = p.rotation().matrix().transpose();
  return Pose(Rotation::trusted(rt), -(rt * p.translation()), p.to_frame(),
              p.from_frame());
}

/// Re-expresses a wrench measured at the origin of sensor_in_target.from_frame
/// as the equivalent wrench at the origin of to_frame:
///   f' = R f,  tau' = R tau + p x (R f).
/// Equivalent to Ad^T under the [force; torque] ordering.
inline Wrench transform_wrench(const Wrench& w, const Pose& sensor_in_target) {
  if (w.frame != sensor_in_target.from_frame()) {
    throw FrameError("transform_wrench: wrench in '" + w.frame +
                     "' but pose maps from '" + sensor_in_target.from_frame() +
                     "'");
  }
  const Mat3& r = sensor_in_target.rotation().matrix();
  const Vec3& p = sensor_in_target.translation();
  const Vec3 f = r * w.force;
  return Wrench(f, r * w.torque + p.cross(f), sensor_in_target.to_frame());
}

/// 6-D rotation encoding: the top two rows of the matrix, row-major.
inline Vec6 encode_rot6d(const Rotation& r) {
  const Mat3& m = r.matrix();
  Vec6 v;
  v << m(0, 0), m(0, 1), m(0, 2), m(1, 0), m(1, 1), m(1, 2);
  return v;
}

/// Gram-Schmidt decode of the two-row encoding. First row dominant; third row
/// is the cross product. Degenerate input (zero or parallel rows) is rejected.
inline Rotation decode_rot6d(const Vec6& v) {
  const Vec3 a = v.head<3>();
  const Vec3 b = v.tail<3>();
  const double na = a.norm();
  if (na <= kRot6dDegenerateTol)
    throw DecodeError("rot6d: first row has near-zero norm");
  const Vec3 r0 = a / na;
  const Vec3 proj = b - r0.dot(b) * r0;
  const double np = proj.norm();
  if (np <= kRot6dDegenerateTol)
    throw DecodeError("rot6d: rows are parallel or second row is zero");
  const Vec3 r1 = proj / np;
  const Vec3 r2 = r0.cross(r1);
  Mat3 m;
  m.row(0) = r0;
  m.row(1) = r1;
  m.row(2) = r2;
  return Rotation::from_matrix(m);
}

}  // namespace clasp
