#pragma once

// Shared test helpers: deterministic random generators for rotations, poses,
// and wrenches, plus an independently-built twist-adjoint wrench oracle.

#include <Eigen/Geometry>

#include <random>

#include "clasp/geometry.hpp"

namespace test_support {

using clasp::Mat3;
using clasp::Pose;
using clasp::Rotation;
using clasp::Vec3;
using clasp::Vec6;
using clasp::Wrench;

inline Vec3 random_vec3(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Vec3(u(rng), u(rng), u(rng));
}

/// Uniform random rotation from a normalized 4-gaussian quaternion.
inline Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return Rotation::from_matrix(q.toRotationMatrix());
}

inline Pose random_pose(std::mt19937_64& rng, const std::string& from,
                        const std::string& to, double translation_scale = 0.5) {
  return Pose(random_rotation(rng), random_vec3(rng, translation_scale), from,
              to);
}

inline Wrench random_wrench(std::mt19937_64& rng, const std::string& frame,
                            double force_scale = 20.0,
                            double torque_scale = 1.0) {
  return Wrench(random_vec3(rng, force_scale), random_vec3(rng, torque_scale),
                frame);
}

/// 6x6 twist adjoint [[R, p^ R], [0, R]] for [linear; angular] ordering.
/// Built from scratch here so the wrench-transform tests have a second,
/// independent route: W_target = Ad(target -> sensor)^T W_sensor.
inline Eigen::Matrix<double, 6, 6> twist_adjoint(const Pose& p) {
  Eigen::Matrix<double, 6, 6> ad = Eigen::Matrix<double, 6, 6>::Zero();
  const Mat3& r = p.rotation().matrix();
  const Vec3& t = p.translation();
  Mat3 skew;
  skew << 0, -t.z(), t.y(), t.z(), 0, -t.x(), -t.y(), t.x(), 0;
  ad.block<3, 3>(0, 0) = r;
  ad.block<3, 3>(0, 3) = skew * r;
  ad.block<3, 3>(3, 3) = r;
  return ad;
}

/// Oracle wrench transform via the adjoint-transpose route.
inline Vec6 adjoint_transform_wrench(const Vec6& w, const Pose& sensor_in_target) {
  return twist_adjoint(clasp::invert(sensor_in_target)).transpose() * w;
}

/// Oracle via the point-force-equivalence route: the wrench is a force f
/// acting at the sensor origin plus a couple tau; re-express both at the
/// target origin using only cross products.
inline Vec6 point_force_transform_wrench(const Vec6& w,
                                         const Pose& sensor_in_target) {
  const Vec3 f = w.head<3>();
  const Vec3 tau = w.tail<3>();
  const Vec3 point = sensor_in_target.apply(Vec3::Zero());
  const Vec3 f_t = sensor_in_target.rotation().matrix() * f;
  const Vec3 tau_t = sensor_in_target.rotation().matrix() * tau;
  Vec6 out;
  out.head<3>() = f_t;
  out.tail<3>() = point.cross(f_t) + tau_t;
  return out;
}

}  // namespace test_support
