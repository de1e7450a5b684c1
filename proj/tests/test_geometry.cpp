#include <catch2/catch_amalgamated.hpp>

#include "clasp/geometry.hpp"
#include "support.hpp"

using namespace clasp;
using test_support::adjoint_transform_wrench;
using test_support::point_force_transform_wrench;
using test_support::random_pose;
using test_support::random_rotation;
using test_support::random_wrench;

TEST_CASE("compose: identity and inverse", "[geometry]") {
  std::mt19937_64 rng(11);
  const Pose p = random_pose(rng, "a", "b");

  const Pose ip = compose(Pose::identity("x", "a"), p);
  REQUIRE((ip.rotation().matrix() - p.rotation().matrix()).norm() == 0.0);
  REQUIRE((ip.translation() - p.translation()).norm() == 0.0);

  const Pose round = compose(p, invert(p));
  REQUIRE(round.from_frame() == "a");
  REQUIRE(round.to_frame() == "a");
  REQUIRE((round.rotation().matrix() - Mat3::Identity()).norm() < 1e-12);
  REQUIRE(round.translation().norm() < 1e-12);
}

TEST_CASE("compose: pure translations add", "[geometry]") {
  const Pose t1(Rotation::identity(), Vec3(0, 0, 0.1), "a", "b");
  const Pose t2(Rotation::identity(), Vec3(0, 0.2, 0), "b", "c");
  const Pose c = compose(t1, t2);
  REQUIRE((c.translation() - Vec3(0, 0.2, 0.1)).norm() < 1e-15);
  REQUIRE(c.from_frame() == "a");
  REQUIRE(c.to_frame() == "c");
}

TEST_CASE("compose: frame mismatch rejected", "[geometry]") {
  const Pose a = Pose::identity("a", "b");
  const Pose c = Pose::identity("c", "d");
  REQUIRE_THROWS_AS(compose(a, c), FrameError);
}

TEST_CASE("invert: translation symmetry and composition oracle", "[geometry]") {
  const Pose t(Rotation::identity(), Vec3(1, -2, 3), "a", "b");
  REQUIRE((invert(t).translation() - Vec3(-1, 2, -3)).norm() == 0.0);

  const Pose p(Rotation::about_z(M_PI / 2), Vec3(0.1, 0.2, 0.3), "a", "b");
  const Pose id = compose(p, invert(p));
  REQUIRE((id.rotation().matrix() - Mat3::Identity()).norm() < 1e-12);
  REQUIRE(id.translation().norm() < 1e-12);
}

TEST_CASE("compose: long chains stay orthonormal", "[geometry]") {
  std::mt19937_64 rng(12);
  Pose acc = Pose::identity("f0", "f0");
  for (int i = 0; i < 20000; ++i) {
    Pose step(random_rotation(rng), Vec3::Zero(), "f0", "f0");
    acc = compose(acc, step);
  }
  REQUIRE(orthonormality_error(acc.rotation().matrix()) < 1e-9);
}

TEST_CASE("transform_wrench: identity and point-force example", "[geometry]") {
  const Wrench w(Vec3(1, 2, 3), Vec3(0.1, 0.2, 0.3), "s");
  const Wrench same = transform_wrench(w, Pose::identity("s", "t"));
  REQUIRE((same.force - w.force).norm() == 0.0);
  REQUIRE((same.torque - w.torque).norm() == 0.0);
  REQUIRE(same.frame == "t");

  // Pure 0.1 m y-offset: f = 10 N along z becomes a 1 N*m torque about x.
  const Pose offset(Rotation::identity(), Vec3(0, 0.1, 0), "s", "t");
  const Wrench f(Vec3(0, 0, 10), Vec3::Zero(), "s");
  const Wrench out = transform_wrench(f, offset);
  REQUIRE((out.force - Vec3(0, 0, 10)).norm() < 1e-15);
  REQUIRE((out.torque - Vec3(1, 0, 0)).norm() < 1e-15);
}

TEST_CASE("transform_wrench: linearity", "[geometry]") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    const Pose p = random_pose(rng, "s", "t");
    const Wrench w1 = random_wrench(rng, "s");
    const Wrench w2 = random_wrench(rng, "s");
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const double a = u(rng), b = u(rng);
    const Wrench combo(a * w1.force + b * w2.force,
                       a * w1.torque + b * w2.torque, "s");
    const Vec6 lhs = transform_wrench(combo, p).as_vector();
    const Vec6 rhs = a * transform_wrench(w1, p).as_vector() +
                     b * transform_wrench(w2, p).as_vector();
    REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("transform_wrench: chain consistency", "[geometry]") {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 200; ++i) {
    const Pose s_in_a = random_pose(rng, "s", "a");
    const Pose a_in_t = random_pose(rng, "a", "t");
    const Wrench w = random_wrench(rng, "s");
    const Vec6 chained =
        transform_wrench(transform_wrench(w, s_in_a), a_in_t).as_vector();
    const Vec6 direct =
        transform_wrench(w, compose(s_in_a, a_in_t)).as_vector();
    REQUIRE((chained - direct).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("transform_wrench: adjoint-transpose oracle", "[geometry]") {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 1000; ++i) {
    const Pose p = random_pose(rng, "s", "t");
    const Wrench w = random_wrench(rng, "s");
    const Vec6 direct = transform_wrench(w, p).as_vector();
    const Vec6 oracle = adjoint_transform_wrench(w.as_vector(), p);
    const Vec6 oracle2 = point_force_transform_wrench(w.as_vector(), p);
    REQUIRE((direct - oracle).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE((direct - oracle2).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("transform_wrench: round trip is identity", "[geometry]") {
  std::mt19937_64 rng(16);
  for (int i = 0; i < 200; ++i) {
    const Pose p = random_pose(rng, "s", "t");
    const Wrench w = random_wrench(rng, "s");
    const Wrench back = transform_wrench(transform_wrench(w, p), invert(p));
    REQUIRE((back.force - w.force).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((back.torque - w.torque).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(back.frame == "s");
  }
}

TEST_CASE("transform_wrench: frame mismatch rejected", "[geometry]") {
  const Wrench w(Vec3(1, 0, 0), Vec3::Zero(), "other");
  REQUIRE_THROWS_AS(transform_wrench(w, Pose::identity("s", "t")), FrameError);
}

TEST_CASE("rot6d: canonical encodings", "[geometry]") {
  Vec6 id;
  id << 1, 0, 0, 0, 1, 0;
  REQUIRE((encode_rot6d(Rotation::identity()) - id).norm() == 0.0);
  REQUIRE((decode_rot6d(id).matrix() - Mat3::Identity()).norm() < 1e-15);

  // Scaling of the rows is absorbed by normalization/projection.
  Vec6 scaled;
  scaled << 2, 0, 0, 0, 3, 0;
  REQUIRE((decode_rot6d(scaled).matrix() - Mat3::Identity()).norm() < 1e-15);

  // 90 degree z-rotation, row-major top-two-rows convention.
  Vec6 quarter;
  quarter << 0, -1, 0, 1, 0, 0;
  REQUIRE((encode_rot6d(Rotation::about_z(M_PI / 2)) - quarter).norm() < 1e-15);
}

TEST_CASE("rot6d: round trip on random rotations", "[geometry]") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    const Rotation r = random_rotation(rng);
    const Rotation back = decode_rot6d(encode_rot6d(r));
    REQUIRE((back.matrix() - r.matrix()).norm() < 1e-12);
    REQUIRE(orthonormality_error(back.matrix()) < 1e-12);
    REQUIRE(back.matrix().determinant() == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("rot6d: degenerate inputs rejected", "[geometry]") {
  Vec6 zero_first;
  zero_first << 0, 0, 0, 0, 1, 0;
  REQUIRE_THROWS_AS(decode_rot6d(zero_first), DecodeError);

  Vec6 parallel;
  parallel << 1, 0, 0, 2, 0, 0;
  REQUIRE_THROWS_AS(decode_rot6d(parallel), DecodeError);

  Vec6 tiny;
  tiny << 1e-9, 0, 0, 0, 1, 0;
  REQUIRE_THROWS_AS(decode_rot6d(tiny), DecodeError);
}

TEST_CASE("rotation: construction validates the invariant", "[geometry]") {
  Mat3 bad = Mat3::Identity();
  bad(0, 0) = 1.1;
  REQUIRE_THROWS_AS(Rotation::from_matrix(bad), ConfigError);

  Mat3 reflection = Mat3::Identity();
  reflection(2, 2) = -1.0;
  REQUIRE_THROWS_AS(Rotation::from_matrix(reflection), ConfigError);
}
