#include "irmesh/camera.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <random>

using namespace irmesh;

namespace {

View make_basic_view() {
    View view;
    view.intrinsics = {500.0, 500.0, 320.0, 240.0, 640, 480};
    view.image = ShadingImage::zeros(640, 480);
    return view;
}

Mat3 rotation_zyx(double a, double b, double c) {
    return (Eigen::AngleAxisd(a, Vec3::UnitZ()) * Eigen::AngleAxisd(b, Vec3::UnitY()) *
            Eigen::AngleAxisd(c, Vec3::UnitX()))
        .toRotationMatrix();
}

}  // namespace

TEST_CASE("projection of axis and off-axis points") {
    const View view = make_basic_view();

    auto p = project_vertex(Vec3(0, 0, 1000), view);
    CHECK(p.pixel.x() == doctest::Approx(320.0).epsilon(1e-12));
    CHECK(p.pixel.y() == doctest::Approx(240.0).epsilon(1e-12));
    CHECK(p.distance == doctest::Approx(1000.0).epsilon(1e-12));
    CHECK(p.z == doctest::Approx(1000.0).epsilon(1e-12));

    p = project_vertex(Vec3(100, 0, 1000), view);
    CHECK(p.pixel.x() == doctest::Approx(370.0).epsilon(1e-12));
    CHECK(p.pixel.y() == doctest::Approx(240.0).epsilon(1e-12));
    CHECK(p.distance == doctest::Approx(std::sqrt(100.0 * 100.0 + 1000.0 * 1000.0)).epsilon(1e-12));
}

TEST_CASE("projection matches a 3x4 matrix oracle under random poses") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> angle(-1.5, 1.5);
    std::uniform_real_distribution<double> shift(-200.0, 200.0);

    View view = make_basic_view();
    for (int trial = 0; trial < 50; ++trial) {
        view.pose.rotation = rotation_zyx(angle(rng), angle(rng), angle(rng));
        view.pose.translation = Vec3(shift(rng), shift(rng), shift(rng));
        const Vec3 x(shift(rng), shift(rng), 800.0 + shift(rng));

        // oracle: u ~ K [R|t] x with explicit homogeneous division
        Eigen::Matrix<double, 3, 4> rt;
        rt.leftCols<3>() = view.pose.rotation;
        rt.col(3) = view.pose.translation;
        Mat3 k = Mat3::Identity();
        k(0, 0) = view.intrinsics.fx;
        k(1, 1) = view.intrinsics.fy;
        k(0, 2) = view.intrinsics.cx;
        k(1, 2) = view.intrinsics.cy;
        const Vec3 h = k * (rt * x.homogeneous());
        if (h.z() <= 0.0) continue;

        const auto p = project_vertex(x, view);
        CHECK(p.pixel.x() == doctest::Approx(h.x() / h.z()).epsilon(1e-9));
        CHECK(p.pixel.y() == doctest::Approx(h.y() / h.z()).epsilon(1e-9));
        CHECK(p.z == doctest::Approx(h.z()).epsilon(1e-9));
    }
}

TEST_CASE("points behind the camera are rejected") {
    const View view = make_basic_view();
    CHECK_THROWS_AS(project_vertex(Vec3(0, 0, -5), view), std::domain_error);
    CHECK_THROWS_AS(project_vertex(Vec3(1, 1, 0), view), std::domain_error);
    CHECK(!try_project(Vec3(0, 0, -5), view).has_value());
    CHECK(try_project(Vec3(0, 0, 5), view).has_value());
}

TEST_CASE("projection / back-projection round trip") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> angle(-1.0, 1.0);
    std::uniform_real_distribution<double> shift(-100.0, 100.0);

    View view = make_basic_view();
    for (int trial = 0; trial < 50; ++trial) {
        view.pose.rotation = rotation_zyx(angle(rng), angle(rng), angle(rng));
        view.pose.translation = Vec3(shift(rng), shift(rng), shift(rng));
        const Vec3 x_cam(shift(rng) * 0.5, shift(rng) * 0.5, 900.0 + shift(rng));
        const Vec3 x = view.pose.to_world(x_cam);

        const auto p = project_vertex(x, view);
        const Vec3 back = backproject_distance(p.pixel, p.distance, view);
        CHECK((back - x).norm() < 1e-6);
    }
}

TEST_CASE("planar-z back-projection inverts the pinhole equations") {
    const CameraIntrinsics intr{500.0, 450.0, 320.0, 240.0, 640, 480};
    CHECK((backproject_planar_z(Vec2(320, 240), 1000.0, intr) - Vec3(0, 0, 1000)).norm() < 1e-12);
    const Vec3 p = backproject_planar_z(Vec2(370, 150), 800.0, intr);
    CHECK(p.x() == doctest::Approx((370.0 - 320.0) / 500.0 * 800.0).epsilon(1e-12));
    CHECK(p.y() == doctest::Approx((150.0 - 240.0) / 450.0 * 800.0).epsilon(1e-12));
    CHECK(p.z() == doctest::Approx(800.0).epsilon(1e-12));
}

TEST_CASE("pose validation rejects non-rotations") {
    CameraPose pose;
    CHECK_NOTHROW(pose.validate());

    pose.rotation(0, 0) = 1.0 + 1e-6;
    CHECK_THROWS_AS(pose.validate(), std::invalid_argument);

    pose.rotation = Mat3::Identity();
    pose.rotation(2, 2) = -1.0;  // reflection, det = -1
    CHECK_THROWS_AS(pose.validate(), std::invalid_argument);
}

TEST_CASE("intrinsics validation enforces positive focals and interior principal point") {
    CameraIntrinsics intr{500.0, 500.0, 320.0, 240.0, 640, 480};
    CHECK_NOTHROW(intr.validate());
    intr.fx = 0.0;
    CHECK_THROWS_AS(intr.validate(), std::invalid_argument);
    intr.fx = 500.0;
    intr.cx = 640.0;
    CHECK_THROWS_AS(intr.validate(), std::invalid_argument);
}

TEST_CASE("view validation requires matching image resolution") {
    View view = make_basic_view();
    CHECK_NOTHROW(view.validate());
    view.image = ShadingImage::zeros(320, 240);
    CHECK_THROWS_AS(view.validate(), std::invalid_argument);
}

TEST_CASE("camera_center inverts the world-to-camera transform") {
    CameraPose pose;
    pose.translation = Vec3(1, 2, 3);
    CHECK((pose.camera_center() - Vec3(-1, -2, -3)).norm() < 1e-12);

    pose.rotation = rotation_zyx(0.3, -0.2, 0.9);
    pose.translation = Vec3(-4, 7, 2);
    CHECK((pose.to_camera(pose.camera_center())).norm() < 1e-12);
}

TEST_CASE("look_at points the optical axis at the target") {
    const Vec3 eye(100, 50, -200);
    const Vec3 target(0, 0, 600);
    const CameraPose pose = look_at(eye, target);
    CHECK_NOTHROW(pose.validate());
    CHECK((pose.camera_center() - eye).norm() < 1e-9);

    // target lands on the optical axis (+z), at the eye-target distance
    const Vec3 t_cam = pose.to_camera(target);
    CHECK(t_cam.x() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(t_cam.y() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(t_cam.z() == doctest::Approx((target - eye).norm()).epsilon(1e-9));

    CHECK_THROWS_AS(look_at(eye, eye), std::invalid_argument);
    CHECK_THROWS_AS(look_at(Vec3(0, 0, 0), Vec3(0, 5, 0)), std::invalid_argument);
}
