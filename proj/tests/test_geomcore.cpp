#include <cmath>

#include <Eigen/LU>
#include <doctest.h>

#include "dpface/camera.hpp"
#include "dpface/geometry.hpp"
#include "dpface/image.hpp"
#include "support.hpp"

using namespace dpface;
using Eigen::Vector3d;

namespace {

PinholeCamera test_camera() { return PinholeCamera(100.0, 100.0, 1.5, 1.5); }

} // namespace

TEST_CASE("back_project: principal point lands on the optical axis")
{
    const PinholeCamera cam(500.0, 500.0, 2.0, 1.0);
    std::vector<double> z(4 * 3, 1.0);
    const auto cloud = back_project(DepthMap(4, 3, z), cam);
    REQUIRE(cloud.size() == 12);
    const auto& p = cloud.points()[1 * 4 + 2];
    CHECK(p.x() == 0.0);
    CHECK(p.y() == 0.0);
    CHECK(p.z() == 1.0);
}

TEST_CASE("back_project: one point per valid pixel")
{
    CHECK(back_project(DepthMap(2, 2, {1.0, 1.0, 1.0, 1.0}), test_camera()).size() == 4);
    CHECK(back_project(DepthMap(2, 2, {1.0, 0.0, 1.0, 1.0}, {1, 0, 1, 1}), test_camera()).size() == 3);
}

TEST_CASE("back_project: hand-evaluated pinhole point")
{
    // Pixel (cx + fx, cy) at z = 2: X = (u - cx) / fx * z = 2.
    const double fx = 4.0, cx = 1.0, cy = 0.0;
    const PinholeCamera cam(fx, fx, cx, cy);
    std::vector<double> z(6, 1.0);
    z[5] = 2.0; // (x = 5, y = 0)
    const auto cloud = back_project(DepthMap(6, 1, z), cam);
    const Vector3d p = cloud.points()[5];
    CHECK(p.x() == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(p.y() == 0.0);
    CHECK(p.z() == 2.0);
}

TEST_CASE("back_project: empty mask is an error")
{
    CHECK_CODE(back_project(DepthMap(2, 1, {0.0, 0.0}, {0, 0}), test_camera()), ErrorCode::EmptyInput);
}

TEST_CASE("back_project: posed camera returns world points")
{
    const RigidTransform pose = look_at(Vector3d(0.3, -0.1, 0.0), Vector3d(0.0, 0.0, 1.0));
    const PinholeCamera cam(100.0, 100.0, 1.5, 1.5, pose);
    const auto cloud = back_project(DepthMap(4, 4, std::vector<double>(16, 0.8)), cam);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vector3d c = cam.to_camera(cloud.points()[i]);
        CHECK(c.z() == doctest::Approx(0.8).epsilon(1e-12));
        const auto px = cam.pixel(c);
        CHECK(px.x() == doctest::Approx(double(i % 4)).epsilon(1e-9));
        CHECK(px.y() == doctest::Approx(double(i / 4)).epsilon(1e-9));
    }
}

TEST_CASE("project: round trip of a full depth map is bit-identical")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> z(0.5, 3.0);
    std::vector<double> values(16 * 12);
    for (auto& v : values)
        v = z(rng);
    const PinholeCamera cam(300.0, 310.0, 7.5, 5.5);
    const DepthMap depth(16, 12, values);
    const DepthMap back = project(back_project(depth, cam), cam, 16, 12);
    REQUIRE(back.valid_count() == depth.pixel_count());
    for (std::size_t i = 0; i < values.size(); ++i)
        CHECK(back.value(i) == values[i]);
}

TEST_CASE("project: z-buffer keeps the nearest point")
{
    const auto cam = test_camera();
    const PointCloud cloud({Vector3d(0, 0, 2.0), Vector3d(0, 0, 1.0)});
    const DepthMap out = project(cloud, cam, 4, 4);
    // (0, 0, z) projects to (cx, cy) = (1.5, 1.5), which rounds to (2, 2).
    CHECK(out.valid(2, 2));
    CHECK(out.value(2, 2) == 1.0);
    CHECK(out.valid_count() == 1);
}

TEST_CASE("project: points behind the camera are skipped")
{
    const DepthMap out = project(PointCloud({Vector3d(0, 0, -1.0)}), test_camera(), 4, 4);
    CHECK(out.valid_count() == 0);
}

TEST_CASE("look_at: orthonormal rotation, eye at the origin of the camera frame")
{
    const Vector3d eye(0.2, 0.1, -0.3), target(0.0, 0.0, 1.0);
    const RigidTransform pose = look_at(eye, target);
    CHECK((pose.rotation * pose.rotation.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK(pose.rotation.determinant() == doctest::Approx(1.0));
    CHECK(pose.apply(eye).norm() < 1e-12);
    const Vector3d t = pose.apply(target);
    CHECK(std::abs(t.x()) < 1e-12);
    CHECK(std::abs(t.y()) < 1e-12);
    CHECK(t.z() == doctest::Approx((target - eye).norm()));
}

TEST_CASE("containers validate invariants")
{
    CHECK_CODE(DepthMap(2, 2, {1.0, 1.0, 1.0}), ErrorCode::ShapeError);
    CHECK_CODE(DepthMap(1, 1, {-1.0}), ErrorCode::DomainError);
    CHECK_CODE(DisparityMap(1, 1, {std::nan("")}), ErrorCode::DomainError);
    CHECK_CODE(NormalMap(1, 1, {0.0, 0.0, 2.0}, {1}), ErrorCode::DomainError);
    CHECK_CODE(PinholeCamera(0.0, 1.0, 0.0, 0.0), ErrorCode::DomainError);
}
