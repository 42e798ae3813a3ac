#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <doctest.h>

#include "dpface/dpsim.hpp"
#include "dpface/metrics.hpp"
#include "dpface/photostereo.hpp"
#include "dpface/pipeline.hpp"
#include "support.hpp"

using namespace dpface;
using namespace dpface::photostereo;
using Eigen::Vector3d;

TEST_CASE("chrome ball: center highlight gives the axial light")
{
    const ChromeBall ball{50.0, 40.0, 20.0};
    const Vector3d L = light_from_highlight(ball, 50.0, 40.0);
    CHECK((L - Vector3d(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("chrome ball: 45-degree normal reflects to a grazing light")
{
    const ChromeBall ball{50.0, 40.0, 20.0};
    const Vector3d L = light_from_highlight(ball, 50.0 + 20.0 / std::sqrt(2.0), 40.0);
    CHECK((L - Vector3d(1, 0, 0)).norm() < 1e-9);
}

TEST_CASE("chrome ball: reflection law holds for random highlights")
{
    const ChromeBall ball{0.0, 0.0, 10.0};
    for (int k = 0; k < 50; ++k) {
        const double a = 0.37 * k, rad = 9.9 * std::sqrt((k + 0.5) / 50.0);
        const double hx = rad * std::cos(a), hy = rad * std::sin(a);
        const Vector3d n(hx / 10.0, hy / 10.0, std::sqrt(1.0 - (hx * hx + hy * hy) / 100.0));
        const Vector3d L = light_from_highlight(ball, hx, hy);
        // Incident and reflected directions make equal angles with n and are coplanar with it.
        CHECK(L.norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(L.dot(n) == doctest::Approx(n.z()).epsilon(1e-12));
        CHECK(std::abs(L.cross(Vector3d(0, 0, 1)).dot(n)) < 1e-12);
    }
    CHECK_CODE(light_from_highlight(ball, 10.5, 0.0), ErrorCode::OutOfBall);
}

TEST_CASE("solve_normals: four-light plane example with shadowed rows")
{
    const double s = 1.0 / std::sqrt(3.0);
    LightSet lights{{Vector3d(0, 0, 1), Vector3d(1, 0, 0), Vector3d(0, 1, 0), Vector3d(s, s, s)}};
    std::vector<ImageF> images;
    for (const double v : {1.0, 0.0, 0.0, s})
        images.push_back(ImageF::filled(2, 2, v));
    const auto res = solve_normals(images, lights);
    for (std::size_t i = 0; i < 4; ++i) {
        REQUIRE(res.normals.valid(i));
        CHECK((res.normals.normal(i) - Vector3d(0, 0, 1)).norm() < 1e-9);
        CHECK(std::abs(res.albedo.data()[i] - 1.0) < 1e-9);
    }
}

TEST_CASE("solve_normals: everything shadowed is masked")
{
    LightSet lights = pipeline::random_lights(5, 3);
    const std::vector<ImageF> dark(5, ImageF::filled(3, 3, 0.01));
    CHECK(solve_normals(dark, lights).normals.valid_count() == 0);
}

TEST_CASE("solve_normals: degenerate light sets")
{
    const LightSet coplanar{{Vector3d(1, 0, 0), Vector3d(0, 1, 0), Vector3d(std::sqrt(0.5), std::sqrt(0.5), 0)}};
    const std::vector<ImageF> imgs(3, ImageF::filled(2, 2, 0.5));
    CHECK_CODE(solve_normals(imgs, coplanar), ErrorCode::DegenerateLights);
    const LightSet two{{Vector3d(1, 0, 0), Vector3d(0, 0, 1)}};
    CHECK_CODE(solve_normals(std::span(imgs).first(2), two), ErrorCode::DegenerateLights);
    CHECK_CODE(solve_normals(std::span(imgs).first(2), pipeline::random_lights(3, 1)), ErrorCode::ShapeError);
}

TEST_CASE("solve_normals: Lambertian sphere round trip with 10 random lights")
{
    dpsim::SceneParams p;
    const auto scene = dpsim::make_test_scene(dpsim::SceneKind::Sphere, p);
    const auto lights = pipeline::random_lights(10, 42);
    const auto albedo = ImageF::filled(p.width, p.height, 0.8);
    const auto images = render_lambertian(scene.normals, albedo, lights);
    const auto res = solve_normals(images, lights);
    // Compare only where the solver produced a normal and the truth is valid.
    std::vector<std::uint8_t> m(scene.normals.pixel_count(), 0);
    for (std::size_t i = 0; i < m.size(); ++i)
        m[i] = scene.normals.valid(i) && res.normals.valid(i);
    std::size_t compared = 0;
    double sum_deg = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m[i])
            continue;
        const double c = std::clamp(res.normals.normal(i).dot(scene.normals.normal(i)), -1.0, 1.0);
        sum_deg += std::acos(c) * 180.0 / std::numbers::pi;
        ++compared;
    }
    CHECK(compared >= scene.normals.valid_count() * 95 / 100);
    CHECK(sum_deg / double(compared) < 0.5);
}

TEST_CASE("solve_normals: intensity scaling leaves normals, scales albedo")
{
    const auto lights = pipeline::random_lights(6, 8);
    dpsim::SceneParams p;
    p.width = p.height = 32;
    p.cx = p.cy = 15.5;
    p.fx = p.fy = 150.0;
    const auto scene = dpsim::make_test_scene(dpsim::SceneKind::Sphere, p);
    const auto images = render_lambertian(scene.normals, ImageF::filled(32, 32, 0.5), lights);
    std::vector<ImageF> scaled;
    for (const auto& img : images) {
        std::vector<double> v(img.data().begin(), img.data().end());
        for (auto& s : v)
            s *= 1.5;
        scaled.emplace_back(32, 32, v);
    }
    SolveOptions opt;
    opt.shadow_threshold = 0.0;
    const auto a = solve_normals(images, lights, opt);
    const auto b = solve_normals(scaled, lights, opt);
    for (std::size_t i = 0; i < a.normals.pixel_count(); ++i) {
        if (!a.normals.valid(i) || !b.normals.valid(i))
            continue;
        CHECK((a.normals.normal(i) - b.normals.normal(i)).norm() < 1e-9);
        CHECK(b.albedo.data()[i] == doctest::Approx(1.5 * a.albedo.data()[i]).epsilon(1e-9));
    }
}

TEST_CASE("photometric and camera frames differ by a flip of x and y")
{
    const Vector3d n(0.2, -0.3, 0.9);
    CHECK(to_camera_normal(n) == Vector3d(-0.2, 0.3, 0.9));
    CHECK(to_photometric_normal(to_camera_normal(n)) == n);
}
