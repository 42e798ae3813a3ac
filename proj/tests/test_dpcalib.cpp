#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <doctest.h>

#include "dpface/dpcalib.hpp"
#include "support.hpp"

using namespace dpface;
using namespace dpface::dpcalib;

namespace {

std::vector<CalibSample> line_samples(double A, double B, int n, double z_near, double z_far)
{
    std::vector<CalibSample> s;
    for (int k = 0; k < n; ++k) {
        const double inv = 1.0 / z_far + (1.0 / z_near - 1.0 / z_far) * k / (n - 1);
        s.push_back({inv, A + B * inv, 1.0});
    }
    return s;
}

// Weighted least squares via the normal equations, independent of the library.
std::pair<double, double> oracle_fit(const std::vector<CalibSample>& s)
{
    Eigen::Matrix2d M = Eigen::Matrix2d::Zero();
    Eigen::Vector2d r = Eigen::Vector2d::Zero();
    for (const auto& c : s) {
        const Eigen::Vector2d a(1.0, c.inv_depth);
        M += c.weight * a * a.transpose();
        r += c.weight * a * c.disparity;
    }
    const Eigen::Vector2d x = M.fullPivLu().solve(r);
    return {x(0), x(1)};
}

} // namespace

TEST_CASE("fit_affine: noiseless line recovered")
{
    const auto truth = DpCalibration::from_optics(dpsim::OpticsConfig{});
    const auto samples = line_samples(truth.A, truth.B, 20, 0.8, 1.1);
    const auto fit = fit_affine(samples, 0.135, 5.6, 5.36e-6);
    CHECK(test::rel_err(fit.calibration.A, truth.A) < 1e-9);
    CHECK(test::rel_err(fit.calibration.B, truth.B) < 1e-9);
    CHECK(test::rel_err(fit.calibration.g, 0.97) < 1e-9);
    CHECK(test::rel_err(fit.calibration.alpha, 1.0) < 1e-9);
    CHECK(fit.residual_rms < 1e-9);
}

TEST_CASE("fit_affine: two samples give the exact line")
{
    const std::vector<CalibSample> s{{1.0, 3.0, 1.0}, {1.25, 1.0, 1.0}};
    const auto fit = fit_affine(s, 0.135, 5.6, 5.36e-6);
    // slope = (1 - 3) / 0.25 = -8, bias = 3 + 8 = 11
    CHECK(fit.calibration.B == doctest::Approx(-8.0).epsilon(1e-12));
    CHECK(fit.calibration.A == doctest::Approx(11.0).epsilon(1e-12));
    CHECK(fit.calibration.g == doctest::Approx(8.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("fit_affine: weighted noisy fit matches the normal-equation oracle")
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::uniform_real_distribution<double> w(0.2, 2.0);
    const auto truth = DpCalibration::from_optics(dpsim::OpticsConfig{});
    auto s = line_samples(truth.A, truth.B, 30, 0.8, 1.1);
    for (auto& c : s) {
        c.disparity += noise(rng);
        c.weight = w(rng);
    }
    const auto [A, B] = oracle_fit(s);
    const auto fit = fit_affine(s, 0.135, 5.6, 5.36e-6);
    CHECK(test::rel_err(fit.calibration.A, A) < 1e-9);
    CHECK(test::rel_err(fit.calibration.B, B) < 1e-9);
    double num = 0.0, den = 0.0;
    for (const auto& c : s) {
        const double r = c.disparity - (A + B * c.inv_depth);
        num += c.weight * r * r;
        den += c.weight;
    }
    CHECK(test::rel_err(fit.residual_rms, std::sqrt(num / den)) < 1e-6);
}

TEST_CASE("fit_affine: degenerate designs and inconsistent optics")
{
    const std::vector<CalibSample> same{{1.0, 2.0, 1.0}, {1.0, 3.0, 1.0}, {1.0, 2.5, 1.0}};
    CHECK_CODE(fit_affine(same, 0.135, 5.6, 5.36e-6), ErrorCode::DegenerateFit);
    const std::vector<CalibSample> one{{1.0, 2.0, 1.0}};
    CHECK_CODE(fit_affine(one, 0.135, 5.6, 5.36e-6), ErrorCode::DegenerateFit);
    // g = -B / A = 0.1 < f
    const auto near_focus = line_samples(10.0, -1.0, 5, 0.8, 1.1);
    CHECK_CODE(fit_affine(near_focus, 0.135, 5.6, 5.36e-6), ErrorCode::InconsistentOptics);
}

TEST_CASE("disparity_to_depth: definition, singular pole and round trip")
{
    const auto calib = DpCalibration::from_optics(dpsim::OpticsConfig{});
    const double d1 = calib.A + calib.B / 1.0;
    const DisparityMap d(3, 1, {d1, calib.A, calib.A + calib.B / 0.85});
    const auto conv = disparity_to_depth(d, calib);
    CHECK(conv.depth.value(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(!conv.depth.valid(1));
    CHECK(conv.masked_singular == 1);
    const DisparityMap back = depth_to_disparity(conv.depth, calib);
    CHECK(test::rel_err(back.value(2), d.value(2)) < 1e-12);
    CHECK(!back.valid(1));
}

TEST_CASE("disparity_to_depth: negative depth is masked")
{
    const auto calib = DpCalibration::from_optics(dpsim::OpticsConfig{});
    // Z = B / (d - A) < 0 when d - A has the sign of -B.
    const DisparityMap d(1, 1, {calib.A + 1.0});
    const auto conv = disparity_to_depth(d, calib);
    CHECK(conv.depth.valid_count() == 0);
    CHECK(conv.masked_nonpositive == 1);
}

TEST_CASE("calibration validation")
{
    auto calib = DpCalibration::from_optics(dpsim::OpticsConfig{});
    CHECK_NOTHROW(calib.validate());
    calib.g *= 1.01;
    CHECK_CODE(calib.validate(), ErrorCode::DomainError);
    calib = DpCalibration::from_optics(dpsim::OpticsConfig{});
    calib.B = 0.0;
    CHECK_CODE(calib.validate(), ErrorCode::DomainError);
}

namespace {

ImageF saddle_image(double x0, double y0, double noise_sigma, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const int w = 21, h = 21;
    std::vector<double> v(std::size_t(w * h));
    // Range of (x - x0)(y - y0) over the 7×7 window is about 2·3.5² ≈ 25.
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            v[std::size_t(y * w + x)] = (x - x0) * (y - y0) + noise_sigma * noise(rng);
    return ImageF(w, h, v);
}

} // namespace

TEST_CASE("refine_saddle: exact quadratic saddle")
{
    const auto [x, y] = refine_saddle(saddle_image(10.3, 9.8, 0.0, 0), {10.0, 10.0}, 7);
    CHECK(std::abs(x - 10.3) < 1e-6);
    CHECK(std::abs(y - 9.8) < 1e-6);
}

TEST_CASE("refine_saddle: noise at 1% of the window range stays within 0.1 px")
{
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto [x, y] = refine_saddle(saddle_image(10.3, 9.8, 0.25, seed), {10.0, 10.0}, 7);
        worst = std::max(worst, std::hypot(x - 10.3, y - 9.8));
    }
    CHECK(worst < 0.1);
}

TEST_CASE("refine_saddle: paraboloid, divergence and window checks")
{
    std::vector<double> v(21 * 21);
    for (int y = 0; y < 21; ++y)
        for (int x = 0; x < 21; ++x)
            v[std::size_t(y * 21 + x)] = (x - 10.0) * (x - 10.0) + (y - 10.0) * (y - 10.0);
    CHECK_CODE(refine_saddle(ImageF(21, 21, v), {10.0, 10.0}, 7), ErrorCode::NotASaddle);
    CHECK_CODE(refine_saddle(saddle_image(17.0, 10.0, 0.0, 0), {8.0, 10.0}, 5), ErrorCode::Diverged);
    CHECK_CODE(refine_saddle(saddle_image(10.0, 10.0, 0.0, 0), {10.0, 10.0}, 4), ErrorCode::DomainError);
}
