#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <doctest.h>

#include "dpface/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dpface;
using namespace dpface::metrics;

namespace {

using test::affine_objective;
using test::aiwe_grid;

DepthMap depth(std::vector<double> z) { return DepthMap(int(z.size()), 1, z); }
DisparityMap disp(std::vector<double> d) { return DisparityMap(int(d.size()), 1, d); }

NormalMap normals(const std::vector<Eigen::Vector3d>& n)
{
    std::vector<double> v;
    for (const auto& x : n)
        v.insert(v.end(), {x.x(), x.y(), x.z()});
    return NormalMap(int(n.size()), 1, v, Mask(n.size(), 1));
}

} // namespace

TEST_CASE("aiwe: exact affine relation gives zero")
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-5.0, 5.0), z(0.5, 3.0);
    std::vector<double> gt(50);
    for (auto& g : gt)
        g = z(rng);
    for (int trial = 0; trial < 100; ++trial) {
        double a = u(rng);
        if (std::abs(a) < 1e-3)
            a = 1.0;
        const double b = u(rng);
        std::vector<double> pred;
        for (const double g : gt)
            pred.push_back(a * g + b);
        CHECK(aiwe(disp(pred), disp(gt), 1) < 1e-6);
        CHECK(aiwe(disp(pred), disp(gt), 2) < 1e-6);
    }
    CHECK(aiwe(disp(gt), disp(gt), 1) == doctest::Approx(0.0));
}

TEST_CASE("aiwe(2): three-pixel case agrees with least squares and the grid")
{
    const std::vector<double> gt{1, 2, 3}, pred{1, 2, 4};
    Eigen::Matrix<double, 3, 2> A;
    A << 1, 1, 2, 1, 4, 1;
    const Eigen::Vector3d g(1, 2, 3);
    const Eigen::Vector2d x = A.colPivHouseholderQr().solve(g);
    const double closed = std::sqrt((A * x - g).squaredNorm() / 3.0);
    const auto fit = aiwe_fit(pred, gt, 2);
    CHECK(fit.value == doctest::Approx(closed).epsilon(1e-12));
    CHECK(fit.a == doctest::Approx(x(0)).epsilon(1e-12));
    CHECK(std::abs(fit.value - aiwe_grid(pred, gt, 2)) < 1e-6);
}

TEST_CASE("aiwe(1): agrees with the brute-force grid on small cases")
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 4.0);
    std::normal_distribution<double> noise(0.0, 0.3);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 3 + trial % 8;
        std::vector<double> pred(static_cast<std::size_t>(n)), gt(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            pred[std::size_t(i)] = u(rng);
            gt[std::size_t(i)] = 1.5 * pred[std::size_t(i)] - 0.7 + noise(rng);
        }
        const auto fit = aiwe_fit(pred, gt, 1);
        CHECK(std::abs(fit.value - aiwe_grid(pred, gt, 1)) < 1e-4);
        CHECK(std::abs(fit.value - affine_objective(pred, gt, fit.a, fit.b, 1)) < 1e-12);
    }
}

TEST_CASE("aiwe: constant prediction is flagged degenerate")
{
    const std::vector<double> pred{2, 2, 2, 2}, gt{1, 2, 4, 9};
    const auto f2 = aiwe_fit(pred, gt, 2);
    CHECK(f2.degenerate);
    CHECK(f2.a == 0.0);
    CHECK(f2.b == doctest::Approx(4.0));
    const auto f1 = aiwe_fit(pred, gt, 1);
    CHECK(f1.degenerate);
    CHECK(f1.b == doctest::Approx(3.0));
    CHECK(f1.value == doctest::Approx((2 + 1 + 1 + 6) / 4.0));
}

TEST_CASE("aiwe never exceeds the unaligned error")
{
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> p(30), g(30);
        for (std::size_t i = 0; i < 30; ++i)
            p[i] = u(rng), g[i] = u(rng);
        const auto r = evaluate_disparity(disp(p), disp(g));
        CHECK(r.at("wmae") <= r.at("mae") + 1e-12);
        CHECK(r.at("wrmse") <= r.at("rmse") + 1e-12);
    }
}

TEST_CASE("depth_metrics: identity, ratio threshold and hand arithmetic")
{
    const auto same = depth_metrics(depth({1.0, 2.0, 3.0}), depth({1.0, 2.0, 3.0}));
    for (const char* k : {"rmse", "absrel", "mae"})
        CHECK(same.at(k) == 0.0);
    for (const char* k : {"delta1", "delta2", "delta3"})
        CHECK(same.at(k) == 1.0);

    const auto scaled = depth_metrics(depth({1.005, 2.01}), depth({1.0, 2.0}), 1.01);
    CHECK(scaled.at("delta1") == 1.0);

    const auto two = depth_metrics(depth({1.1, 1.9}), depth({1.0, 2.0}));
    CHECK(std::abs(two.at("mae") - 0.1) < 1e-12);
    CHECK(std::abs(two.at("rmse") - 0.1) < 1e-12);
    CHECK(std::abs(two.at("absrel") - 0.075) < 1e-12);
    CHECK(two.pixel_count == 2);
}

TEST_CASE("depth_metrics: delta fractions are monotone")
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.9, 1.1);
    std::vector<double> g(200), p(200);
    for (std::size_t i = 0; i < 200; ++i)
        g[i] = 1.0 + 0.01 * double(i), p[i] = g[i] * u(rng);
    double prev1 = 0.0;
    for (const double tau : {1.005, 1.01, 1.02, 1.05}) {
        const auto r = depth_metrics(depth(p), depth(g), tau);
        CHECK(r.at("delta1") <= r.at("delta2"));
        CHECK(r.at("delta2") <= r.at("delta3"));
        CHECK(r.at("delta1") >= prev1);
        prev1 = r.at("delta1");
    }
    CHECK_CODE(depth_metrics(depth(p), depth(g), 1.0), ErrorCode::DomainError);
}

TEST_CASE("metrics use only co-valid pixels, in any order")
{
    const DepthMap pred(4, 1, {1.1, 5.0, 1.9, 7.0}, {1, 1, 1, 0});
    const DepthMap gt(4, 1, {1.0, 0.0, 2.0, 3.0}, {1, 0, 1, 1});
    const auto r = evaluate_depth(pred, gt);
    CHECK(r.pixel_count == 2);
    CHECK(std::abs(r.at("mae") - 0.1) < 1e-12);
    const auto swapped = evaluate_depth(depth({1.9, 1.1}), depth({2.0, 1.0}));
    for (const auto& [k, v] : r.values)
        CHECK(v == doctest::Approx(swapped.at(k)).epsilon(1e-12));
    const DepthMap none(2, 1, {1.0, 0.0}, {1, 0});
    const DepthMap other(2, 1, {0.0, 1.0}, {0, 1});
    CHECK_CODE(depth_metrics(none, other), ErrorCode::EmptyInput);
}

TEST_CASE("evaluate_depth reports exactly the eight depth keys")
{
    const auto r = evaluate_depth(depth({1.0, 1.5, 2.0}), depth({1.1, 1.4, 2.2}));
    const auto j = r.to_json();
    CHECK(j.size() == 8);
    for (const char* k : {"wmae", "wrmse", "rmse", "absrel", "mae", "delta1", "delta2", "delta3"})
        CHECK(j.contains(k));
}

TEST_CASE("normal_metrics: identity, constant rotation, hand arithmetic")
{
    const Eigen::Vector3d z(0, 0, 1);
    const auto same = normal_metrics(normals({z, z}), normals({z, z}));
    CHECK(same.at("mae_deg") == 0.0);
    CHECK(same.at("rmsae_deg") == 0.0);

    const double t = 10.0 * std::numbers::pi / 180.0;
    const Eigen::Vector3d r(std::sin(t), 0, std::cos(t));
    const auto rot = normal_metrics(normals({r, r, r}), normals({z, z, z}));
    CHECK(std::abs(rot.at("mae_deg") - 10.0) < 1e-9);
    CHECK(std::abs(rot.at("rmsae_deg") - 10.0) < 1e-9);

    const auto two = normal_metrics(normals({z, Eigen::Vector3d(1, 0, 0)}), normals({z, z}));
    CHECK(std::abs(two.at("mae_deg") - 45.0) < 1e-12);
    CHECK(std::abs(two.at("rmsae_deg") - std::sqrt(90.0 * 90.0 / 2.0)) < 1e-12);
}

TEST_CASE("normal_metrics: non-unit input beyond 1e-3 is rejected")
{
    const NormalMap loose(1, 1, {0.0, 0.0, 1.0000005}, {1});
    CHECK_NOTHROW(normal_metrics(loose, loose));
    // Normal maps refuse non-unit vectors at construction, before any metric runs.
    CHECK_CODE(NormalMap(1, 1, {0.0, 0.0, 1.01}, {1}), ErrorCode::DomainError);
}

TEST_CASE("spoof_metrics: perfect, all-real and counted cases")
{
    std::vector<SpoofSample> perfect{{true, true}, {false, false}};
    const auto p = spoof_metrics(perfect);
    CHECK(p.at("apcer") == 0.0);
    CHECK(p.at("bpcer") == 0.0);
    CHECK(p.at("acer") == 0.0);

    std::vector<SpoofSample> all_real{{true, true}, {true, true}, {true, false}, {true, false}};
    const auto a = spoof_metrics(all_real);
    CHECK(a.at("apcer") == 1.0);
    CHECK(a.at("bpcer") == 0.0);
    CHECK(a.at("acer") == 0.5);

    std::vector<SpoofSample> counted;
    for (int i = 0; i < 10; ++i)
        counted.push_back({i < 2, false});
    for (int i = 0; i < 20; ++i)
        counted.push_back({i >= 1, true});
    const auto c = spoof_metrics(counted);
    CHECK(std::abs(c.at("apcer") - 0.2) < 1e-12);
    CHECK(std::abs(c.at("bpcer") - 0.05) < 1e-12);
    CHECK(std::abs(c.at("acer") - 0.125) < 1e-12);

    std::vector<SpoofSample> one_class{{true, true}, {false, true}};
    CHECK_CODE(spoof_metrics(one_class), ErrorCode::DomainError);
}

TEST_CASE("smooth_l1: branches and knee continuity")
{
    CHECK(smooth_l1(disp({1.0, 2.0}), disp({1.0, 2.0})) == 0.0);
    CHECK(std::abs(smooth_l1(disp({1.5, 2.5}), disp({1.0, 2.0})) - 0.125) < 1e-12);
    CHECK(smooth_l1(3.0) == 2.5);
    const double e = 1e-10;
    CHECK(std::abs(smooth_l1(1.0 - e) - smooth_l1(1.0 + e)) < 1e-9);
    const double h = 1e-6;
    const double left = (smooth_l1(1.0 - h) - smooth_l1(1.0 - 2 * h)) / h;
    const double right = (smooth_l1(1.0 + 2 * h) - smooth_l1(1.0 + h)) / h;
    CHECK(std::abs(left - right) < 1e-5);
}

TEST_CASE("cosine_normal_loss: identity and antipodes")
{
    const Eigen::Vector3d a(0, 0, 1), b(0.6, 0, 0.8);
    CHECK(cosine_normal_loss(normals({a, b}), normals({a, b})) == doctest::Approx(0.0));
    CHECK(cosine_normal_loss(normals({-a, -b}), normals({a, b})) == doctest::Approx(2.0).epsilon(1e-12));
}
