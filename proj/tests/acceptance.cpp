// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance --cli <path to dpface>   (criterion 10 needs the executable)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dpface/dpcalib.hpp"
#include "dpface/dpsim.hpp"
#include "dpface/io.hpp"
#include "dpface/matcher.hpp"
#include "dpface/metrics.hpp"
#include "dpface/photostereo.hpp"
#include "dpface/pipeline.hpp"
#include "dpface/refine.hpp"
#include "dpface/slight.hpp"
#include "oracles.hpp"

using namespace dpface;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void expect(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << " FAILED(" << what << ")";
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- 1 ----------------------------------------------------------------------

std::vector<dpcalib::CalibSample> calib_samples(const dpsim::OpticsConfig& o, int n, double sigma, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma > 0.0 ? sigma : 1.0);
    std::vector<dpcalib::CalibSample> s;
    for (int k = 0; k < n; ++k) {
        const double inv = 1.0 / 1.10 + (1.0 / 0.80 - 1.0 / 1.10) * k / (n - 1);
        double d = dpsim::signed_blur(1.0 / inv, o);
        if (sigma > 0.0)
            d += noise(rng);
        s.push_back({inv, d, 1.0});
    }
    return s;
}

void calibration(Outcome& out)
{
    const auto t0 = Clock::now();
    const dpsim::OpticsConfig o;
    const double g = o.focus_distance;
    const auto clean = dpcalib::fit_affine(calib_samples(o, 20, 0.0, 0), o.focal_length, o.f_number, o.pixel_pitch);
    const double clean_err = std::abs(clean.calibration.g - g) / g;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        const auto fit = dpcalib::fit_affine(calib_samples(o, 20, 0.05, seed), o.focal_length, o.f_number, o.pixel_pitch);
        worst = std::max(worst, std::abs(fit.calibration.g - g) / g);
    }
    const double t = seconds_since(t0);
    out.detail << "noiseless g rel err " << clean_err << ", noisy worst over 200 seeds " << worst << ", " << t << " s";
    out.expect(clean_err <= 1e-9, "noiseless");
    out.expect(worst <= 0.01, "noisy");
    out.expect(t < 1.0, "runtime");
}

// ---- 2 ----------------------------------------------------------------------

void inverse_identity(Outcome& out)
{
    const auto t0 = Clock::now();
    const auto calib = dpcalib::DpCalibration::from_optics(dpsim::OpticsConfig::dataset_preset());
    const int w = 1000, h = 1000;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> z(0.3, 10.0);
    std::vector<double> d(std::size_t(w) * std::size_t(h));
    for (auto& v : d)
        v = dpcalib::disparity_at(z(rng), calib);
    const DisparityMap disp(w, h, d);
    const auto depth = dpcalib::disparity_to_depth(disp, calib);
    const DisparityMap back = dpcalib::depth_to_disparity(depth.depth, calib);
    double worst = 0.0;
    std::size_t compared = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!back.valid(i))
            continue;
        worst = std::max(worst, std::abs(back.value(i) - d[i]) / std::abs(d[i]));
        ++compared;
    }
    const double t = seconds_since(t0);
    out.detail << compared << " pixels, worst rel err " << worst << ", " << t << " s";
    out.expect(compared == d.size(), "all pixels valid");
    out.expect(worst <= 1e-12, "identity");
    out.expect(t < 5.0, "runtime");
}

// ---- 3 ----------------------------------------------------------------------

void structured_light(Outcome& out)
{
    const auto t0 = Clock::now();
    const auto rig = slight::make_default_rig();
    const slight::PatternSet cfg;
    const DepthMap plane(256, 256, std::vector<double>(256 * 256, 1.0));
    const auto captures = slight::render_captures(cfg, plane, rig);
    const auto per = std::size_t(cfg.images_per_orientation());
    const auto bits = std::size_t(cfg.gray_bits);
    bool gray_exact = true;
    for (std::size_t oi = 0; oi < cfg.orientations.size(); ++oi) {
        const auto o = cfg.orientations[oi];
        const std::span<const ImageF> stack(captures.data() + oi * per, per);
        const auto bands = slight::decode_gray(stack.subspan(0, bits), stack.subspan(bits, bits));
        const auto truth = slight::true_projector_coordinate(cfg, o, plane, rig);
        for (std::size_t i = 0; i < truth.mask.size(); ++i)
            if (truth.mask[i]) {
                const int expected = int(std::floor(std::round(truth.unwrapped[i]) / cfg.stripe_width(o)));
                gray_exact = gray_exact && bands.mask[i] && bands.band[i] == expected;
            }
    }
    const auto fields = slight::decode_stack(captures, cfg);
    const DepthMap z = slight::triangulate(fields[0], rig.camera, rig.projector);
    double se = 0.0;
    for (std::size_t i = 0; i < z.pixel_count(); ++i)
        if (z.valid(i))
            se += (z.value(i) - 1.0) * (z.value(i) - 1.0);
    const double coverage = double(z.valid_count()) / double(z.pixel_count());
    const double rmse = std::sqrt(se / double(std::max<std::size_t>(1, z.valid_count())));
    const double t = seconds_since(t0);
    out.detail << "depth rmse " << rmse << " m on " << 100.0 * coverage << "% of pixels, gray "
               << (gray_exact ? "exact" : "NOT exact") << ", " << t << " s";
    out.expect(rmse <= 1e-4, "rmse");
    out.expect(coverage >= 0.99, "coverage");
    out.expect(gray_exact, "gray");
    out.expect(t < 30.0, "runtime");
}

// ---- 4 ----------------------------------------------------------------------

void photometric_stereo(Outcome& out)
{
    const dpsim::SceneParams p;
    const auto scene = dpsim::make_test_scene(dpsim::SceneKind::Sphere, p);
    const auto lights = pipeline::random_lights(10, 1);
    const auto images = photostereo::render_lambertian(scene.normals, ImageF::filled(p.width, p.height, 0.8), lights);
    const auto res = photostereo::solve_normals(images, lights);
    const auto report = metrics::normal_metrics(res.normals, scene.normals);
    const double coverage = double(report.pixel_count) / double(scene.normals.valid_count());

    const photostereo::ChromeBall ball{120.0, 80.0, 40.0};
    const auto axial = photostereo::light_from_highlight(ball, ball.cx, ball.cy);
    const auto side = photostereo::light_from_highlight(ball, ball.cx + ball.r / std::sqrt(2.0), ball.cy);
    const double e_axial = (axial - Eigen::Vector3d(0, 0, 1)).norm();
    const double e_side = (side - Eigen::Vector3d(1, 0, 0)).norm();
    out.detail << "sphere MAE " << report.at("mae_deg") << " deg on " << 100.0 * coverage
               << "% of pixels, chrome ball errors " << e_axial << ", " << e_side;
    out.expect(report.at("mae_deg") < 0.5, "mae");
    out.expect(coverage >= 0.95, "coverage");
    out.expect(e_axial <= 1e-9 && e_side <= 1e-9, "chrome ball");
}

// ---- 5 ----------------------------------------------------------------------

struct Plane {
    PinholeCamera cam;
    DepthMap truth;
    DepthMap noisy;
    NormalMap normals;
};

Plane noisy_plane(int size, double sigma, std::uint64_t seed, double sx, double sy)
{
    dpsim::SceneParams p;
    p.width = p.height = size;
    p.cx = p.cy = (size - 1) / 2.0;
    p.fx = p.fy = 4.7 * size;
    p.slope_x = sx;
    p.slope_y = sy;
    const auto scene = dpsim::make_test_scene(sx == 0.0 && sy == 0.0 ? dpsim::SceneKind::Plane
                                                                     : dpsim::SceneKind::SlantedPlane, p);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<double> z(scene.depth.values().begin(), scene.depth.values().end());
    for (auto& v : z)
        v += noise(rng);
    return {p.camera(), scene.depth, DepthMap(size, size, z), scene.normals};
}

double rmse(const DepthMap& a, const DepthMap& b)
{
    double se = 0.0;
    for (std::size_t i = 0; i < a.pixel_count(); ++i)
        se += (a.value(i) - b.value(i)) * (a.value(i) - b.value(i));
    return std::sqrt(se / double(a.pixel_count()));
}

// Worst measured factor over 50 seeds was 0.102; frozen with margin.
constexpr double kRefineFactor = 0.15;

void refinement(Outcome& out)
{
    const auto a = noisy_plane(64, 0.002, 1, 0.1, 0.0);
    const auto same = refine::refine_depth(a.noisy, a.normals, a.cam, refine::RefineConfig{1.0});
    bool identity = true;
    for (std::size_t i = 0; i < a.noisy.pixel_count(); ++i)
        identity = identity && same.depth.value(i) == a.noisy.value(i);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int increases = 0;
    for (int k = 0; k < 50; ++k) {
        const auto s = noisy_plane(32, 0.001 + 0.01 * u(rng), std::uint64_t(100 + k), 0.4 * u(rng) - 0.2,
                                   0.4 * u(rng) - 0.2);
        refine::RefineConfig cfg;
        cfg.lambda = u(rng);
        const auto r = refine::refine_depth(s.noisy, s.normals, s.cam, cfg);
        const std::vector<double> z0(s.noisy.values().begin(), s.noisy.values().end());
        const std::vector<double> z1(r.depth.values().begin(), r.depth.values().end());
        const double before = refine::refine_energy(z0, s.noisy, s.normals, s.cam, cfg.lambda);
        const double after = refine::refine_energy(z1, s.noisy, s.normals, s.cam, cfg.lambda);
        increases += after > before;
    }

    const auto c = noisy_plane(256, 0.002, 7, 0.0, 0.0);
    const auto r = refine::refine_depth(c.noisy, c.normals, c.cam, refine::RefineConfig{0.1});
    const double factor = rmse(r.depth, c.truth) / rmse(c.noisy, c.truth);
    out.detail << "lambda=1 " << (identity ? "identity" : "NOT identity") << ", energy increases " << increases
               << "/50, noisy-plane factor " << factor << " (limit " << kRefineFactor << ")";
    out.expect(identity, "identity");
    out.expect(increases == 0, "monotone");
    out.expect(factor < kRefineFactor, "factor");
}

// ---- 6 ----------------------------------------------------------------------

double plane_match_error(double d, const matcher::MatchConfig& cfg)
{
    const ImageF tex = dpsim::make_texture(256, 256, 1.0, 1);
    const DisparityMap disp(256, 256, std::vector<double>(256 * 256, d));
    const auto pair = dpsim::render_dp(tex, disp, dpsim::OpticsConfig{});
    const auto est = matcher::match(pair, matcher::DisparityLabels{}, cfg);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < est.pixel_count(); ++i)
        if (est.valid(i)) {
            sum += std::abs(est.value(i) - d);
            ++n;
        }
    return n ? sum / double(n) : INFINITY;
}

void matcher_accuracy(Outcome& out)
{
    const matcher::MatchConfig all;
    matcher::MatchConfig nearest;
    nearest.sampling = {matcher::Sampling::Nearest};
    double slowest = 0.0;
    for (const double d : {-3.5, 0.5, 2.0, 8.0, 11.5}) {
        const auto t0 = Clock::now();
        const double e_all = plane_match_error(d, all);
        slowest = std::max(slowest, seconds_since(t0));
        out.detail << "d*=" << d << ": " << e_all;
        out.expect(e_all <= 0.25, "d*=" + std::to_string(d));
        if (d != std::floor(d)) {
            const double e_near = plane_match_error(d, nearest);
            out.detail << " (nearest " << e_near << ")";
            out.expect(e_near >= e_all, "nearest ordering at d*=" + std::to_string(d));
        }
        out.detail << "; ";
    }
    out.detail << "slowest case " << slowest << " s";
    out.expect(slowest < 60.0, "runtime");
}

// ---- 7 ----------------------------------------------------------------------

matcher::CostVolume volume(int w, int h, matcher::DisparityLabels labels, std::vector<double> cost)
{
    matcher::CostVolume v;
    v.width = w;
    v.height = h;
    v.labels = labels;
    v.cost = std::move(cost);
    v.mask.assign(std::size_t(w * h), 1);
    return v;
}

void soft_argmax(Outcome& out)
{
    const auto two = matcher::regress_disparity(volume(1, 1, {0.0, 1.0, 2}, {std::log(3.0), 0.0}), 1.0);
    const double e_hand = std::abs(two.value(0) - 0.25);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> cost(16 * 16 * 33);
        for (auto& c : cost)
            c = u(rng);
        std::vector<double> shifted = cost;
        for (std::size_t px = 0; px < 256; ++px) {
            const double c0 = 20.0 * u(rng);
            for (std::size_t m = 0; m < 33; ++m)
                shifted[px * 33 + m] += c0;
        }
        const auto a = matcher::regress_disparity(volume(16, 16, {}, cost), 0.05);
        const auto b = matcher::regress_disparity(volume(16, 16, {}, shifted), 0.05);
        for (std::size_t i = 0; i < 256; ++i)
            worst = std::max(worst, std::abs(a.value(i) - b.value(i)));
    }
    out.detail << "two-label error " << e_hand << ", worst shift difference " << worst;
    out.expect(e_hand <= 1e-12, "hand example");
    out.expect(worst <= 1e-9, "shift invariance");
}

// ---- 8 ----------------------------------------------------------------------

DisparityMap row(std::vector<double> v) { return DisparityMap(int(v.size()), 1, v); }

void metrics_suite(Outcome& out)
{
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-5.0, 5.0), zr(0.5, 3.0);
    std::vector<double> gt(100);
    for (auto& g : gt)
        g = zr(rng);
    double worst_affine = 0.0;
    for (int k = 0; k < 100; ++k) {
        double a = u(rng);
        if (std::abs(a) < 1e-3)
            a = 1.0;
        const double b = u(rng);
        std::vector<double> pred;
        for (const double g : gt)
            pred.push_back(a * g + b);
        for (const int p : {1, 2})
            worst_affine = std::max(worst_affine, metrics::aiwe(row(pred), row(gt), p));
    }

    bool monotone = true;
    std::uniform_real_distribution<double> jitter(0.9, 1.1);
    for (int k = 0; k < 20; ++k) {
        std::vector<double> p, g;
        for (int i = 0; i < 100; ++i) {
            g.push_back(zr(rng));
            p.push_back(g.back() * jitter(rng));
        }
        const auto r = metrics::depth_metrics(DepthMap(100, 1, p), DepthMap(100, 1, g));
        monotone = monotone && r.at("delta1") <= r.at("delta2") && r.at("delta2") <= r.at("delta3");
    }

    double hand = 0.0;
    const auto dm = metrics::depth_metrics(DepthMap(2, 1, {1.1, 1.9}), DepthMap(2, 1, {1.0, 2.0}));
    hand = std::max({hand, std::abs(dm.at("mae") - 0.1), std::abs(dm.at("rmse") - 0.1), std::abs(dm.at("absrel") - 0.075)});
    const auto nm = metrics::normal_metrics(NormalMap(2, 1, {0, 0, 1, 1, 0, 0}, {1, 1}),
                                            NormalMap(2, 1, {0, 0, 1, 0, 0, 1}, {1, 1}));
    hand = std::max({hand, std::abs(nm.at("mae_deg") - 45.0), std::abs(nm.at("rmsae_deg") - std::sqrt(4050.0))});
    std::vector<metrics::SpoofSample> spoof;
    for (int i = 0; i < 10; ++i)
        spoof.push_back({i < 2, false});
    for (int i = 0; i < 20; ++i)
        spoof.push_back({i >= 1, true});
    const auto sm = metrics::spoof_metrics(spoof);
    hand = std::max({hand, std::abs(sm.at("apcer") - 0.2), std::abs(sm.at("bpcer") - 0.05), std::abs(sm.at("acer") - 0.125)});
    hand = std::max(hand, std::abs(metrics::smooth_l1(row({1.5, 2.5}), row({1.0, 2.0})) - 0.125));

    std::normal_distribution<double> noise(0.0, 0.3);
    std::uniform_real_distribution<double> pr(0.0, 4.0);
    double worst_l1 = 0.0;
    for (int k = 0; k < 80; ++k) {
        const int n = 3 + k % 8;
        std::vector<double> p, g;
        for (int i = 0; i < n; ++i) {
            p.push_back(pr(rng));
            g.push_back(-0.8 * p.back() + 2.0 + noise(rng));
        }
        worst_l1 = std::max(worst_l1, std::abs(metrics::aiwe_fit(p, g, 1).value - test::aiwe_grid(p, g, 1)));
    }
    out.detail << "affine worst " << worst_affine << ", delta monotone " << (monotone ? "yes" : "no")
               << ", hand worst " << hand << ", AIWE(1) vs grid worst " << worst_l1;
    out.expect(worst_affine <= 1e-6, "affine invariance");
    out.expect(monotone, "delta monotone");
    out.expect(hand <= 1e-12, "hand arithmetic");
    out.expect(worst_l1 <= 1e-4, "AIWE(1) oracle");
}

// ---- 9 ----------------------------------------------------------------------

void multiview_filter(Outcome& out)
{
    const dpsim::SceneParams p;
    const auto scene = dpsim::make_test_scene(dpsim::SceneKind::Sphere, p);
    const auto views = pipeline::ring_views(dpsim::SceneKind::Sphere, p, 5);
    const refine::ConsistencyConfig cfg;
    const auto labeled = pipeline::cloud_with_outliers(dpsim::SceneKind::Sphere, p, scene.depth, 0.02,
                                                       5.0 * cfg.depth_tol, 9);
    std::size_t in = 0, out_n = 0, kept_in = 0, kept_out = 0;
    for (std::size_t i = 0; i < labeled.cloud.size(); ++i) {
        const bool keep = refine::consistent_views(labeled.cloud.points()[i], views, cfg) >= cfg.min_views;
        if (labeled.outlier[i]) {
            ++out_n;
            kept_out += keep;
        } else {
            ++in;
            kept_in += keep;
        }
    }
    const auto once = refine::filter_points(labeled.cloud, views, cfg);
    const auto twice = refine::filter_points(once, views, cfg);
    bool idempotent = once.size() == twice.size();
    for (std::size_t i = 0; idempotent && i < once.size(); ++i)
        idempotent = once.points()[i] == twice.points()[i];
    const double removal = 1.0 - double(kept_out) / double(out_n);
    const double loss = 1.0 - double(kept_in) / double(in);
    out.detail << in << " inliers, " << out_n << " outliers: removal " << 100.0 * removal << "%, inlier loss "
               << 100.0 * loss << "%, idempotent " << (idempotent ? "yes" : "no");
    out.expect(removal >= 0.99, "removal");
    out.expect(loss <= 0.01, "loss");
    out.expect(idempotent, "idempotence");
    out.expect(once.size() == kept_in + kept_out, "consistent count");
}

// ---- 10 ---------------------------------------------------------------------

void determinism(Outcome& out, const std::string& cli)
{
    if (cli.empty()) {
        out.expect(false, "missing --cli");
        return;
    }
    const fs::path root = fs::temp_directory_path() / "dpface_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    for (const int threads : {1, 8}) {
        const std::string cmd = "\"" + cli + "\" --threads " + std::to_string(threads) + " pipeline -o \"" +
                                (root / ("t" + std::to_string(threads))).string() + "\"";
        out.expect(std::system(cmd.c_str()) == 0, "pipeline --threads " + std::to_string(threads));
    }
    int identical = 0;
    const char* files[] = {"disp.pfm", "depth.pfm", "normal.pfm", "report.json"};
    for (const char* f : files) {
        const bool same = fs::exists(root / "t1" / f) && fs::exists(root / "t8" / f) &&
                          io::read_file(root / "t1" / f) == io::read_file(root / "t8" / f);
        identical += same;
        out.expect(same, std::string(f) + " identical");
    }
    out.detail << identical << "/4 outputs byte-identical across --threads 1 and 8";
}

} // namespace

int main(int argc, char** argv)
{
    std::string cli;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--cli")
            cli = argv[i + 1];

    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
        {"calibration round trip", calibration},
        {"disparity/depth inverse identity", inverse_identity},
        {"structured light end to end", structured_light},
        {"photometric stereo round trip", photometric_stereo},
        {"normal-guided refinement", refinement},
        {"matcher accuracy", matcher_accuracy},
        {"soft-argmax regression", soft_argmax},
        {"metrics suite", metrics_suite},
        {"multi-view filter", multiview_filter},
        {"determinism", [&](Outcome& o) { determinism(o, cli); }},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            criteria[k].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " exception: " << e.what();
        }
        failed += !o.pass;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
