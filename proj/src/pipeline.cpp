#include "dpface/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dpface/dpcalib.hpp"
#include "dpface/error.hpp"
#include "dpface/geometry.hpp"
#include "dpface/io.hpp"
#include "dpface/metrics.hpp"
#include "dpface/serialize.hpp"

namespace dpface::pipeline {

using nlohmann::json;

void PipelineConfig::validate() const
{
    optics.validate();
    labels.validate();
    match.validate();
    refine.validate();
    patterns.validate();
    if (normal_neighborhood < 3 || normal_neighborhood % 2 == 0)
        fail(ErrorCode::DomainError, "normal_neighborhood must be odd and at least 3");
    if (calibration_samples < 2)
        fail(ErrorCode::DomainError, "calibration_samples must be at least 2");
    if (!(calibration_noise >= 0.0) || !(render_noise >= 0.0))
        fail(ErrorCode::DomainError, "noise levels must be non-negative");
    if (light_count < 3)
        fail(ErrorCode::DomainError, "light_count must be at least 3");
    if (filter_views < 3)
        fail(ErrorCode::DomainError, "filter_views must be at least 3");
    if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0))
        fail(ErrorCode::DomainError, "outlier_fraction must lie in [0, 1)");
}

json to_json(const PipelineConfig& c)
{
    return {{"scene", std::string(serialize::to_string(c.scene))},
            {"scene_params", serialize::to_json(c.scene_params)},
            {"optics", serialize::to_json(c.optics)},
            {"labels", serialize::to_json(c.labels)},
            {"match", serialize::to_json(c.match)},
            {"refine", serialize::to_json(c.refine)},
            {"patterns", serialize::to_json(c.patterns)},
            {"normal_neighborhood", c.normal_neighborhood},
            {"calibration_samples", c.calibration_samples},
            {"calibration_noise", c.calibration_noise},
            {"render_noise", c.render_noise},
            {"light_count", c.light_count},
            {"filter_views", c.filter_views},
            {"outlier_fraction", c.outlier_fraction},
            {"seed", c.seed}};
}

PipelineConfig config_from_json(const json& j)
{
    if (!j.is_object())
        fail(ErrorCode::ParseError, "pipeline config must be a JSON object");
    PipelineConfig c;
    serialize::guarded([&] {
        if (j.contains("scene"))
            c.scene = serialize::scene_kind_from_string(j["scene"].get<std::string>());
        if (j.contains("scene_params"))
            c.scene_params = serialize::scene_params_from_json(j["scene_params"]);
        if (j.contains("optics"))
            c.optics = serialize::optics_from_json(j["optics"]);
        if (j.contains("labels"))
            c.labels = serialize::labels_from_json(j["labels"]);
        if (j.contains("match"))
            c.match = serialize::match_config_from_json(j["match"]);
        if (j.contains("refine"))
            c.refine = serialize::refine_config_from_json(j["refine"]);
        if (j.contains("patterns"))
            c.patterns = serialize::patterns_from_json(j["patterns"]);
        c.normal_neighborhood = j.value("normal_neighborhood", c.normal_neighborhood);
        c.calibration_samples = j.value("calibration_samples", c.calibration_samples);
        c.calibration_noise = j.value("calibration_noise", c.calibration_noise);
        c.render_noise = j.value("render_noise", c.render_noise);
        c.light_count = j.value("light_count", c.light_count);
        c.filter_views = j.value("filter_views", c.filter_views);
        c.outlier_fraction = j.value("outlier_fraction", c.outlier_fraction);
        c.seed = j.value("seed", c.seed);
    });
    c.validate();
    return c;
}

photostereo::LightSet random_lights(int count, std::uint64_t seed, double max_polar_deg)
{
    if (count < 1 || !(max_polar_deg > 0.0 && max_polar_deg <= 90.0))
        fail(ErrorCode::DomainError, "invalid light sampling parameters");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double cos_max = std::cos(max_polar_deg * std::numbers::pi / 180.0);
    photostereo::LightSet lights;
    for (int k = 0; k < count; ++k) {
        // Uniform on the spherical cap.
        const double cz = 1.0 - unit(rng) * (1.0 - cos_max);
        const double phi = 2.0 * std::numbers::pi * unit(rng);
        const double s = std::sqrt(std::max(0.0, 1.0 - cz * cz));
        lights.directions.push_back(Eigen::Vector3d(s * std::cos(phi), s * std::sin(phi), cz).normalized());
    }
    return lights;
}

namespace {

Eigen::Vector3d scene_center(dpsim::SceneKind kind, const dpsim::SceneParams& p)
{
    return kind == dpsim::SceneKind::Sphere ? p.sphere_center : Eigen::Vector3d(0.0, 0.0, p.plane_depth);
}

} // namespace

std::vector<refine::View> ring_views(dpsim::SceneKind kind, const dpsim::SceneParams& p, int count, double baseline)
{
    if (count < 1 || !(baseline > 0.0))
        fail(ErrorCode::DomainError, "invalid view ring");
    const Eigen::Vector3d target = scene_center(kind, p);
    std::vector<refine::View> views;
    for (int k = 0; k < count; ++k) {
        RigidTransform pose;
        if (k > 0) {
            const double theta = 2.0 * std::numbers::pi * (k - 1) / (count - 1);
            const Eigen::Vector3d eye(baseline * std::cos(theta), baseline * std::sin(theta), 0.0);
            pose = look_at(eye, target);
        }
        const PinholeCamera cam(p.fx, p.fy, p.cx, p.cy, pose);
        views.push_back({cam, dpsim::raycast_depth(kind, p, cam, p.width, p.height), std::nullopt});
    }
    return views;
}

double surface_distance(dpsim::SceneKind kind, const dpsim::SceneParams& p, const Eigen::Vector3d& x)
{
    if (kind == dpsim::SceneKind::Sphere)
        return std::abs((x - p.sphere_center).norm() - p.sphere_radius);
    const double sx = kind == dpsim::SceneKind::SlantedPlane ? p.slope_x : 0.0;
    const double sy = kind == dpsim::SceneKind::SlantedPlane ? p.slope_y : 0.0;
    const Eigen::Vector3d n(-sx, -sy, 1.0);
    return std::abs(n.dot(x) - p.plane_depth) / n.norm();
}

LabeledCloud cloud_with_outliers(dpsim::SceneKind kind, const dpsim::SceneParams& p, const DepthMap& depth,
                                 double outlier_fraction, double min_offset, std::uint64_t seed, int stride,
                                 double margin)
{
    if (stride < 1)
        fail(ErrorCode::DomainError, "stride must be positive");
    const PinholeCamera cam = p.camera();
    std::vector<Eigen::Vector3d> points;
    for (int v = 0; v < depth.height(); v += stride)
        for (int u = 0; u < depth.width(); u += stride)
            if (depth.valid(u, v))
                points.push_back(cam.to_world(cam.ray(u, v) * depth.value(u, v)));
    if (points.empty())
        fail(ErrorCode::EmptyInput, "depth map has no valid pixels");
    Eigen::Vector3d lo = points.front(), hi = points.front();
    for (const auto& x : points) {
        lo = lo.cwiseMin(x);
        hi = hi.cwiseMax(x);
    }
    lo.array() -= margin;
    hi.array() += margin;

    LabeledCloud out;
    out.outlier.assign(points.size(), 0);
    const auto wanted = std::size_t(std::llround(outlier_fraction * double(points.size())));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t added = 0;
    for (std::size_t tries = 0; added < wanted; ++tries) {
        if (tries > 1000 * (wanted + 1))
            fail(ErrorCode::DomainError, "cannot place outliers away from the surface");
        const Eigen::Vector3d x(lo.x() + (hi.x() - lo.x()) * unit(rng), lo.y() + (hi.y() - lo.y()) * unit(rng),
                                lo.z() + (hi.z() - lo.z()) * unit(rng));
        if (surface_distance(kind, p, x) < min_offset)
            continue;
        points.push_back(x);
        out.outlier.push_back(1);
        ++added;
    }
    out.cloud = PointCloud(std::move(points));
    return out;
}

namespace {

json report_json(const metrics::MetricReport& r)
{
    json j = r.to_json();
    j["pixel_count"] = r.pixel_count;
    return j;
}

double valid_fraction(std::span<const std::uint8_t> mask, std::span<const std::uint8_t> reference)
{
    std::size_t a = 0, b = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        b += reference[i] ? 1 : 0;
        a += (reference[i] && mask[i]) ? 1 : 0;
    }
    return b == 0 ? 0.0 : double(a) / double(b);
}

json calibration_stage(const PipelineConfig& cfg, dpcalib::DpCalibration& calib)
{
    const double z_near = 0.80, z_far = 1.10;
    std::vector<dpcalib::CalibSample> clean, noisy;
    std::mt19937_64 rng(cfg.seed ^ 0x63616c6962ULL);
    std::normal_distribution<double> noise(0.0, cfg.calibration_noise > 0.0 ? cfg.calibration_noise : 1.0);
    for (int k = 0; k < cfg.calibration_samples; ++k) {
        const double inv = 1.0 / z_far + (1.0 / z_near - 1.0 / z_far) * k / (cfg.calibration_samples - 1);
        const double d = dpsim::signed_blur(1.0 / inv, cfg.optics);
        clean.push_back({inv, d, 1.0});
        noisy.push_back({inv, d + (cfg.calibration_noise > 0.0 ? noise(rng) : 0.0), 1.0});
    }
    const auto& o = cfg.optics;
    const auto exact = dpcalib::fit_affine(clean, o.focal_length, o.f_number, o.pixel_pitch);
    const auto fit = dpcalib::fit_affine(noisy, o.focal_length, o.f_number, o.pixel_pitch);
    calib = fit.calibration;
    const double g = o.focus_distance;
    return {{"g", fit.calibration.g},
            {"alpha", fit.calibration.alpha},
            {"residual_rms", fit.residual_rms},
            {"g_rel_error_noiseless", std::abs(exact.calibration.g - g) / g},
            {"alpha_rel_error_noiseless", std::abs(exact.calibration.alpha - o.alpha) / o.alpha},
            {"g_rel_error_noisy", std::abs(fit.calibration.g - g) / g}};
}

json structured_light_stage(const PipelineConfig& cfg, const dpsim::TestScene& scene)
{
    slight::Rig rig = slight::make_default_rig();
    rig.camera = cfg.scene_params.camera();
    rig.camera_width = scene.depth.width();
    rig.camera_height = scene.depth.height();
    const auto captures = slight::render_captures(cfg.patterns, scene.depth, rig);
    const auto fields = slight::decode_stack(captures, cfg.patterns);
    json j = json::object();
    const auto bits = std::size_t(cfg.patterns.gray_bits);
    const auto per = std::size_t(cfg.patterns.images_per_orientation());
    for (std::size_t oi = 0; oi < fields.size(); ++oi) {
        const auto o = cfg.patterns.orientations[oi];
        const std::span<const ImageF> stack(captures.data() + oi * per, per);
        const auto bands = slight::decode_gray(stack.subspan(0, bits), stack.subspan(bits, bits));
        const auto truth = slight::true_projector_coordinate(cfg.patterns, o, scene.depth, rig);
        const int stripe = cfg.patterns.stripe_width(o);
        std::size_t exact = 0, considered = 0;
        double coord_err = 0.0;
        std::size_t coord_n = 0;
        for (std::size_t i = 0; i < truth.mask.size(); ++i) {
            if (!truth.mask[i])
                continue;
            ++considered;
            const int expected = int(std::floor(std::max(0.0, std::round(truth.unwrapped[i])) / stripe));
            exact += (bands.mask[i] && bands.band[i] == expected) ? 1 : 0;
            if (fields[oi].mask[i]) {
                coord_err = std::max(coord_err, std::abs(fields[oi].unwrapped[i] - truth.unwrapped[i]));
                ++coord_n;
            }
        }
        const std::string name = o == slight::Orientation::Horizontal ? "horizontal" : "vertical";
        j[name] = {{"gray_exact_fraction", considered ? double(exact) / double(considered) : 0.0},
                   {"max_coordinate_error", coord_err},
                   {"valid_fraction", valid_fraction(fields[oi].mask, truth.mask)}};
        if (o == slight::Orientation::Horizontal) {
            const DepthMap depth = slight::triangulate(fields[oi], rig.camera, rig.projector);
            const auto rep = metrics::depth_metrics(depth, scene.depth);
            j["depth_rmse"] = rep.at("rmse");
            j["depth_valid_fraction"] = valid_fraction(depth.mask(), scene.depth.mask());
        }
    }
    return j;
}

json photometric_stage(const PipelineConfig& cfg, const dpsim::TestScene& scene)
{
    const auto lights = random_lights(cfg.light_count, cfg.seed ^ 0x6c69676874ULL);
    const auto images = photostereo::render_lambertian(scene.normals, scene.image, lights);
    const auto result = photostereo::solve_normals(images, lights);
    const auto rep = metrics::normal_metrics(result.normals, scene.normals);
    const photostereo::ChromeBall ball{100.0, 100.0, 40.0};
    const Eigen::Vector3d axis = photostereo::light_from_highlight(ball, 100.0, 100.0);
    const Eigen::Vector3d side = photostereo::light_from_highlight(ball, 100.0 + 40.0 / std::sqrt(2.0), 100.0);
    return {{"mae_deg", rep.at("mae_deg")},
            {"rmsae_deg", rep.at("rmsae_deg")},
            {"valid_fraction", valid_fraction(result.normals.mask(), scene.normals.mask())},
            {"ball_center_error", (axis - Eigen::Vector3d(0, 0, 1)).norm()},
            {"ball_side_error", (side - Eigen::Vector3d(1, 0, 0)).norm()}};
}

json filter_stage(const PipelineConfig& cfg, const dpsim::TestScene& scene)
{
    refine::ConsistencyConfig cc;
    const auto views = ring_views(cfg.scene, cfg.scene_params, cfg.filter_views);
    const auto labeled = cloud_with_outliers(cfg.scene, cfg.scene_params, scene.depth, cfg.outlier_fraction,
                                             5.0 * cc.depth_tol, cfg.seed ^ 0x6f75746cULL, 2);
    const PointCloud kept = refine::filter_points(labeled.cloud, views, cc);
    std::size_t outliers = 0, removed = 0, inliers = 0, lost = 0;
    for (std::size_t i = 0; i < labeled.cloud.size(); ++i) {
        const bool keep = refine::consistent_views(labeled.cloud.points()[i], views, cc) >= cc.min_views;
        if (labeled.outlier[i]) {
            ++outliers;
            removed += keep ? 0 : 1;
        } else {
            ++inliers;
            lost += keep ? 0 : 1;
        }
    }
    const PointCloud twice = refine::filter_points(kept, views, cc);
    return {{"points", labeled.cloud.size()},
            {"kept", kept.size()},
            {"outlier_removal", outliers ? double(removed) / double(outliers) : 1.0},
            {"inlier_loss", inliers ? double(lost) / double(inliers) : 0.0},
            {"idempotent", twice.size() == kept.size()}};
}

} // namespace

PipelineResult run(const PipelineConfig& cfg)
{
    cfg.validate();
    json report = json::object();
    report["config"] = to_json(cfg);

    dpcalib::DpCalibration calib;
    report["calibration"] = calibration_stage(cfg, calib);

    const dpsim::TestScene scene = dpsim::make_test_scene(cfg.scene, cfg.scene_params);
    const PinholeCamera cam = cfg.scene_params.camera();
    const DisparityMap gt_disp = dpsim::signed_blur(scene.depth, cfg.optics);

    // Conversion round trip against the fitted calibration.
    {
        const DisparityMap d = dpcalib::depth_to_disparity(scene.depth, calib);
        const DepthMap back = dpcalib::disparity_to_depth(d, calib).depth;
        double worst = 0.0;
        for (std::size_t i = 0; i < back.pixel_count(); ++i)
            if (scene.depth.valid(i) && back.valid(i))
                worst = std::max(worst, std::abs(back.value(i) - scene.depth.value(i)) / scene.depth.value(i));
        report["conversion"] = {{"max_rel_roundtrip_error", worst}};
    }

    dpsim::RenderOptions ro;
    ro.noise_sigma = cfg.render_noise;
    ro.seed = cfg.seed ^ 0x72656e64ULL;
    const dpsim::DpImagePair pair = dpsim::render_dp(scene.image, gt_disp, cfg.optics, ro);
    const DisparityMap disp = matcher::match(pair, cfg.labels, cfg.match);
    report["disparity"] = report_json(metrics::evaluate_disparity(disp, gt_disp));
    {
        double err = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < disp.pixel_count(); ++i)
            if (disp.valid(i) && gt_disp.valid(i)) {
                err += std::abs(disp.value(i) - gt_disp.value(i));
                ++n;
            }
        report["disparity"]["mean_abs_error"] = n ? err / double(n) : 0.0;
    }

    const auto conv = dpcalib::disparity_to_depth(disp, calib);
    report["depth"] = report_json(metrics::evaluate_depth(conv.depth, scene.depth));
    report["depth"]["masked_singular"] = conv.masked_singular;

    const NormalMap normals = matcher::normals_from_depth(conv.depth, cam, cfg.normal_neighborhood);
    report["normal"] = report_json(metrics::normal_metrics(normals, scene.normals));

    const auto refined = refine::refine_depth(conv.depth, normals, cam, cfg.refine);
    report["refined_depth"] = report_json(metrics::evaluate_depth(refined.depth, scene.depth));
    report["refined_depth"]["energy_before"] = refined.energy_before;
    report["refined_depth"]["energy_after"] = refined.energy_after;
    report["refined_depth"]["converged"] = refined.converged;

    report["structured_light"] = structured_light_stage(cfg, scene);
    report["photometric_stereo"] = photometric_stage(cfg, scene);
    report["filter"] = filter_stage(cfg, scene);

    PipelineResult out{disp, refined.depth, normals, std::move(report)};
    return out;
}

void write_outputs(const PipelineResult& result, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    io::write_pfm(dir / "disp.pfm", result.disparity);
    io::write_pfm(dir / "depth.pfm", result.depth);
    io::write_pfm(dir / "normal.pfm", result.normals);
    io::write_json(dir / "report.json", result.report);
}

} // namespace dpface::pipeline
