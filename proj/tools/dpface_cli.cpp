// dpface command-line interface. Every pipeline stage is a subcommand;
// structured inputs and outputs are JSON, arrays are PFM/PNG/PLY.
//
// Exit codes: 0 success, 2 usage error, 1 domain error (one-line JSON on stderr).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpface/dpcalib.hpp"
#include "dpface/dpsim.hpp"
#include "dpface/error.hpp"
#include "dpface/geometry.hpp"
#include "dpface/io.hpp"
#include "dpface/matcher.hpp"
#include "dpface/metrics.hpp"
#include "dpface/parallel.hpp"
#include "dpface/photostereo.hpp"
#include "dpface/pipeline.hpp"
#include "dpface/refine.hpp"
#include "dpface/serialize.hpp"
#include "dpface/slight.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dpface;

namespace {

constexpr const char* kVersion = "dpface 1.0.0 (pfm: little-endian scale -1.0; ply: ascii 1.0; report: 1)";

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep))
        out.push_back(item);
    return out;
}

std::string trim(std::string s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    const auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double to_number(const std::string& s, const std::string& where)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCode::ParseError, "not a number in " + where + ": '" + s + "'");
    }
}

// Numeric CSV rows; a first line that does not parse as numbers is a header.
std::vector<std::vector<double>> read_csv(const fs::path& path, std::size_t min_cols, std::size_t max_cols)
{
    const std::string text = io::read_file(path);
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#')
            continue;
        auto cells = split(line, ',');
        if (first) {
            first = false;
            try {
                std::stod(trim(cells.front()));
            } catch (const std::exception&) {
                continue;
            }
        }
        if (cells.size() < min_cols || cells.size() > max_cols)
            fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": wrong column count");
        std::vector<double> row;
        for (auto& c : cells)
            row.push_back(to_number(trim(c), path.string() + ":" + std::to_string(line_no)));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<fs::path> image_files(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        fail(ErrorCode::IoError, "not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension().string();
        if (e.is_regular_file() && (ext == ".png" || ext == ".pgm" || ext == ".pfm"))
            files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<ImageF> read_images(const fs::path& dir)
{
    std::vector<ImageF> images;
    for (const auto& f : image_files(dir))
        images.push_back(io::read_image(f));
    if (images.empty())
        fail(ErrorCode::EmptyInput, "no images in " + dir.string());
    return images;
}

std::string numbered(const std::string& stem, int k, const std::string& ext)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%03d", k);
    return stem + buf + ext;
}

dpsim::SceneKind parse_scene(const std::string& s)
{
    return serialize::scene_kind_from_string(s);
}

// ---- subcommands -------------------------------------------------------------

struct SimulateArgs {
    std::string scene = "slanted_plane";
    std::string optics;
    std::string params;
    std::string out;
    double noise = 0.0;
    std::uint64_t seed = 1;
    bool emit_samples = false;
    int samples = 20;
    double sample_noise = 0.0;
    bool split_disc = false;
    std::string sl_out;
    std::string views_out;
    int views = 5;
};

void run_simulate(const SimulateArgs& a)
{
    const auto optics = a.optics.empty() ? dpsim::OpticsConfig::dataset_preset()
                                         : serialize::optics_from_json(io::read_json(a.optics));
    optics.validate();
    dpsim::SceneParams params = a.params.empty() ? dpsim::SceneParams{}
                                                 : serialize::scene_params_from_json(io::read_json(a.params));
    params.seed = a.seed;
    const auto kind = parse_scene(a.scene);
    const auto scene = dpsim::make_test_scene(kind, params);
    const DisparityMap disp = dpsim::signed_blur(scene.depth, optics);
    dpsim::RenderOptions ro;
    ro.noise_sigma = a.noise;
    ro.seed = a.seed;
    ro.psf = a.split_disc ? dpsim::PsfShape::SplitDisc : dpsim::PsfShape::InscribedDisc;
    const auto pair = dpsim::render_dp(scene.image, disp, optics, ro);

    const fs::path dir(a.out);
    io::write_pfm(dir / "left.pfm", pair.left);
    io::write_pfm(dir / "right.pfm", pair.right);
    io::write_pfm(dir / "image.pfm", scene.image);
    io::write_pfm(dir / "depth.pfm", scene.depth);
    io::write_pfm(dir / "disp.pfm", disp);
    io::write_pfm(dir / "normal.pfm", scene.normals);
    io::write_json(dir / "optics.json", serialize::to_json(optics));
    io::write_json(dir / "camera.json", serialize::to_json(params.camera()));

    if (a.emit_samples) {
        if (a.samples < 2)
            fail(ErrorCode::DomainError, "--samples must be at least 2");
        std::mt19937_64 rng(a.seed);
        std::normal_distribution<double> noise(0.0, a.sample_noise > 0.0 ? a.sample_noise : 1.0);
        std::ostringstream csv;
        csv.precision(17);
        csv << "inv_depth,disparity\n";
        const double z_near = 0.80, z_far = 1.10;
        for (int k = 0; k < a.samples; ++k) {
            const double inv = 1.0 / z_far + (1.0 / z_near - 1.0 / z_far) * k / (a.samples - 1);
            double d = dpsim::signed_blur(1.0 / inv, optics);
            if (a.sample_noise > 0.0)
                d += noise(rng);
            csv << inv << ',' << d << '\n';
        }
        io::write_file(dir / "samples.csv", csv.str());
    }

    if (!a.sl_out.empty()) {
        slight::PatternSet patterns;
        slight::Rig rig = slight::make_default_rig();
        rig.camera = params.camera();
        rig.camera_width = params.width;
        rig.camera_height = params.height;
        const auto captures = slight::render_captures(patterns, scene.depth, rig);
        const fs::path sl(a.sl_out);
        for (std::size_t k = 0; k < captures.size(); ++k)
            io::write_png16(sl / numbered("capture", int(k), ".png"), captures[k]);
        io::write_json(sl / "rig.json", serialize::to_json(rig));
        io::write_json(sl / "patterns.json", serialize::to_json(patterns));
    }

    if (!a.views_out.empty()) {
        const fs::path vd(a.views_out);
        const auto views = pipeline::ring_views(kind, params, a.views);
        for (std::size_t k = 0; k < views.size(); ++k) {
            io::write_json(vd / numbered("view", int(k), ".json"), serialize::to_json(views[k].camera));
            io::write_pfm(vd / numbered("view", int(k), ".pfm"), views[k].depth);
        }
        io::write_ply(vd / "cloud.ply", back_project(scene.depth, params.camera()));
    }
}

struct CalibrateArgs {
    std::string samples;
    double f = 0.135;
    double fnum = 5.6;
    double pitch = dpsim::OpticsConfig{}.pixel_pitch;
    std::string out;
};

void run_calibrate(const CalibrateArgs& a)
{
    std::vector<dpcalib::CalibSample> samples;
    for (const auto& row : read_csv(a.samples, 2, 3))
        samples.push_back({row[0], row[1], row.size() > 2 ? row[2] : 1.0});
    const auto fit = dpcalib::fit_affine(samples, a.f, a.fnum, a.pitch);
    io::write_json(a.out, serialize::to_json(fit.calibration, fit.residual_rms));
}

struct SlGenArgs {
    std::string config;
    std::string out;
};

void run_sl_gen(const SlGenArgs& a)
{
    const auto cfg = a.config.empty() ? slight::PatternSet{} : serialize::patterns_from_json(io::read_json(a.config));
    cfg.validate();
    const fs::path dir(a.out);
    for (int k = 0; k < cfg.image_count(); ++k)
        io::write_png16(dir / numbered("pattern", k, ".png"), slight::generate_pattern(cfg, k));
    io::write_json(dir / "patterns.json", serialize::to_json(cfg));
}

struct SlDecodeArgs {
    std::string captures;
    std::string rig;
    std::string patterns;
    std::string out;
    std::string phase_out;
};

void run_sl_decode(const SlDecodeArgs& a)
{
    const auto rig = serialize::rig_from_json(io::read_json(a.rig));
    fs::path pattern_file = a.patterns.empty() ? fs::path(a.captures) / "patterns.json" : fs::path(a.patterns);
    const auto cfg = fs::exists(pattern_file) ? serialize::patterns_from_json(io::read_json(pattern_file))
                                              : slight::PatternSet{};
    const auto captures = read_images(a.captures);
    const auto fields = slight::decode_stack(captures, cfg);
    for (std::size_t oi = 0; oi < fields.size(); ++oi) {
        if (cfg.orientations[oi] != slight::Orientation::Horizontal)
            continue;
        const DepthMap depth = slight::triangulate(fields[oi], rig.camera, rig.projector);
        io::write_pfm(a.out, depth);
        if (!a.phase_out.empty()) {
            const auto& f = fields[oi];
            io::write_pfm(a.phase_out, DisparityMap(f.width, f.height, f.unwrapped, f.mask));
        }
        return;
    }
    fail(ErrorCode::DomainError, "pattern set has no horizontal orientation to triangulate");
}

struct PsLightsArgs {
    std::string ball;
    std::string highlights;
    std::string out;
};

void run_ps_lights(const PsLightsArgs& a)
{
    const auto parts = split(a.ball, ',');
    if (parts.size() != 3)
        fail(ErrorCode::ParseError, "--ball must be cx,cy,r");
    const photostereo::ChromeBall ball{to_number(trim(parts[0]), "--ball"), to_number(trim(parts[1]), "--ball"),
                                       to_number(trim(parts[2]), "--ball")};
    photostereo::LightSet lights;
    for (const auto& row : read_csv(a.highlights, 2, 2))
        lights.directions.push_back(photostereo::light_from_highlight(ball, row[0], row[1]));
    lights.validate();
    io::write_json(a.out, serialize::to_json(lights));
}

struct PsSolveArgs {
    std::string images;
    std::string lights;
    std::string out;
    std::string albedo;
    double shadow = photostereo::SolveOptions{}.shadow_threshold;
};

void run_ps_solve(const PsSolveArgs& a)
{
    const auto lights = serialize::lights_from_json(io::read_json(a.lights));
    const auto images = read_images(a.images);
    photostereo::SolveOptions opt;
    opt.shadow_threshold = a.shadow;
    const auto result = photostereo::solve_normals(images, lights, opt);
    io::write_pfm(a.out, result.normals);
    if (!a.albedo.empty())
        io::write_pfm(a.albedo, result.albedo);
}

struct RefineArgs {
    std::string depth;
    std::string normal;
    std::string cam;
    double lambda = 0.0;
    double tol = refine::RefineConfig{}.solver_tol;
    int max_iters = refine::RefineConfig{}.max_iters;
    std::string out;
    std::string stats;
};

void run_refine(const RefineArgs& a)
{
    const DepthMap depth = io::read_depth_pfm(a.depth, io::NanPolicy::MaskInvalid);
    const NormalMap normals = io::read_normal_pfm(a.normal, io::NanPolicy::MaskInvalid);
    const auto cam = serialize::camera_from_json(io::read_json(a.cam));
    refine::RefineConfig cfg;
    cfg.lambda = a.lambda;
    cfg.solver_tol = a.tol;
    cfg.max_iters = a.max_iters;
    const auto result = refine::refine_depth(depth, normals, cam, cfg);
    io::write_pfm(a.out, result.depth);
    if (!a.stats.empty())
        io::write_json(a.stats, {{"energy_before", result.energy_before},
                                 {"energy_after", result.energy_after},
                                 {"converged", result.converged},
                                 {"iterations", result.iterations},
                                 {"residual", result.residual},
                                 {"masked_nonpositive", result.masked_nonpositive}});
}

struct FilterArgs {
    std::string cloud;
    std::string views;
    int min_views = 3;
    double depth_tol = refine::ConsistencyConfig{}.depth_tol;
    std::string out;
};

void run_filter(const FilterArgs& a)
{
    const PointCloud cloud = io::read_ply(a.cloud);
    if (!fs::is_directory(a.views))
        fail(ErrorCode::IoError, "not a directory: " + a.views);
    std::vector<fs::path> cams;
    for (const auto& e : fs::directory_iterator(a.views))
        if (e.is_regular_file() && e.path().extension() == ".json")
            cams.push_back(e.path());
    std::sort(cams.begin(), cams.end());
    std::vector<refine::View> views;
    for (const auto& c : cams) {
        fs::path depth = c;
        depth.replace_extension(".pfm");
        views.push_back({serialize::camera_from_json(io::read_json(c)),
                         io::read_depth_pfm(depth, io::NanPolicy::MaskInvalid), std::nullopt});
    }
    refine::ConsistencyConfig cfg;
    cfg.min_views = a.min_views;
    cfg.depth_tol = a.depth_tol;
    io::write_ply(a.out, refine::filter_points(cloud, views, cfg));
}

struct MatchArgs {
    std::string left;
    std::string right;
    std::string labels = "-4:12:0.5";
    int window = 9;
    std::string cost = "zncc";
    std::string sampling = "nearest,bilinear,phase_shift";
    int aggregate = matcher::MatchConfig{}.aggregate_radius;
    double temperature = matcher::MatchConfig{}.softmax_temperature;
    std::string out;
    std::string normals;
    std::string depth_out;
    std::string calib;
    std::string cam;
    int neighborhood = 5;
};

void run_match(const MatchArgs& a)
{
    matcher::MatchConfig cfg;
    cfg.window = a.window;
    cfg.cost = matcher::parse_cost_kind(a.cost);
    cfg.sampling.clear();
    for (const auto& s : split(a.sampling, ','))
        cfg.sampling.push_back(matcher::parse_sampling(trim(s)));
    cfg.aggregate_radius = a.aggregate;
    cfg.softmax_temperature = a.temperature;
    const auto labels = matcher::DisparityLabels::parse(a.labels);
    const bool wants_depth = !a.normals.empty() || !a.depth_out.empty();
    if (wants_depth && (a.calib.empty() || a.cam.empty()))
        fail(ErrorCode::DomainError, "--normals and --depth need --calib and --cam");

    const dpsim::DpImagePair pair(io::read_image(a.left), io::read_image(a.right), dpsim::OpticsConfig{});
    const DisparityMap disp = matcher::match(pair, labels, cfg);
    io::write_pfm(a.out, disp);
    if (!wants_depth)
        return;
    const auto calib = serialize::calibration_from_json(io::read_json(a.calib));
    const auto cam = serialize::camera_from_json(io::read_json(a.cam));
    const DepthMap depth = dpcalib::disparity_to_depth(disp, calib).depth;
    if (!a.depth_out.empty())
        io::write_pfm(a.depth_out, depth);
    if (!a.normals.empty())
        io::write_pfm(a.normals, matcher::normals_from_depth(depth, cam, a.neighborhood));
}

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::string kind = "depth";
    double tau = metrics::kDefaultTau;
    std::string out;
};

void run_eval(const EvalArgs& a)
{
    metrics::MetricReport report;
    if (a.kind == "depth") {
        report = metrics::evaluate_depth(io::read_depth_pfm(a.pred, io::NanPolicy::MaskInvalid),
                                         io::read_depth_pfm(a.gt, io::NanPolicy::MaskInvalid), a.tau);
    } else if (a.kind == "disparity") {
        report = metrics::evaluate_disparity(io::read_disparity_pfm(a.pred, io::NanPolicy::MaskInvalid),
                                             io::read_disparity_pfm(a.gt, io::NanPolicy::MaskInvalid));
    } else if (a.kind == "normal") {
        report = metrics::normal_metrics(io::read_normal_pfm(a.pred, io::NanPolicy::MaskInvalid),
                                         io::read_normal_pfm(a.gt, io::NanPolicy::MaskInvalid));
    } else if (a.kind == "spoof") {
        // Rows: predicted_real, is_real (1 = real, 0 = fake); --gt is unused.
        std::vector<metrics::SpoofSample> samples;
        for (const auto& row : read_csv(a.pred, 2, 2))
            samples.push_back({row[0] != 0.0, row[1] != 0.0});
        report = metrics::spoof_metrics(samples);
    } else {
        fail(ErrorCode::DomainError, "unknown eval kind '" + a.kind + "'");
    }
    io::write_json(a.out, report.to_json());
}

struct PipelineArgs {
    std::string config;
    std::string out;
};

void run_pipeline(const PipelineArgs& a)
{
    const auto cfg = a.config.empty() ? pipeline::PipelineConfig{}
                                      : pipeline::config_from_json(io::read_json(a.config));
    pipeline::write_outputs(pipeline::run(cfg), a.out);
}

void print_error(const std::string& code, const std::string& message)
{
    const json err = {{"error", code}, {"message", message}};
    std::cerr << err.dump() << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dual-pixel depth, structured light and photometric stereo toolkit", "dpface"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (0 = auto)")->check(CLI::NonNegativeNumber);
    app.set_version_flag("--version", kVersion);

    std::function<void()> action;

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Render a synthetic DP scene");
    s->add_option("--scene", sim.scene, "plane | slanted_plane | sphere | checkerboard");
    s->add_option("--optics", sim.optics, "Optics JSON (default: dataset preset)");
    s->add_option("--params", sim.params, "Scene parameter JSON");
    s->add_option("--noise", sim.noise, "Image noise sigma");
    s->add_option("--seed", sim.seed, "Random seed");
    s->add_flag("--emit-samples", sim.emit_samples, "Also write samples.csv for calibration");
    s->add_option("--samples", sim.samples, "Number of calibration samples");
    s->add_option("--sample-noise", sim.sample_noise, "Disparity noise on calibration samples (px)");
    s->add_flag("--split-disc", sim.split_disc, "Use the split-disc PSF");
    s->add_option("--sl-out", sim.sl_out, "Also write structured-light captures here");
    s->add_option("--views-out", sim.views_out, "Also write multi-view depth maps and a cloud here");
    s->add_option("--views", sim.views, "Number of views for --views-out");
    s->add_option("-o,--out", sim.out, "Output directory")->required();
    s->callback([&] { action = [&] { run_simulate(sim); }; });

    CalibrateArgs cal;
    auto* c = app.add_subcommand("calibrate", "Fit the affine inverse-depth/disparity model");
    c->add_option("--samples", cal.samples, "CSV: inv_depth,disparity[,weight]")->required();
    c->add_option("--f", cal.f, "Focal length (m)");
    c->add_option("--fnum", cal.fnum, "F-number");
    c->add_option("--pitch", cal.pitch, "Pixel pitch (m)");
    c->add_option("-o,--out", cal.out, "Output calib.json")->required();
    c->callback([&] { action = [&] { run_calibrate(cal); }; });

    SlGenArgs gen;
    auto* g = app.add_subcommand("sl-gen", "Write structured-light patterns as 16-bit PNG");
    g->add_option("--config", gen.config, "Pattern set JSON");
    g->add_option("-o,--out", gen.out, "Output directory")->required();
    g->callback([&] { action = [&] { run_sl_gen(gen); }; });

    SlDecodeArgs dec;
    auto* d = app.add_subcommand("sl-decode", "Decode captures and triangulate depth");
    d->add_option("--captures", dec.captures, "Directory of captures in pattern order")->required();
    d->add_option("--rig", dec.rig, "Rig JSON (camera + projector)")->required();
    d->add_option("--patterns", dec.patterns, "Pattern set JSON (default: captures/patterns.json)");
    d->add_option("--phase-out", dec.phase_out, "Also write the unwrapped projector columns");
    d->add_option("-o,--out", dec.out, "Output depth PFM")->required();
    d->callback([&] { action = [&] { run_sl_decode(dec); }; });

    PsLightsArgs psl;
    auto* pl = app.add_subcommand("ps-lights", "Light directions from chrome-ball highlights");
    pl->add_option("--ball", psl.ball, "cx,cy,r in pixels")->required();
    pl->add_option("--highlights", psl.highlights, "CSV: hx,hy")->required();
    pl->add_option("-o,--out", psl.out, "Output lights.json")->required();
    pl->callback([&] { action = [&] { run_ps_lights(psl); }; });

    PsSolveArgs pss;
    auto* ps = app.add_subcommand("ps-solve", "Photometric-stereo normals and albedo");
    ps->add_option("--images", pss.images, "Directory of images in light order")->required();
    ps->add_option("--lights", pss.lights, "lights.json")->required();
    ps->add_option("--albedo", pss.albedo, "Output albedo PFM");
    ps->add_option("--shadow", pss.shadow, "Shadow threshold");
    ps->add_option("-o,--out", pss.out, "Output normal PFM")->required();
    ps->callback([&] { action = [&] { run_ps_solve(pss); }; });

    RefineArgs ref;
    auto* r = app.add_subcommand("refine", "Normal-guided depth refinement");
    r->add_option("--depth", ref.depth, "Depth PFM")->required();
    r->add_option("--normal", ref.normal, "Normal PFM")->required();
    r->add_option("--cam", ref.cam, "Camera JSON")->required();
    r->add_option("--lambda", ref.lambda, "Position/normal balance in [0, 1]")->required();
    r->add_option("--tol", ref.tol, "Solver relative tolerance");
    r->add_option("--max-iters", ref.max_iters, "Solver iteration cap");
    r->add_option("--stats", ref.stats, "Write energy and solver statistics JSON");
    r->add_option("-o,--out", ref.out, "Output depth PFM")->required();
    r->callback([&] { action = [&] { run_refine(ref); }; });

    FilterArgs fil;
    auto* f = app.add_subcommand("filter", "Multi-view consistency point filtering");
    f->add_option("--cloud", fil.cloud, "Input PLY")->required();
    f->add_option("--views", fil.views, "Directory of view_*.json cameras with matching .pfm depth")->required();
    f->add_option("--min-views", fil.min_views, "Views required to keep a point");
    f->add_option("--depth-tol", fil.depth_tol, "Depth agreement tolerance (m)");
    f->add_option("-o,--out", fil.out, "Output PLY")->required();
    f->callback([&] { action = [&] { run_filter(fil); }; });

    MatchArgs mat;
    auto* m = app.add_subcommand("match", "DP stereo matching with soft-argmax regression");
    m->add_option("--left", mat.left, "Left view")->required();
    m->add_option("--right", mat.right, "Right view")->required();
    m->add_option("--labels", mat.labels, "min:max:step");
    m->add_option("--window", mat.window, "Odd window size");
    m->add_option("--cost", mat.cost, "sad | zncc");
    m->add_option("--sampling", mat.sampling, "Comma list of nearest,bilinear,phase_shift");
    m->add_option("--aggregate", mat.aggregate, "Box aggregation radius");
    m->add_option("--temperature", mat.temperature, "Softmax temperature");
    m->add_option("--normals", mat.normals, "Also write normals (needs --calib, --cam)");
    m->add_option("--depth", mat.depth_out, "Also write depth (needs --calib, --cam)");
    m->add_option("--calib", mat.calib, "calib.json");
    m->add_option("--cam", mat.cam, "Camera JSON");
    m->add_option("--neighborhood", mat.neighborhood, "Normal plane-fit window");
    m->add_option("-o,--out", mat.out, "Output disparity PFM")->required();
    m->callback([&] { action = [&] { run_match(mat); }; });

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Evaluate a prediction against ground truth");
    e->add_option("--pred", ev.pred, "Prediction (PFM; CSV for spoof)")->required();
    e->add_option("--gt", ev.gt, "Ground truth PFM");
    e->add_option("--kind", ev.kind, "depth | disparity | normal | spoof");
    e->add_option("--tau", ev.tau, "Delta threshold base");
    e->add_option("-o,--out", ev.out, "Output report.json")->required();
    e->callback([&] { action = [&] { run_eval(ev); }; });

    PipelineArgs pipe;
    auto* p = app.add_subcommand("pipeline", "End-to-end synthetic run");
    p->add_option("--config", pipe.config, "Pipeline config JSON (default settings if omitted)");
    p->add_option("-o,--out", pipe.out, "Output directory")->required();
    p->callback([&] { action = [&] { run_pipeline(pipe); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& ok) {
        return app.exit(ok);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return 2;
    }
    if (ev.kind != "spoof" && ev.gt.empty() && e->parsed()) {
        std::cerr << "eval: --gt is required for kind " << ev.kind << '\n';
        return 2;
    }

    try {
        set_thread_count(threads);
        action();
    } catch (const Error& err) {
        print_error(std::string(to_string(err.code())), err.what());
        return 1;
    } catch (const std::exception& err) {
        print_error("InternalError", err.what());
        return 1;
    }
    return 0;
}
