#include "dpface/serialize.hpp"

#include <string>

#include "dpface/error.hpp"

namespace dpface::serialize {

namespace {

template <class T>
T get(const json& j, const char* key, T fallback)
{
    if (!j.is_object())
        fail(ErrorCode::ParseError, "expected a JSON object");
    const auto it = j.find(key);
    if (it == j.end())
        return fallback;
    return guarded([&] { return it->template get<T>(); });
}

json vec3(const Eigen::Vector3d& v)
{
    return json::array({v.x(), v.y(), v.z()});
}

Eigen::Vector3d vec3_from(const json& j)
{
    if (!j.is_array() || j.size() != 3)
        fail(ErrorCode::ParseError, "expected a 3-element array");
    return guarded([&] { return Eigen::Vector3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>()); });
}

} // namespace

json to_json(const dpsim::OpticsConfig& o)
{
    return {{"focal_length", o.focal_length}, {"f_number", o.f_number}, {"focus_distance", o.focus_distance},
            {"pixel_pitch", o.pixel_pitch}, {"alpha", o.alpha}};
}

dpsim::OpticsConfig optics_from_json(const json& j)
{
    dpsim::OpticsConfig o;
    o.focal_length = get(j, "focal_length", o.focal_length);
    o.f_number = get(j, "f_number", o.f_number);
    o.focus_distance = get(j, "focus_distance", o.focus_distance);
    o.pixel_pitch = get(j, "pixel_pitch", o.pixel_pitch);
    o.alpha = get(j, "alpha", o.alpha);
    o.validate();
    return o;
}

json to_json(const dpcalib::DpCalibration& c, std::optional<double> residual_rms)
{
    json j = {{"A", c.A}, {"B", c.B}, {"f", c.f}, {"N", c.N}, {"g", c.g}, {"L", c.L}, {"alpha", c.alpha},
              {"pixel_pitch", c.pixel_pitch}};
    if (residual_rms)
        j["residual_rms"] = *residual_rms;
    return j;
}

dpcalib::DpCalibration calibration_from_json(const json& j)
{
    dpcalib::DpCalibration c;
    for (const char* key : {"A", "B", "f", "N", "g", "L", "alpha", "pixel_pitch"})
        if (!j.is_object() || !j.contains(key))
            fail(ErrorCode::ParseError, std::string("calibration is missing '") + key + "'");
    c.A = get(j, "A", 0.0);
    c.B = get(j, "B", 0.0);
    c.f = get(j, "f", 0.0);
    c.N = get(j, "N", 0.0);
    c.g = get(j, "g", 0.0);
    c.L = get(j, "L", 0.0);
    c.alpha = get(j, "alpha", 0.0);
    c.pixel_pitch = get(j, "pixel_pitch", 0.0);
    c.validate();
    return c;
}

json to_json(const PinholeCamera& cam)
{
    const auto& r = cam.pose().rotation;
    json rot = json::array();
    for (int i = 0; i < 3; ++i)
        rot.push_back(json::array({r(i, 0), r(i, 1), r(i, 2)}));
    return {{"fx", cam.fx()}, {"fy", cam.fy()}, {"cx", cam.cx()}, {"cy", cam.cy()}, {"rotation", rot},
            {"translation", vec3(cam.pose().translation)}};
}

PinholeCamera camera_from_json(const json& j)
{
    for (const char* key : {"fx", "fy", "cx", "cy"})
        if (!j.is_object() || !j.contains(key))
            fail(ErrorCode::ParseError, std::string("camera is missing '") + key + "'");
    RigidTransform pose;
    if (j.contains("rotation")) {
        const json& r = j["rotation"];
        if (!r.is_array() || r.size() != 3)
            fail(ErrorCode::ParseError, "rotation must be a 3x3 array");
        for (int i = 0; i < 3; ++i)
            pose.rotation.row(i) = vec3_from(r[std::size_t(i)]).transpose();
    }
    if (j.contains("translation"))
        pose.translation = vec3_from(j["translation"]);
    return PinholeCamera(get(j, "fx", 0.0), get(j, "fy", 0.0), get(j, "cx", 0.0), get(j, "cy", 0.0), pose);
}

json to_json(const slight::Rig& rig)
{
    json cam = to_json(rig.camera);
    cam["width"] = rig.camera_width;
    cam["height"] = rig.camera_height;
    return {{"camera", cam}, {"projector", to_json(rig.projector)}};
}

slight::Rig rig_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("camera") || !j.contains("projector"))
        fail(ErrorCode::ParseError, "rig needs 'camera' and 'projector'");
    slight::Rig rig;
    rig.camera = camera_from_json(j["camera"]);
    rig.projector = camera_from_json(j["projector"]);
    rig.camera_width = get(j["camera"], "width", rig.camera_width);
    rig.camera_height = get(j["camera"], "height", rig.camera_height);
    return rig;
}

json to_json(const slight::PatternSet& cfg)
{
    json orient = json::array();
    for (auto o : cfg.orientations)
        orient.push_back(o == slight::Orientation::Horizontal ? "horizontal" : "vertical");
    return {{"gray_bits", cfg.gray_bits}, {"orientations", orient}, {"phase_steps", cfg.phase_steps},
            {"phase_period", cfg.phase_period}, {"proj_width", cfg.proj_width}, {"proj_height", cfg.proj_height}};
}

slight::PatternSet patterns_from_json(const json& j)
{
    slight::PatternSet cfg;
    cfg.gray_bits = get(j, "gray_bits", cfg.gray_bits);
    cfg.phase_steps = get(j, "phase_steps", cfg.phase_steps);
    cfg.phase_period = get(j, "phase_period", cfg.phase_period);
    cfg.proj_width = get(j, "proj_width", cfg.proj_width);
    cfg.proj_height = get(j, "proj_height", cfg.proj_height);
    if (j.contains("orientations")) {
        cfg.orientations.clear();
        for (const auto& name : get(j, "orientations", std::vector<std::string>{})) {
            if (name == "horizontal")
                cfg.orientations.push_back(slight::Orientation::Horizontal);
            else if (name == "vertical")
                cfg.orientations.push_back(slight::Orientation::Vertical);
            else
                fail(ErrorCode::ParseError, "unknown orientation '" + name + "'");
        }
    }
    cfg.validate();
    return cfg;
}

json to_json(const photostereo::LightSet& lights)
{
    json dirs = json::array();
    for (const auto& l : lights.directions)
        dirs.push_back(vec3(l));
    return {{"directions", dirs}};
}

photostereo::LightSet lights_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("directions") || !j["directions"].is_array())
        fail(ErrorCode::ParseError, "lights need a 'directions' array");
    photostereo::LightSet lights;
    for (const auto& d : j["directions"])
        lights.directions.push_back(vec3_from(d));
    lights.validate();
    return lights;
}

json to_json(const matcher::DisparityLabels& l)
{
    return {{"d_min", l.d_min}, {"d_max", l.d_max}, {"count", l.count}};
}

matcher::DisparityLabels labels_from_json(const json& j)
{
    matcher::DisparityLabels l;
    l.d_min = get(j, "d_min", l.d_min);
    l.d_max = get(j, "d_max", l.d_max);
    l.count = get(j, "count", l.count);
    l.validate();
    return l;
}

json to_json(const matcher::MatchConfig& c)
{
    json sampling = json::array();
    for (auto s : c.sampling)
        sampling.push_back(std::string(matcher::to_string(s)));
    return {{"window", c.window}, {"cost", std::string(matcher::to_string(c.cost))}, {"sampling", sampling},
            {"aggregate_radius", c.aggregate_radius}, {"softmax_temperature", c.softmax_temperature}};
}

matcher::MatchConfig match_config_from_json(const json& j)
{
    matcher::MatchConfig c;
    c.window = get(j, "window", c.window);
    c.cost = matcher::parse_cost_kind(get(j, "cost", std::string(matcher::to_string(c.cost))));
    if (j.contains("sampling")) {
        c.sampling.clear();
        for (const auto& s : get(j, "sampling", std::vector<std::string>{}))
            c.sampling.push_back(matcher::parse_sampling(s));
    }
    c.aggregate_radius = get(j, "aggregate_radius", c.aggregate_radius);
    c.softmax_temperature = get(j, "softmax_temperature", c.softmax_temperature);
    c.validate();
    return c;
}

json to_json(const refine::RefineConfig& c)
{
    return {{"lambda", c.lambda}, {"solver_tol", c.solver_tol}, {"max_iters", c.max_iters}};
}

refine::RefineConfig refine_config_from_json(const json& j)
{
    refine::RefineConfig c;
    c.lambda = get(j, "lambda", c.lambda);
    c.solver_tol = get(j, "solver_tol", c.solver_tol);
    c.max_iters = get(j, "max_iters", c.max_iters);
    c.validate();
    return c;
}

std::string_view to_string(dpsim::SceneKind kind)
{
    switch (kind) {
    case dpsim::SceneKind::Plane: return "plane";
    case dpsim::SceneKind::SlantedPlane: return "slanted_plane";
    case dpsim::SceneKind::Sphere: return "sphere";
    case dpsim::SceneKind::CheckerboardTarget: return "checkerboard";
    }
    return "?";
}

dpsim::SceneKind scene_kind_from_string(std::string_view text)
{
    for (auto k : {dpsim::SceneKind::Plane, dpsim::SceneKind::SlantedPlane, dpsim::SceneKind::Sphere,
                   dpsim::SceneKind::CheckerboardTarget})
        if (text == to_string(k))
            return k;
    fail(ErrorCode::ParseError, "unknown scene kind '" + std::string(text) + "'");
}

json to_json(const dpsim::SceneParams& p)
{
    return {{"width", p.width}, {"height", p.height}, {"fx", p.fx}, {"fy", p.fy}, {"cx", p.cx}, {"cy", p.cy},
            {"plane_depth", p.plane_depth}, {"slope_x", p.slope_x}, {"slope_y", p.slope_y},
            {"sphere_center", vec3(p.sphere_center)}, {"sphere_radius", p.sphere_radius},
            {"checker_size", p.checker_size}, {"texture_sigma", p.texture_sigma}, {"seed", p.seed}};
}

dpsim::SceneParams scene_params_from_json(const json& j)
{
    dpsim::SceneParams p;
    p.width = get(j, "width", p.width);
    p.height = get(j, "height", p.height);
    p.fx = get(j, "fx", p.fx);
    p.fy = get(j, "fy", p.fy);
    p.cx = get(j, "cx", p.cx);
    p.cy = get(j, "cy", p.cy);
    p.plane_depth = get(j, "plane_depth", p.plane_depth);
    p.slope_x = get(j, "slope_x", p.slope_x);
    p.slope_y = get(j, "slope_y", p.slope_y);
    if (j.is_object() && j.contains("sphere_center"))
        p.sphere_center = vec3_from(j["sphere_center"]);
    p.sphere_radius = get(j, "sphere_radius", p.sphere_radius);
    p.checker_size = get(j, "checker_size", p.checker_size);
    p.texture_sigma = get(j, "texture_sigma", p.texture_sigma);
    p.seed = get(j, "seed", p.seed);
    return p;
}

} // namespace dpface::serialize
