#include <doctest.h>

#include "dpface/pipeline.hpp"
#include "dpface/serialize.hpp"
#include "support.hpp"

using namespace dpface;
using namespace dpface::serialize;

TEST_CASE("optics and calibration round trip")
{
    dpsim::OpticsConfig o;
    o.alpha = 0.25;
    o.focus_distance = 1.1;
    const auto o2 = optics_from_json(to_json(o));
    CHECK(o2.alpha == o.alpha);
    CHECK(o2.focus_distance == o.focus_distance);
    const auto c = dpcalib::DpCalibration::from_optics(o);
    const auto c2 = calibration_from_json(json::parse(to_json(c, 0.01).dump()));
    CHECK(c2.A == c.A);
    CHECK(c2.B == c.B);
    CHECK(c2.g == c.g);
    CHECK(c2.alpha == c.alpha);
}

TEST_CASE("calibration needs every key")
{
    auto j = to_json(dpcalib::DpCalibration::from_optics(dpsim::OpticsConfig{}));
    j.erase("g");
    CHECK_CODE(calibration_from_json(j), ErrorCode::ParseError);
}

TEST_CASE("camera and rig round trip")
{
    const auto rig = slight::make_default_rig(0.12, 0.9);
    const auto r2 = rig_from_json(json::parse(to_json(rig).dump()));
    CHECK(r2.camera_width == rig.camera_width);
    CHECK(r2.projector.fx() == rig.projector.fx());
    CHECK((r2.projector.pose().rotation - rig.projector.pose().rotation).norm() == 0.0);
    CHECK((r2.projector.pose().translation - rig.projector.pose().translation).norm() == 0.0);
}

TEST_CASE("camera with a non-orthonormal rotation is rejected")
{
    auto j = to_json(PinholeCamera(100, 100, 1, 1));
    j["rotation"][0][0] = 2.0;
    CHECK_CODE(camera_from_json(j), ErrorCode::DomainError);
}

TEST_CASE("pattern set, lights, labels and configs round trip")
{
    slight::PatternSet ps;
    ps.gray_bits = 5;
    ps.orientations = {slight::Orientation::Vertical};
    const auto ps2 = patterns_from_json(to_json(ps));
    CHECK(ps2.gray_bits == 5);
    CHECK(ps2.orientations == ps.orientations);

    const auto lights = pipeline::random_lights(4, 2);
    const auto l2 = lights_from_json(json::parse(to_json(lights).dump()));
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(l2.directions[i] == lights.directions[i]);

    matcher::MatchConfig mc;
    mc.cost = matcher::CostKind::SAD;
    mc.sampling = {matcher::Sampling::PhaseShift};
    const auto mc2 = match_config_from_json(to_json(mc));
    CHECK(mc2.cost == mc.cost);
    CHECK(mc2.sampling == mc.sampling);

    refine::RefineConfig rc{0.3, 1e-9, 100};
    CHECK(refine_config_from_json(to_json(rc)).lambda == 0.3);
}

TEST_CASE("missing keys take defaults, wrong types are parse errors")
{
    const auto o = optics_from_json(json::object());
    CHECK(o.focal_length == dpsim::OpticsConfig{}.focal_length);
    CHECK_CODE(optics_from_json(json{{"focal_length", "long"}}), ErrorCode::ParseError);
    CHECK_CODE(scene_kind_from_string("cube"), ErrorCode::ParseError);
}

TEST_CASE("pipeline config round trip")
{
    pipeline::PipelineConfig cfg;
    cfg.scene = dpsim::SceneKind::Sphere;
    cfg.seed = 77;
    cfg.light_count = 12;
    const auto back = pipeline::config_from_json(json::parse(pipeline::to_json(cfg).dump()));
    CHECK(back.scene == cfg.scene);
    CHECK(back.seed == 77);
    CHECK(back.light_count == 12);
    CHECK(pipeline::to_json(back) == pipeline::to_json(cfg));
}
