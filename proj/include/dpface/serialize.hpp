#pragma once

// JSON records for configurations, calibrations and rigs. Readers fill
// missing keys with defaults and raise ParseError on wrong types.

#include <optional>

#include <json.hpp>

#include "dpface/camera.hpp"
#include "dpface/dpcalib.hpp"
#include "dpface/dpsim.hpp"
#include "dpface/matcher.hpp"
#include "dpface/photostereo.hpp"
#include "dpface/refine.hpp"
#include "dpface/slight.hpp"

namespace dpface::serialize {

using nlohmann::json;

json to_json(const dpsim::OpticsConfig& optics);
dpsim::OpticsConfig optics_from_json(const json& j);

json to_json(const dpcalib::DpCalibration& calib, std::optional<double> residual_rms = std::nullopt);
dpcalib::DpCalibration calibration_from_json(const json& j);

json to_json(const PinholeCamera& cam);
PinholeCamera camera_from_json(const json& j);

json to_json(const slight::Rig& rig);
slight::Rig rig_from_json(const json& j);

json to_json(const slight::PatternSet& cfg);
slight::PatternSet patterns_from_json(const json& j);

json to_json(const photostereo::LightSet& lights);
photostereo::LightSet lights_from_json(const json& j);

json to_json(const matcher::DisparityLabels& labels);
matcher::DisparityLabels labels_from_json(const json& j);

json to_json(const matcher::MatchConfig& cfg);
matcher::MatchConfig match_config_from_json(const json& j);

json to_json(const refine::RefineConfig& cfg);
refine::RefineConfig refine_config_from_json(const json& j);

std::string_view to_string(dpsim::SceneKind kind);
dpsim::SceneKind scene_kind_from_string(std::string_view text);

json to_json(const dpsim::SceneParams& params);
dpsim::SceneParams scene_params_from_json(const json& j);

/// Runs `fn`, converting JSON library exceptions into ParseError.
template <class Fn>
auto guarded(Fn&& fn) -> decltype(fn());

} // namespace dpface::serialize

#include "dpface/error.hpp"

template <class Fn>
auto dpface::serialize::guarded(Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("invalid JSON record: ") + e.what());
    }
}
