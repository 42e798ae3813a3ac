#pragma once

// Deterministic end-to-end synthetic run: calibration, DP rendering and
// matching, depth and normals, refinement, structured light, photometric
// stereo, multi-view filtering and evaluation.

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "dpface/dpsim.hpp"
#include "dpface/matcher.hpp"
#include "dpface/photostereo.hpp"
#include "dpface/refine.hpp"
#include "dpface/slight.hpp"

namespace dpface::pipeline {

struct PipelineConfig {
    dpsim::SceneKind scene = dpsim::SceneKind::SlantedPlane;
    dpsim::SceneParams scene_params;
    dpsim::OpticsConfig optics = dpsim::OpticsConfig::dataset_preset();
    matcher::DisparityLabels labels;
    matcher::MatchConfig match;
    refine::RefineConfig refine;
    slight::PatternSet patterns;
    int normal_neighborhood = 5;
    int calibration_samples = 20;
    double calibration_noise = 0.05; ///< px
    double render_noise = 0.0;
    int light_count = 10;
    int filter_views = 5;
    double outlier_fraction = 0.02;
    std::uint64_t seed = 1;

    void validate() const;
};

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig config_from_json(const nlohmann::json& j);

struct PipelineResult {
    DisparityMap disparity;
    DepthMap depth; ///< refined
    NormalMap normals;
    nlohmann::json report;
};

// ---- synthetic helpers shared with the tests --------------------------------

/// Seeded unit light directions within `max_polar_deg` of the photometric +z axis.
photostereo::LightSet random_lights(int count, std::uint64_t seed, double max_polar_deg = 45.0);

/// `count` views: the scene camera plus cameras on a ring of radius `baseline`
/// around it, all aimed at the scene center, each with a ray-cast depth map.
std::vector<refine::View> ring_views(dpsim::SceneKind kind, const dpsim::SceneParams& params, int count,
                                     double baseline = 0.05);

/// Distance from a world point to the scene surface.
double surface_distance(dpsim::SceneKind kind, const dpsim::SceneParams& params, const Eigen::Vector3d& p);

struct LabeledCloud {
    PointCloud cloud;
    std::vector<char> outlier;
};

/// Points back-projected from `depth` (every `stride`-th pixel) plus outliers
/// drawn uniformly in the inlier bounding box enlarged by `margin`, rejected
/// when closer than `min_offset` to the surface. Outliers are appended last.
LabeledCloud cloud_with_outliers(dpsim::SceneKind kind, const dpsim::SceneParams& params, const DepthMap& depth,
                                 double outlier_fraction, double min_offset, std::uint64_t seed, int stride = 1,
                                 double margin = 0.05);

PipelineResult run(const PipelineConfig& cfg);

/// Writes disp.pfm, depth.pfm, normal.pfm and report.json.
void write_outputs(const PipelineResult& result, const std::filesystem::path& dir);

} // namespace dpface::pipeline
