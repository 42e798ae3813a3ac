#pragma once

// Photometric stereo with chrome-ball light calibration.
//
// Light directions live in the photometric frame: x right, y down (image
// axes) and z toward the camera, so a light on the optical axis behind the
// camera is (0, 0, 1). Normals returned by solve_normals are converted to the
// repo camera convention (see NormalMap); the two frames differ by
// diag(-1, -1, 1).

#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dpface/image.hpp"

namespace dpface::photostereo {

struct ChromeBall {
    double cx = 0.0;
    double cy = 0.0;
    double r = 1.0;
};

struct LightSet {
    static constexpr double kUnitTolerance = 1e-9;
    std::vector<Eigen::Vector3d> directions;
    /// Unit length and at least one entry; rank is checked by the solver.
    void validate() const;
};

/// Mirror reflection of the view vector (0, 0, 1) about the ball normal at h.
Eigen::Vector3d light_from_highlight(const ChromeBall& ball, double hx, double hy);

/// Maps between photometric-frame and stored camera-convention normals.
Eigen::Vector3d to_camera_normal(const Eigen::Vector3d& ps);
Eigen::Vector3d to_photometric_normal(const Eigen::Vector3d& cam);

struct SolveOptions {
    /// Observations at or below this are shadowed.
    double shadow_threshold = 0.05;
    /// Observations at or above this are dropped as highlights; off by default.
    double highlight_threshold = std::numeric_limits<double>::infinity();
};

struct PsResult {
    NormalMap normals;
    ImageF albedo; ///< 0 where masked
};

/// Per-pixel least squares I = L·(ρN) over the lit rows. When the lit rows
/// alone are rank-deficient, shadowed rows are re-admitted as I = 0
/// equations and the solution is kept only if it predicts those rows as
/// shadowed. Pixels without a rank-3 system or with ρ = 0 are masked.
PsResult solve_normals(std::span<const ImageF> images, const LightSet& lights, const SolveOptions& options = {});

/// Lambertian rendering ρ·max(0, L·N) of camera-convention normals.
std::vector<ImageF> render_lambertian(const NormalMap& normals, const ImageF& albedo, const LightSet& lights);

} // namespace dpface::photostereo
