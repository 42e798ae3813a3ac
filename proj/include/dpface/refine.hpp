#pragma once

// Multi-view consistency filtering of point clouds and normal-guided depth
// refinement.

#include <cstddef>
#include <optional>
#include <span>

#include "dpface/camera.hpp"
#include "dpface/image.hpp"

namespace dpface::refine {

struct ConsistencyConfig {
    double depth_tol = 0.005; ///< meters
    int min_views = 3;
    /// Intensity agreement with the per-point median across agreeing views.
    std::optional<double> photo_tol;
    void validate() const;
};

struct View {
    PinholeCamera camera;
    DepthMap depth;
    /// Needed only when photo_tol is set.
    std::optional<ImageF> image;
};

/// Number of views in which a world point is visible and depth-consistent
/// (photometric agreement included when configured).
int consistent_views(const Eigen::Vector3d& point, std::span<const View> views, const ConsistencyConfig& cfg);

/// Keeps points seen consistently in at least min_views views, preserving order.
PointCloud filter_points(const PointCloud& cloud, std::span<const View> views, const ConsistencyConfig& cfg);

struct RefineConfig {
    double lambda = 0.1;
    double solver_tol = 1e-10;
    int max_iters = 2000;
    void validate() const;
};

struct RefineResult {
    DepthMap depth;
    double energy_before = 0.0;
    double energy_after = 0.0;
    bool converged = true;
    int iterations = 0;
    double residual = 0.0; ///< relative residual reached by the solver
    std::size_t masked_nonpositive = 0;
};

/// E = λ Σ ‖X_p − X_p^m‖² + (1 − λ) Σ [(T_x·N_p)² + (T_y·N_p)²] with X_p = z_p·ray_p
/// and T forward differences (backward where the forward neighbor is invalid).
/// Only pixels valid in both depth and normals take part.
double refine_energy(std::span<const double> z, const DepthMap& measured, const NormalMap& normals,
                     const PinholeCamera& cam, double lambda);

/// Minimizes E over per-pixel depth along fixed rays. The result never has a
/// higher energy than the input.
RefineResult refine_depth(const DepthMap& depth, const NormalMap& normals, const PinholeCamera& cam,
                          const RefineConfig& cfg);

} // namespace dpface::refine
