#pragma once

// Dual-pixel forward model: signed defocus disparity from depth and rendering
// of the left/right sub-aperture views.
//
// Sign convention: surfaces behind the focus plane (Z > g) have d > 0, and the
// left view is displaced by +d/2 along x while the right view is displaced by
// -d/2, so left(x) ~ right(x - d).

#include <cstdint>

#include "dpface/camera.hpp"
#include "dpface/image.hpp"

namespace dpface::dpsim {

struct OpticsConfig {
    double focal_length = 0.135;  ///< f, meters
    double f_number = 5.6;        ///< N
    double focus_distance = 0.97; ///< g, meters
    double pixel_pitch = 5.36e-6; ///< meters per pixel
    double alpha = 1.0;           ///< disparity per unit signed blur

    /// Throws DomainError unless f > 0, N > 0, g > f and pitch > 0.
    void validate() const;

    /// Aperture diameter L = f / N.
    double aperture() const { return focal_length / f_number; }
    /// α·L·f / (1 − f/g) / pitch, so that d = blur_gain() · (1/g − 1/Z) in pixels.
    double blur_gain() const;

    /// Defaults with α chosen so the 0.80–1.10 m working volume lands inside
    /// the −12…32 px disparity range.
    static OpticsConfig dataset_preset();
};

/// Largest α (> 0) for which depths in [z_near, z_far] map inside [d_min, d_max].
double alpha_for_range(OpticsConfig optics, double z_near, double z_far, double d_min, double d_max);

double signed_blur(double z, const OpticsConfig& optics);
DisparityMap signed_blur(const DepthMap& depth, const OpticsConfig& optics);

struct DpImagePair {
    ImageF left;
    ImageF right;
    OpticsConfig optics;

    DpImagePair(ImageF left_view, ImageF right_view, OpticsConfig config);
};

enum class PsfShape {
    /// Each view sees the disc inscribed in its half of the defocus disc
    /// (radius |d|/2 centered at ±d/2). The two views are exact translates.
    InscribedDisc,
    /// Defocus disc split along the vertical diameter; the radius is 3π|d|/8
    /// so each half's centroid sits at ±d/2.
    SplitDisc,
};

struct RenderOptions {
    PsfShape psf = PsfShape::InscribedDisc;
    /// Subsamples per pixel side used to rasterize kernels.
    int supersample = 8;
    /// Optional additive Gaussian noise (same seed ⇒ same output).
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

/// Kernel radii below this (px) render as the identity.
inline constexpr double kIdentityRadius = 0.5;

/// Renders the DP pair for a per-pixel disparity map. Invalid disparity pixels
/// are treated as in focus. A 3-channel image is converted to luminance.
DpImagePair render_dp(const ImageF& image, const DisparityMap& disparity, const OpticsConfig& optics,
                      const RenderOptions& options = {});
/// Same, with disparity computed by signed_blur(depth).
DpImagePair render_dp(const ImageF& image, const DepthMap& depth, const OpticsConfig& optics,
                      const RenderOptions& options = {});

/// Left-view gather kernel for disparity d (the right view uses its x-mirror).
/// Weights sum to one; `offset_x/offset_y` give the integer offset of weights[0].
struct BlurKernel {
    int offset_x = 0;
    int offset_y = 0;
    int width = 1;
    int height = 1;
    std::vector<double> weights{1.0};
};
BlurKernel make_left_kernel(double d, PsfShape shape, int supersample = 8);

// ---- synthetic scenes ------------------------------------------------------

enum class SceneKind { Plane, SlantedPlane, Sphere, CheckerboardTarget };

struct SceneParams {
    int width = 256;
    int height = 256;
    double fx = 1200.0;
    double fy = 1200.0;
    double cx = 127.5;
    double cy = 127.5;
    /// Plane: z = plane_depth + slope_x·X + slope_y·Y (X, Y metric camera coordinates).
    double plane_depth = 1.0;
    double slope_x = 0.1;
    double slope_y = 0.0;
    Eigen::Vector3d sphere_center{0.0, 0.0, 1.0};
    double sphere_radius = 0.1;
    int checker_size = 16;
    /// Texture: Gaussian-smoothed white noise.
    double texture_sigma = 1.0;
    std::uint64_t seed = 1;

    PinholeCamera camera() const;
};

struct TestScene {
    ImageF image;
    DepthMap depth;
    NormalMap normals;
};

TestScene make_test_scene(SceneKind kind, const SceneParams& params);

/// Camera-frame depth of the scene surface seen from an arbitrary camera. The
/// scene is defined in the frame of `params.camera()` (world frame).
DepthMap raycast_depth(SceneKind kind, const SceneParams& params, const PinholeCamera& cam, int width, int height);

/// Seeded smoothed-noise texture normalized to [0.1, 0.9].
ImageF make_texture(int width, int height, double sigma, std::uint64_t seed);

} // namespace dpface::dpsim
