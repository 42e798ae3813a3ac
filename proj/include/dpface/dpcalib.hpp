#pragma once

// Affine inverse-depth <-> disparity calibration: d = A + B / Z.

#include <span>
#include <utility>

#include "dpface/dpsim.hpp"
#include "dpface/image.hpp"

namespace dpface::dpcalib {

struct DpCalibration {
    double A = 0.0;           ///< bias, pixels
    double B = 0.0;           ///< slope, pixels·meters
    double f = 0.0;           ///< focal length, meters
    double N = 0.0;           ///< f-number
    double g = 0.0;           ///< focus distance, meters (= -B / A)
    double L = 0.0;           ///< aperture diameter, meters (= f / N)
    double alpha = 0.0;
    double pixel_pitch = 0.0; ///< meters per pixel

    /// Throws DomainError when B == 0 or the derived quantities disagree.
    void validate() const;

    /// Exact calibration implied by a forward-model configuration.
    static DpCalibration from_optics(const dpsim::OpticsConfig& optics);
};

struct CalibSample {
    double inv_depth = 0.0; ///< 1/meters
    double disparity = 0.0; ///< pixels
    double weight = 1.0;
};

struct CalibrationFit {
    DpCalibration calibration;
    double residual_rms = 0.0; ///< weighted RMS of d - (A + B/Z), pixels
};

/// Weighted least-squares fit of d = A + B·(1/Z), then g = -B/A, L = f/N and
/// α from B = -α·L·f/(1 - f/g)/pitch.
CalibrationFit fit_affine(std::span<const CalibSample> samples, double f, double f_number, double pixel_pitch);

inline constexpr double kDivisionGuard = 1e-9;

struct DepthConversion {
    DepthMap depth;
    std::size_t masked_singular = 0;    ///< dropped at the focal-plane pole
    std::size_t masked_nonpositive = 0; ///< dropped because Z <= 0
};

/// Z = B / (d - A); pixels with |d - A| < eps or Z <= 0 are masked.
DepthConversion disparity_to_depth(const DisparityMap& d, const DpCalibration& calib, double eps = kDivisionGuard);
/// d = A + B / Z on valid pixels.
DisparityMap depth_to_disparity(const DepthMap& z, const DpCalibration& calib);

double disparity_at(double z, const DpCalibration& calib);
double depth_at(double d, const DpCalibration& calib);

/// Sub-pixel saddle point: least-squares quadratic surface over a
/// `window`×`window` patch (odd, >= 5) centered on the rounded initial guess.
/// Throws NotASaddle when the Hessian is not indefinite and Diverged when the
/// stationary point leaves the window.
std::pair<double, double> refine_saddle(const ImageF& image, std::pair<double, double> initial, int window);

} // namespace dpface::dpcalib
