#pragma once

// Structured light: inverse gray code plus phase shifting, decoding to
// unwrapped projector coordinates, and ray-plane triangulation.
//
// Horizontal coding varies along projector x and encodes columns; vertical
// coding encodes rows. Per orientation the stack is
//   gray codes (MSB first), their inverses, then phase shots
//   I_k = 0.5 + 0.5 cos(2π p / period − 2π k / K).
// The phase period equals the gray stripe width, so a band index plus the
// wrapped phase determine a unique projector coordinate.

#include <cstdint>
#include <span>
#include <vector>

#include "dpface/camera.hpp"
#include "dpface/image.hpp"

namespace dpface::slight {

enum class Orientation { Horizontal, Vertical };

struct PatternSet {
    int gray_bits = 6;
    std::vector<Orientation> orientations{Orientation::Horizontal, Orientation::Vertical};
    int phase_steps = 8;
    /// 0 selects the stripe width of each orientation; any other value must equal it.
    int phase_period = 0;
    int proj_width = 1024;
    int proj_height = 768;

    void validate() const;
    int extent(Orientation o) const { return o == Orientation::Horizontal ? proj_width : proj_height; }
    /// ceil(extent / 2^gray_bits)
    int stripe_width(Orientation o) const;
    int period(Orientation o) const { return stripe_width(o); }
    int images_per_orientation() const { return 2 * gray_bits + phase_steps; }
    int image_count() const { return int(orientations.size()) * images_per_orientation(); }
};

std::uint32_t gray_encode(std::uint32_t binary);
std::uint32_t gray_decode(std::uint32_t gray);

/// Pattern value at projector pixel (px, py) for image `index` of the stack.
double pattern_value(const PatternSet& cfg, int index, double px, double py);
ImageF generate_pattern(const PatternSet& cfg, int index);
std::vector<ImageF> generate_patterns(const PatternSet& cfg);

struct BandMap {
    int width = 0;
    int height = 0;
    std::vector<int> band;
    Mask mask;
};

struct WrappedPhase {
    int width = 0;
    int height = 0;
    std::vector<double> phase; ///< [0, 2π)
    std::vector<double> amplitude;
    Mask mask;
};

struct PhaseField {
    int width = 0;
    int height = 0;
    Orientation orientation = Orientation::Horizontal;
    double period = 0.0;
    std::vector<double> unwrapped; ///< projector pixels
    Mask mask;
    std::size_t valid_count() const;
};

inline constexpr double kContrastThreshold = 0.02;
inline constexpr double kAmplitudeThreshold = 0.02;

/// Bits come from code > inverse; any bit with |code − inverse| below the
/// threshold masks the pixel.
BandMap decode_gray(std::span<const ImageF> codes, std::span<const ImageF> inverses,
                    double contrast_threshold = kContrastThreshold);

WrappedPhase decode_phase(std::span<const ImageF> shots, double amplitude_threshold = kAmplitudeThreshold);

struct UnwrapOptions {
    Orientation orientation = Orientation::Horizontal;
    double period = 16.0;
    /// Projector extent along the coded axis; values outside [0, extent) are masked.
    double extent = 1024.0;
    /// Neighbors on each side along the camera axis used for band correction.
    int correction_radius = 2;
};

/// Naive unwrap (band + φ/2π)·period, then a ±period correction against the
/// median of the pixel and its neighbors along the camera x axis (horizontal) or y axis
/// (vertical). Pixels still off by more than one band are masked.
PhaseField unwrap(const BandMap& bands, const WrappedPhase& wrapped, const UnwrapOptions& options);

/// Decodes every orientation of a capture stack in generation order.
std::vector<PhaseField> decode_stack(std::span<const ImageF> captures, const PatternSet& cfg);

/// Intersects each camera ray with the projector plane of its decoded
/// coordinate. Depth is camera-frame z; non-positive, non-finite and
/// near-parallel cases are masked.
DepthMap triangulate(const PhaseField& field, const PinholeCamera& cam, const PinholeCamera& proj);

struct Rig {
    PinholeCamera camera;
    PinholeCamera projector;
    int camera_width = 256;
    int camera_height = 256;
};

/// Camera at the origin looking down +z; projector `baseline` meters along +x,
/// aimed at the point `target_depth` on the optical axis.
Rig make_default_rig(double baseline = 0.1, double target_depth = 1.0);

struct CaptureOptions {
    double ambient = 0.0;
    double gain = 1.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

/// Synthetic captures of a scene: each valid camera pixel is back-projected,
/// projected into the projector and the pattern evaluated there. Gray codes are
/// constant over projector pixels; the sinusoids are continuous.
std::vector<ImageF> render_captures(const PatternSet& cfg, const DepthMap& depth, const Rig& rig,
                                    const CaptureOptions& options = {});

/// Continuous projector coordinate seen by each valid camera pixel.
PhaseField true_projector_coordinate(const PatternSet& cfg, Orientation o, const DepthMap& depth, const Rig& rig);

} // namespace dpface::slight
