#pragma once

// Narrow-baseline dual-pixel stereo: sub-pixel shifted cost volume from
// several sampling schemes, max fusion across schemes, box aggregation,
// soft-argmax regression, and local-plane normals.
//
// Costs are scores (higher is better). For label d the right view is shifted
// by +d (out(x) = right(x − d)) and compared with the left view.

#include <string>
#include <string_view>
#include <vector>

#include "dpface/camera.hpp"
#include "dpface/dpsim.hpp"
#include "dpface/image.hpp"

namespace dpface::matcher {

struct DisparityLabels {
    double d_min = -4.0;
    double d_max = 12.0;
    int count = 33;

    void validate() const;
    double at(int m) const { return count == 1 ? d_min : d_min + (d_max - d_min) * m / (count - 1); }
    double step() const { return count == 1 ? 0.0 : (d_max - d_min) / (count - 1); }
    std::vector<double> values() const;
    /// "min:max:step", e.g. "-4:12:0.5".
    static DisparityLabels parse(std::string_view text);
};

enum class CostKind { SAD, ZNCC };
enum class Sampling { Nearest, Bilinear, PhaseShift };

std::string_view to_string(CostKind kind);
std::string_view to_string(Sampling sampling);
CostKind parse_cost_kind(std::string_view text);
Sampling parse_sampling(std::string_view text);

struct MatchConfig {
    int window = 9;
    CostKind cost = CostKind::ZNCC;
    std::vector<Sampling> sampling{Sampling::Nearest, Sampling::Bilinear, Sampling::PhaseShift};
    int aggregate_radius = 2;
    double softmax_temperature = 0.02;
    void validate() const;
};

struct CostVolume {
    int width = 0;
    int height = 0;
    DisparityLabels labels;
    /// (y·width + x)·count + m
    std::vector<double> cost;
    Mask mask;

    double at(int x, int y, int m) const
    {
        return cost[(std::size_t(y) * std::size_t(width) + std::size_t(x)) * std::size_t(labels.count) + std::size_t(m)];
    }
};

/// Horizontal translation out(x) = img(x − delta). Nearest and bilinear clamp
/// at the border; phase_shift treats each row as periodic.
ImageF shift_subpixel(const ImageF& img, double delta, Sampling method);

/// Score between two equally sized windows given as flat arrays.
double window_score(const double* left, const double* right, std::size_t n, CostKind kind);

/// Pixels closer to the border than the match window, the aggregation box or
/// the largest |label| are masked.
CostVolume build_cost_volume(const dpsim::DpImagePair& pair, const DisparityLabels& labels, const MatchConfig& cfg);

/// Softmax over scores / temperature, expectation over labels.
DisparityMap regress_disparity(const CostVolume& vol, double temperature);

DisparityMap match(const dpsim::DpImagePair& pair, const DisparityLabels& labels, const MatchConfig& cfg);

/// Total-least-squares plane through the back-projected valid neighbors.
/// Normals follow the NormalMap convention (n·X > 0).
NormalMap normals_from_depth(const DepthMap& depth, const PinholeCamera& cam, int neighborhood = 5);

} // namespace dpface::matcher
