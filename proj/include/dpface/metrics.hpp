#pragma once

// Evaluation metrics and training losses. Only pixels valid in both maps
// contribute; means are over that co-valid set.

#include <cstddef>
#include <map>
#include <span>
#include <string>

#include <json.hpp>

#include "dpface/image.hpp"

namespace dpface::metrics {

struct MetricReport {
    std::map<std::string, double> values;
    std::size_t pixel_count = 0;

    double at(const std::string& key) const { return values.at(key); }
    /// Metric values only, keyed by name.
    nlohmann::json to_json() const;
};

struct AiweFit {
    double value = 0.0;
    double a = 0.0; ///< gt ≈ a·pred + b
    double b = 0.0;
    /// Constant prediction: a is unidentifiable and fixed to 0.
    bool degenerate = false;
    int iterations = 0;
};

inline constexpr int kIrlsMaxIterations = 20;
inline constexpr double kIrlsTolerance = 1e-8;

/// min over (a, b) of (mean |gt − (a·pred + b)|^p)^(1/p), p ∈ {1, 2}. p = 2 is
/// closed form; p = 1 uses IRLS followed by a vertex search over lines through
/// pairs of the best-fitting samples.
AiweFit aiwe_fit(std::span<const double> pred, std::span<const double> gt, int p);
double aiwe(const ScalarMap& pred, const ScalarMap& gt, int p);

inline constexpr double kDefaultTau = 1.01;

/// rmse, absrel, mae, delta1, delta2, delta3.
MetricReport depth_metrics(const DepthMap& pred, const DepthMap& gt, double tau = kDefaultTau);
/// wmae, wrmse plus the depth_metrics set.
MetricReport evaluate_depth(const DepthMap& pred, const DepthMap& gt, double tau = kDefaultTau);
/// wmae, wrmse, rmse, mae. Ratio metrics are undefined for signed disparity.
MetricReport evaluate_disparity(const DisparityMap& pred, const DisparityMap& gt);

/// mae_deg, rmsae_deg.
MetricReport normal_metrics(const NormalMap& pred, const NormalMap& gt);

struct SpoofSample {
    bool predicted_real = false;
    bool is_real = false;
};
/// apcer, bpcer, acer.
MetricReport spoof_metrics(std::span<const SpoofSample> samples);

double smooth_l1(double x);
double smooth_l1(const DisparityMap& pred, const DisparityMap& gt);
double cosine_normal_loss(const NormalMap& pred, const NormalMap& gt);

} // namespace dpface::metrics
