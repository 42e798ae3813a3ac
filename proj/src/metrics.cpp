#include "dpface/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "dpface/error.hpp"

namespace dpface::metrics {

nlohmann::json MetricReport::to_json() const
{
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values)
        j[k] = v;
    return j;
}

namespace {

double mean_abs_residual(std::span<const double> pred, std::span<const double> gt, double a, double b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        s += std::abs(gt[i] - (a * pred[i] + b));
    return s / double(pred.size());
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Lines through pairs among the `pool` smallest residuals; repeats while the
// objective improves.
void vertex_search(std::span<const double> pred, std::span<const double> gt, double& a, double& b, double& best)
{
    constexpr std::size_t pool = 8;
    const std::size_t n = pred.size();
    std::vector<std::size_t> idx(n);
    for (int round = 0; round < 32; ++round) {
        for (std::size_t i = 0; i < n; ++i)
            idx[i] = i;
        const std::size_t m = std::min(pool, n);
        std::partial_sort(idx.begin(), idx.begin() + long(m), idx.end(), [&](std::size_t l, std::size_t r) {
            const double rl = std::abs(gt[l] - (a * pred[l] + b));
            const double rr = std::abs(gt[r] - (a * pred[r] + b));
            return rl < rr || (rl == rr && l < r);
        });
        bool improved = false;
        for (std::size_t s = 0; s < m; ++s)
            for (std::size_t t = s + 1; t < m; ++t) {
                const std::size_t i = idx[s], j = idx[t];
                if (pred[i] == pred[j])
                    continue;
                const double ca = (gt[j] - gt[i]) / (pred[j] - pred[i]);
                const double cb = gt[i] - ca * pred[i];
                const double v = mean_abs_residual(pred, gt, ca, cb);
                if (v < best) {
                    best = v;
                    a = ca;
                    b = cb;
                    improved = true;
                }
            }
        if (!improved)
            return;
    }
}

} // namespace

AiweFit aiwe_fit(std::span<const double> pred, std::span<const double> gt, int p)
{
    if (p != 1 && p != 2)
        fail(ErrorCode::DomainError, "AIWE order must be 1 or 2");
    if (pred.size() != gt.size())
        fail(ErrorCode::ShapeError, "prediction and ground truth differ in size");
    if (pred.empty())
        fail(ErrorCode::EmptyInput, "no co-valid pixels");
    const auto n = double(pred.size());

    AiweFit fit;
    double mp = 0.0, mg = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        mp += pred[i];
        mg += gt[i];
    }
    mp /= n;
    mg /= n;
    double spp = 0.0, spg = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        spp += (pred[i] - mp) * (pred[i] - mp);
        spg += (pred[i] - mp) * (gt[i] - mg);
    }
    const double scale = std::max(1.0, std::abs(mp));
    if (!(spp > 1e-24 * n * scale * scale)) {
        fit.degenerate = true;
        fit.a = 0.0;
        if (p == 2) {
            fit.b = mg;
            double s = 0.0;
            for (double g : gt)
                s += (g - mg) * (g - mg);
            fit.value = std::sqrt(s / n);
        } else {
            fit.b = median(std::vector<double>(gt.begin(), gt.end()));
            fit.value = mean_abs_residual(pred, gt, 0.0, fit.b);
        }
        return fit;
    }
    fit.a = spg / spp;
    fit.b = mg - fit.a * mp;
    if (p == 2) {
        double s = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double r = gt[i] - (fit.a * pred[i] + fit.b);
            s += r * r;
        }
        fit.value = std::sqrt(s / n);
        return fit;
    }

    double gscale = 1.0;
    for (double g : gt)
        gscale = std::max(gscale, std::abs(g));
    const double floor_r = 1e-12 * gscale;
    for (int it = 0; it < kIrlsMaxIterations; ++it) {
        fit.iterations = it + 1;
        Eigen::Matrix2d ata = Eigen::Matrix2d::Zero();
        Eigen::Vector2d atb = Eigen::Vector2d::Zero();
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double r = std::abs(gt[i] - (fit.a * pred[i] + fit.b));
            const double w = 1.0 / std::max(r, floor_r);
            const Eigen::Vector2d row(pred[i] - mp, 1.0);
            ata += w * row * row.transpose();
            atb += w * row * gt[i];
        }
        const Eigen::Vector2d sol = ata.ldlt().solve(atb);
        if (!sol.allFinite())
            break;
        const double na = sol(0);
        const double nb = sol(1) - sol(0) * mp;
        const double change = std::max(std::abs(na - fit.a), std::abs(nb - fit.b));
        fit.a = na;
        fit.b = nb;
        if (change <= kIrlsTolerance * (1.0 + std::max(std::abs(fit.a), std::abs(fit.b))))
            break;
    }
    fit.value = mean_abs_residual(pred, gt, fit.a, fit.b);
    vertex_search(pred, gt, fit.a, fit.b, fit.value);
    return fit;
}

namespace {

void co_valid(const ScalarMap& pred, const ScalarMap& gt, std::vector<double>& p, std::vector<double>& g)
{
    if (!pred.same_shape(gt))
        fail(ErrorCode::ShapeError, "prediction and ground truth differ in shape");
    for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
        if (pred.valid(i) && gt.valid(i)) {
            p.push_back(pred.value(i));
            g.push_back(gt.value(i));
        }
    }
    if (p.empty())
        fail(ErrorCode::EmptyInput, "no co-valid pixels");
}

} // namespace

double aiwe(const ScalarMap& pred, const ScalarMap& gt, int p)
{
    std::vector<double> pv, gv;
    co_valid(pred, gt, pv, gv);
    return aiwe_fit(pv, gv, p).value;
}

MetricReport depth_metrics(const DepthMap& pred, const DepthMap& gt, double tau)
{
    if (!(tau > 1.0) || !std::isfinite(tau))
        fail(ErrorCode::DomainError, "tau must exceed 1");
    std::vector<double> pv, gv;
    co_valid(pred, gt, pv, gv);
    double se = 0.0, rel = 0.0, ae = 0.0;
    std::size_t d1 = 0, d2 = 0, d3 = 0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double e = gv[i] - pv[i];
        se += e * e;
        ae += std::abs(e);
        rel += std::abs(e / gv[i]);
        const double ratio = std::max(gv[i] / pv[i], pv[i] / gv[i]);
        d1 += ratio < tau ? 1 : 0;
        d2 += ratio < tau * tau ? 1 : 0;
        d3 += ratio < tau * tau * tau ? 1 : 0;
    }
    const auto n = double(pv.size());
    MetricReport r;
    r.pixel_count = pv.size();
    r.values = {{"rmse", std::sqrt(se / n)}, {"absrel", rel / n}, {"mae", ae / n},
                {"delta1", double(d1) / n}, {"delta2", double(d2) / n}, {"delta3", double(d3) / n}};
    return r;
}

MetricReport evaluate_depth(const DepthMap& pred, const DepthMap& gt, double tau)
{
    MetricReport r = depth_metrics(pred, gt, tau);
    r.values["wmae"] = aiwe(pred, gt, 1);
    r.values["wrmse"] = aiwe(pred, gt, 2);
    return r;
}

MetricReport evaluate_disparity(const DisparityMap& pred, const DisparityMap& gt)
{
    std::vector<double> pv, gv;
    co_valid(pred, gt, pv, gv);
    double se = 0.0, ae = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double e = gv[i] - pv[i];
        se += e * e;
        ae += std::abs(e);
    }
    const auto n = double(pv.size());
    MetricReport r;
    r.pixel_count = pv.size();
    r.values = {{"wmae", aiwe_fit(pv, gv, 1).value}, {"wrmse", aiwe_fit(pv, gv, 2).value},
                {"rmse", std::sqrt(se / n)}, {"mae", ae / n}};
    return r;
}

namespace {

constexpr double kNormalTolerance = 1e-3;

template <class Fn>
std::size_t for_co_valid_normals(const NormalMap& pred, const NormalMap& gt, Fn&& fn)
{
    if (!pred.same_shape(gt))
        fail(ErrorCode::ShapeError, "normal maps differ in shape");
    std::size_t count = 0;
    for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
        if (!pred.valid(i) || !gt.valid(i))
            continue;
        const Eigen::Vector3d a = pred.normal(i);
        const Eigen::Vector3d b = gt.normal(i);
        if (std::abs(a.norm() - 1.0) > kNormalTolerance || std::abs(b.norm() - 1.0) > kNormalTolerance)
            fail(ErrorCode::DomainError, "normals must be unit length");
        fn(a.dot(b));
        ++count;
    }
    if (count == 0)
        fail(ErrorCode::EmptyInput, "no co-valid pixels");
    return count;
}

} // namespace

MetricReport normal_metrics(const NormalMap& pred, const NormalMap& gt)
{
    double sum = 0.0, sq = 0.0;
    const std::size_t n = for_co_valid_normals(pred, gt, [&](double dot) {
        const double deg = std::acos(std::clamp(dot, -1.0, 1.0)) * 180.0 / std::numbers::pi;
        sum += deg;
        sq += deg * deg;
    });
    MetricReport r;
    r.pixel_count = n;
    r.values = {{"mae_deg", sum / double(n)}, {"rmsae_deg", std::sqrt(sq / double(n))}};
    return r;
}

MetricReport spoof_metrics(std::span<const SpoofSample> samples)
{
    std::size_t fakes = 0, reals = 0, fake_as_real = 0, real_as_fake = 0;
    for (const auto& s : samples) {
        if (s.is_real) {
            ++reals;
            real_as_fake += s.predicted_real ? 0 : 1;
        } else {
            ++fakes;
            fake_as_real += s.predicted_real ? 1 : 0;
        }
    }
    if (fakes == 0 || reals == 0)
        fail(ErrorCode::DomainError, "spoof metrics need both real and fake samples");
    const double apcer = double(fake_as_real) / double(fakes);
    const double bpcer = double(real_as_fake) / double(reals);
    MetricReport r;
    r.pixel_count = samples.size();
    r.values = {{"apcer", apcer}, {"bpcer", bpcer}, {"acer", 0.5 * (apcer + bpcer)}};
    return r;
}

double smooth_l1(double x)
{
    const double ax = std::abs(x);
    return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

double smooth_l1(const DisparityMap& pred, const DisparityMap& gt)
{
    std::vector<double> pv, gv;
    co_valid(pred, gt, pv, gv);
    double s = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i)
        s += smooth_l1(gv[i] - pv[i]);
    return s / double(pv.size());
}

double cosine_normal_loss(const NormalMap& pred, const NormalMap& gt)
{
    double s = 0.0;
    const std::size_t n = for_co_valid_normals(pred, gt, [&](double dot) { s += 1.0 - dot; });
    return s / double(n);
}

} // namespace dpface::metrics
