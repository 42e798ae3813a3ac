#include "dpface/matcher.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <fftw3.h>

#include "dpface/error.hpp"
#include "dpface/parallel.hpp"

namespace dpface::matcher {

void DisparityLabels::validate() const
{
    if (!std::isfinite(d_min) || !std::isfinite(d_max))
        fail(ErrorCode::DomainError, "label range must be finite");
    if (count < 1)
        fail(ErrorCode::DomainError, "label count must be positive");
    if (count == 1 ? d_min != d_max : !(d_max > d_min))
        fail(ErrorCode::DomainError, "labels must be strictly increasing");
}

std::vector<double> DisparityLabels::values() const
{
    std::vector<double> v(static_cast<std::size_t>(count));
    for (int m = 0; m < count; ++m)
        v[std::size_t(m)] = at(m);
    return v;
}

namespace {

double parse_double(std::string_view s)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        fail(ErrorCode::DomainError, "not a number: '" + std::string(s) + "'");
    return v;
}

} // namespace

DisparityLabels DisparityLabels::parse(std::string_view text)
{
    const auto c1 = text.find(':');
    const auto c2 = c1 == std::string_view::npos ? c1 : text.find(':', c1 + 1);
    if (c2 == std::string_view::npos)
        fail(ErrorCode::ParseError, "labels must be given as min:max:step");
    const double lo = parse_double(text.substr(0, c1));
    const double hi = parse_double(text.substr(c1 + 1, c2 - c1 - 1));
    const double step = parse_double(text.substr(c2 + 1));
    if (!(step > 0.0) || !(hi >= lo))
        fail(ErrorCode::DomainError, "labels need max >= min and a positive step");
    const double span = (hi - lo) / step;
    const double whole = std::round(span);
    if (std::abs(span - whole) > 1e-9 * std::max(1.0, span))
        fail(ErrorCode::DomainError, "label step must divide the range");
    DisparityLabels l{lo, hi, int(whole) + 1};
    l.validate();
    return l;
}

std::string_view to_string(CostKind kind)
{
    return kind == CostKind::SAD ? "sad" : "zncc";
}

std::string_view to_string(Sampling sampling)
{
    switch (sampling) {
    case Sampling::Nearest: return "nearest";
    case Sampling::Bilinear: return "bilinear";
    case Sampling::PhaseShift: return "phase_shift";
    }
    return "?";
}

CostKind parse_cost_kind(std::string_view text)
{
    if (text == "sad")
        return CostKind::SAD;
    if (text == "zncc")
        return CostKind::ZNCC;
    fail(ErrorCode::DomainError, "unknown cost kind '" + std::string(text) + "'");
}

Sampling parse_sampling(std::string_view text)
{
    for (Sampling s : {Sampling::Nearest, Sampling::Bilinear, Sampling::PhaseShift})
        if (text == to_string(s))
            return s;
    fail(ErrorCode::DomainError, "unknown sampling '" + std::string(text) + "'");
}

void MatchConfig::validate() const
{
    if (window < 3 || window % 2 == 0)
        fail(ErrorCode::DomainError, "window must be odd and at least 3");
    if (sampling.empty())
        fail(ErrorCode::DomainError, "at least one sampling method is required");
    if (aggregate_radius < 0)
        fail(ErrorCode::DomainError, "aggregate_radius must be non-negative");
    if (!(softmax_temperature > 0.0) || !std::isfinite(softmax_temperature))
        fail(ErrorCode::DomainError, "softmax temperature must be positive");
}

namespace {

std::mutex g_planner_mutex;

// Forward and backward complex plans for one row length. Execution through
// fftw_execute_dft is thread-safe; planning is not.
class RowFft {
public:
    explicit RowFft(int n) : n_(n)
    {
        std::lock_guard lock(g_planner_mutex);
        auto* a = fftw_alloc_complex(static_cast<std::size_t>(n));
        auto* b = fftw_alloc_complex(static_cast<std::size_t>(n));
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        forward_ = fftw_plan_dft_1d(n, a, b, FFTW_FORWARD, flags);
        backward_ = fftw_plan_dft_1d(n, a, b, FFTW_BACKWARD, flags);
        fftw_free(a);
        fftw_free(b);
        if (!forward_ || !backward_)
            fail(ErrorCode::DomainError, "FFT planning failed");
    }
    ~RowFft()
    {
        std::lock_guard lock(g_planner_mutex);
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }
    RowFft(const RowFft&) = delete;
    RowFft& operator=(const RowFft&) = delete;

    void forward(std::complex<double>* in, std::complex<double>* out) const
    {
        fftw_execute_dft(forward_, reinterpret_cast<fftw_complex*>(in), reinterpret_cast<fftw_complex*>(out));
    }
    void backward(std::complex<double>* in, std::complex<double>* out) const
    {
        fftw_execute_dft(backward_, reinterpret_cast<fftw_complex*>(in), reinterpret_cast<fftw_complex*>(out));
    }
    int size() const { return n_; }

private:
    int n_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

// Row spectra of an image, computed once and reused for every shift.
std::vector<std::complex<double>> row_spectra(const ImageF& img, const RowFft& fft)
{
    const int w = img.width();
    std::vector<std::complex<double>> spec(img.pixel_count());
    std::vector<std::complex<double>> row(static_cast<std::size_t>(w));
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < w; ++x)
            row[std::size_t(x)] = img.at(x, y);
        fft.forward(row.data(), spec.data() + std::size_t(y) * std::size_t(w));
    }
    return spec;
}

int signed_frequency(int j, int n)
{
    return j < (n + 1) / 2 ? j : j - n;
}

void shift_phase(const std::vector<std::complex<double>>& spec, int w, int h, double delta, const RowFft& fft,
                 double* out)
{
    std::vector<std::complex<double>> twiddle(static_cast<std::size_t>(w));
    for (int j = 0; j < w; ++j) {
        const double angle = -2.0 * std::numbers::pi * signed_frequency(j, w) * delta / w;
        twiddle[std::size_t(j)] = std::polar(1.0, angle);
    }
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(w)), res(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
        const auto* s = spec.data() + std::size_t(y) * std::size_t(w);
        for (int j = 0; j < w; ++j)
            buf[std::size_t(j)] = s[j] * twiddle[std::size_t(j)];
        fft.backward(buf.data(), res.data());
        for (int x = 0; x < w; ++x)
            out[std::size_t(y) * std::size_t(w) + std::size_t(x)] = res[std::size_t(x)].real() / w;
    }
}

void shift_spatial(const ImageF& img, double delta, Sampling method, double* out)
{
    const int w = img.width();
    for (int y = 0; y < img.height(); ++y) {
        double* row = out + std::size_t(y) * std::size_t(w);
        if (method == Sampling::Nearest) {
            const long k = std::lround(delta);
            for (int x = 0; x < w; ++x)
                row[x] = img.clamped(int(x - k), y);
        } else {
            for (int x = 0; x < w; ++x) {
                const double s = x - delta;
                const double x0 = std::floor(s);
                const double t = s - x0;
                const double a = img.clamped(int(x0), y);
                const double b = img.clamped(int(x0) + 1, y);
                row[x] = t == 0.0 ? a : (1.0 - t) * a + t * b;
            }
        }
    }
}

void check_delta(const ImageF& img, double delta)
{
    if (!std::isfinite(delta))
        fail(ErrorCode::DomainError, "shift must be finite");
    if (!(std::abs(delta) < img.width() / 2.0))
        fail(ErrorCode::DomainError, "shift must be smaller than half the image width");
}

} // namespace

ImageF shift_subpixel(const ImageF& img, double delta, Sampling method)
{
    if (img.empty() || img.channels() != 1)
        fail(ErrorCode::ShapeError, "shift needs a non-empty single-channel image");
    check_delta(img, delta);
    std::vector<double> out(img.pixel_count());
    if (method == Sampling::PhaseShift) {
        const RowFft fft(img.width());
        shift_phase(row_spectra(img, fft), img.width(), img.height(), delta, fft, out.data());
    } else {
        shift_spatial(img, delta, method, out.data());
    }
    return ImageF(img.width(), img.height(), std::move(out));
}

namespace {

constexpr double kVarianceGuard = 1e-10;

// Window sums over rows [y0, y1) and columns [x0, x1) of the output; the
// window of radius r must fit inside the image there.
void box_sum(const std::vector<double>& in, int w, int r, int x0, int x1, int y0, int y1, std::vector<double>& tmp,
             std::vector<double>& out)
{
    for (int y = y0 - r; y < y1 + r; ++y) {
        const double* row = in.data() + std::size_t(y) * std::size_t(w);
        for (int x = x0; x < x1; ++x) {
            double s = 0.0;
            for (int k = -r; k <= r; ++k)
                s += row[x + k];
            tmp[std::size_t(y) * std::size_t(w) + std::size_t(x)] = s;
        }
    }
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            double s = 0.0;
            for (int k = -r; k <= r; ++k)
                s += tmp[std::size_t(y + k) * std::size_t(w) + std::size_t(x)];
            out[std::size_t(y) * std::size_t(w) + std::size_t(x)] = s;
        }
    }
}

double zncc_from_sums(double sl, double sl2, double sr, double sr2, double slr, double n)
{
    const double vl = sl2 - sl * sl / n;
    const double vr = sr2 - sr * sr / n;
    if (vl <= kVarianceGuard * n || vr <= kVarianceGuard * n)
        return 0.0;
    const double c = (slr - sl * sr / n) / std::sqrt(vl * vr);
    return std::clamp(c, -1.0, 1.0);
}

} // namespace

double window_score(const double* left, const double* right, std::size_t n, CostKind kind)
{
    if (n == 0)
        fail(ErrorCode::EmptyInput, "empty window");
    if (kind == CostKind::SAD) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += std::abs(left[i] - right[i]);
        return -s / double(n);
    }
    double sl = 0, sl2 = 0, sr = 0, sr2 = 0, slr = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sl += left[i];
        sl2 += left[i] * left[i];
        sr += right[i];
        sr2 += right[i] * right[i];
        slr += left[i] * right[i];
    }
    return zncc_from_sums(sl, sl2, sr, sr2, slr, double(n));
}

CostVolume build_cost_volume(const dpsim::DpImagePair& pair, const DisparityLabels& labels, const MatchConfig& cfg)
{
    labels.validate();
    cfg.validate();
    const ImageF& left = pair.left;
    const ImageF& right = pair.right;
    if (left.channels() != 1 || !left.same_shape(right))
        fail(ErrorCode::ShapeError, "matching needs two single-channel views of one shape");
    const int w = left.width();
    const int h = left.height();
    const std::size_t n = left.pixel_count();
    for (int m = 0; m < labels.count; ++m)
        check_delta(right, labels.at(m));

    const int hw = cfg.window / 2;
    const int ra = cfg.aggregate_radius;
    const int margin_left = std::max(0, int(std::ceil(labels.d_max))) + 1;
    const int margin_right = std::max(0, int(std::ceil(-labels.d_min))) + 1;
    // Region with complete matching windows and in-support shifted samples.
    const int mx0 = hw + margin_left, mx1 = w - hw - margin_right;
    const int my0 = hw, my1 = h - hw;
    // Region that also has a complete aggregation box.
    const int ax0 = mx0 + ra, ax1 = mx1 - ra, ay0 = my0 + ra, ay1 = my1 - ra;

    CostVolume vol;
    vol.width = w;
    vol.height = h;
    vol.labels = labels;
    vol.cost.assign(n * std::size_t(labels.count), 0.0);
    vol.mask.assign(n, 0);
    if (ax0 >= ax1 || ay0 >= ay1)
        return vol;

    const double win_n = double(cfg.window) * cfg.window;
    std::vector<double> lv(left.data().begin(), left.data().end());
    std::vector<double> sum_l(n, 0.0), sum_l2(n, 0.0), tmp(n, 0.0);
    if (cfg.cost == CostKind::ZNCC) {
        std::vector<double> l2(n);
        for (std::size_t i = 0; i < n; ++i)
            l2[i] = lv[i] * lv[i];
        box_sum(lv, w, hw, mx0, mx1, my0, my1, tmp, sum_l);
        box_sum(l2, w, hw, mx0, mx1, my0, my1, tmp, sum_l2);
    }

    const bool use_phase =
        std::find(cfg.sampling.begin(), cfg.sampling.end(), Sampling::PhaseShift) != cfg.sampling.end();
    std::unique_ptr<RowFft> fft;
    std::vector<std::complex<double>> spectra;
    if (use_phase) {
        fft = std::make_unique<RowFft>(w);
        spectra = row_spectra(right, *fft);
    }

    std::vector<std::vector<double>> planes(std::size_t(labels.count));
    parallel_for(0, labels.count, [&](long m) {
        const double d = labels.at(int(m));
        std::vector<double> shifted(n), a(n), b(n), c(n), t(n), s1(n), s2(n), s3(n);
        std::vector<double> fused(n, -std::numeric_limits<double>::infinity());
        for (Sampling method : cfg.sampling) {
            if (method == Sampling::PhaseShift)
                shift_phase(spectra, w, h, d, *fft, shifted.data());
            else
                shift_spatial(right, d, method, shifted.data());
            if (cfg.cost == CostKind::SAD) {
                for (std::size_t i = 0; i < n; ++i)
                    a[i] = std::abs(lv[i] - shifted[i]);
                box_sum(a, w, hw, mx0, mx1, my0, my1, t, s1);
                for (int y = my0; y < my1; ++y)
                    for (int x = mx0; x < mx1; ++x) {
                        const std::size_t i = std::size_t(y) * std::size_t(w) + std::size_t(x);
                        fused[i] = std::max(fused[i], -s1[i] / win_n);
                    }
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    b[i] = shifted[i] * shifted[i];
                    c[i] = lv[i] * shifted[i];
                }
                box_sum(shifted, w, hw, mx0, mx1, my0, my1, t, s1);
                box_sum(b, w, hw, mx0, mx1, my0, my1, t, s2);
                box_sum(c, w, hw, mx0, mx1, my0, my1, t, s3);
                for (int y = my0; y < my1; ++y)
                    for (int x = mx0; x < mx1; ++x) {
                        const std::size_t i = std::size_t(y) * std::size_t(w) + std::size_t(x);
                        const double score = zncc_from_sums(sum_l[i], sum_l2[i], s1[i], s2[i], s3[i], win_n);
                        fused[i] = std::max(fused[i], score);
                    }
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(fused[i]))
                fused[i] = 0.0;
        auto& plane = planes[std::size_t(m)];
        plane.assign(n, 0.0);
        box_sum(fused, w, ra, ax0, ax1, ay0, ay1, t, plane);
        const double box_n = double(2 * ra + 1) * (2 * ra + 1);
        for (double& v : plane)
            v /= box_n;
    });

    const auto count = std::size_t(labels.count);
    parallel_for(ay0, ay1, [&](long y) {
        for (int x = ax0; x < ax1; ++x) {
            const std::size_t i = std::size_t(y) * std::size_t(w) + std::size_t(x);
            for (std::size_t m = 0; m < count; ++m)
                vol.cost[i * count + m] = planes[m][i];
            vol.mask[i] = 1;
        }
    });
    return vol;
}

DisparityMap regress_disparity(const CostVolume& vol, double temperature)
{
    vol.labels.validate();
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        fail(ErrorCode::DomainError, "temperature must be positive");
    const std::size_t n = std::size_t(vol.width) * std::size_t(vol.height);
    const auto count = std::size_t(vol.labels.count);
    if (vol.cost.size() != n * count || vol.mask.size() != n)
        fail(ErrorCode::ShapeError, "cost volume size mismatch");
    const std::vector<double> labels = vol.labels.values();
    std::vector<double> d(n, 0.0);
    Mask mask(vol.mask);
    parallel_for(0, long(n), [&](long li) {
        const auto i = std::size_t(li);
        if (!mask[i])
            return;
        const double* s = vol.cost.data() + i * count;
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < count; ++m)
            top = std::max(top, s[m] / temperature);
        double z = 0.0, e = 0.0;
        for (std::size_t m = 0; m < count; ++m) {
            const double p = std::exp(s[m] / temperature - top);
            z += p;
            e += p * labels[m];
        }
        d[i] = std::clamp(e / z, vol.labels.d_min, vol.labels.d_max);
    });
    for (std::size_t i = 0; i < n; ++i)
        if (mask[i] && !std::isfinite(d[i])) {
            mask[i] = 0;
            d[i] = 0.0;
        }
    return DisparityMap(vol.width, vol.height, std::move(d), std::move(mask));
}

DisparityMap match(const dpsim::DpImagePair& pair, const DisparityLabels& labels, const MatchConfig& cfg)
{
    return regress_disparity(build_cost_volume(pair, labels, cfg), cfg.softmax_temperature);
}

NormalMap normals_from_depth(const DepthMap& depth, const PinholeCamera& cam, int neighborhood)
{
    if (neighborhood < 3 || neighborhood % 2 == 0)
        fail(ErrorCode::DomainError, "neighborhood must be odd and at least 3");
    const int w = depth.width();
    const int h = depth.height();
    const int r = neighborhood / 2;
    const std::size_t n = depth.pixel_count();
    std::vector<Eigen::Vector3d> points(n, Eigen::Vector3d::Zero());
    for (std::size_t i = 0; i < n; ++i)
        if (depth.valid(i))
            points[i] = cam.ray(double(i % std::size_t(w)), double(i / std::size_t(w))) * depth.value(i);

    std::vector<double> normals(3 * n, 0.0);
    Mask mask(n, 0);
    parallel_for(0, long(n), [&](long li) {
        const auto i = std::size_t(li);
        if (!depth.valid(i))
            return;
        const int x = int(i % std::size_t(w));
        const int y = int(i / std::size_t(w));
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        int count = 0;
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                const int qx = x + dx, qy = y + dy;
                if (qx < 0 || qy < 0 || qx >= w || qy >= h || !depth.valid(qx, qy))
                    continue;
                mean += points[depth.index(qx, qy)];
                ++count;
            }
        if (count < 3)
            return;
        mean /= count;
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                const int qx = x + dx, qy = y + dy;
                if (qx < 0 || qy < 0 || qx >= w || qy >= h || !depth.valid(qx, qy))
                    continue;
                const Eigen::Vector3d q = points[depth.index(qx, qy)] - mean;
                cov += q * q.transpose();
            }
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
        const Eigen::Vector3d ev = es.eigenvalues();
        // Collinear neighbors leave the plane undetermined.
        if (!(ev(1) > 1e-12 * ev(2)))
            return;
        Eigen::Vector3d nrm = es.eigenvectors().col(0).normalized();
        if (nrm.dot(points[i]) < 0.0)
            nrm = -nrm;
        normals[3 * i] = nrm.x();
        normals[3 * i + 1] = nrm.y();
        normals[3 * i + 2] = nrm.z();
        mask[i] = 1;
    });
    return NormalMap(w, h, std::move(normals), std::move(mask));
}

} // namespace dpface::matcher
