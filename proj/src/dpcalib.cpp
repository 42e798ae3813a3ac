#include "dpface/dpcalib.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "dpface/error.hpp"

namespace dpface::dpcalib {

namespace {

bool close_rel(double a, double b, double tol)
{
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

} // namespace

void DpCalibration::validate() const
{
    for (double v : {A, B, f, N, g, L, alpha, pixel_pitch})
        if (!std::isfinite(v))
            fail(ErrorCode::DomainError, "calibration values must be finite");
    if (B == 0.0)
        fail(ErrorCode::DomainError, "calibration slope B must be non-zero");
    if (A == 0.0 || !close_rel(g, -B / A, 1e-9))
        fail(ErrorCode::DomainError, "calibration focus distance disagrees with -B/A");
    if (!close_rel(L, f / N, 1e-9))
        fail(ErrorCode::DomainError, "calibration aperture disagrees with f/N");
}

DpCalibration DpCalibration::from_optics(const dpsim::OpticsConfig& optics)
{
    optics.validate();
    const double gain = optics.blur_gain();
    DpCalibration c;
    c.A = gain / optics.focus_distance;
    c.B = -gain;
    c.f = optics.focal_length;
    c.N = optics.f_number;
    c.g = optics.focus_distance;
    c.L = optics.aperture();
    c.alpha = optics.alpha;
    c.pixel_pitch = optics.pixel_pitch;
    return c;
}

CalibrationFit fit_affine(std::span<const CalibSample> samples, double f, double f_number, double pixel_pitch)
{
    if (!(f > 0.0 && f_number > 0.0 && pixel_pitch > 0.0))
        fail(ErrorCode::DomainError, "focal length, f-number and pixel pitch must be positive");
    double sw = 0.0, sx = 0.0, sd = 0.0;
    std::size_t used = 0;
    for (const auto& s : samples) {
        if (!(s.inv_depth > 0.0) || !std::isfinite(s.inv_depth) || !std::isfinite(s.disparity))
            fail(ErrorCode::DomainError, "samples need positive inverse depth and finite disparity");
        if (!(s.weight >= 0.0) || !std::isfinite(s.weight))
            fail(ErrorCode::DomainError, "sample weights must be finite and non-negative");
        if (s.weight == 0.0)
            continue;
        ++used;
        sw += s.weight;
        sx += s.weight * s.inv_depth;
        sd += s.weight * s.disparity;
    }
    if (used < 2)
        fail(ErrorCode::DegenerateFit, "need at least two weighted samples");
    const double xm = sx / sw;
    const double dm = sd / sw;
    double sxx = 0.0, sxd = 0.0;
    for (const auto& s : samples) {
        const double dx = s.inv_depth - xm;
        sxx += s.weight * dx * dx;
        sxd += s.weight * dx * (s.disparity - dm);
    }
    if (!(sxx > 1e-24 * sw * xm * xm))
        fail(ErrorCode::DegenerateFit, "inverse depths are all equal");

    DpCalibration c;
    c.B = sxd / sxx;
    c.A = dm - c.B * xm;
    if (c.B == 0.0 || c.A == 0.0)
        fail(ErrorCode::InconsistentOptics, "fitted line has no finite focus distance");
    c.f = f;
    c.N = f_number;
    c.L = f / f_number;
    c.g = -c.B / c.A;
    c.pixel_pitch = pixel_pitch;
    if (!(c.g > f))
        fail(ErrorCode::InconsistentOptics, "fitted focus distance is not beyond the focal length");
    // Negative α means the data follow the opposite sign convention; kept as is.
    c.alpha = -c.B * pixel_pitch * (1.0 - f / c.g) / (c.L * f);

    double ss = 0.0;
    for (const auto& s : samples) {
        const double r = s.disparity - (c.A + c.B * s.inv_depth);
        ss += s.weight * r * r;
    }
    return {c, std::sqrt(ss / sw)};
}

double disparity_at(double z, const DpCalibration& calib)
{
    return calib.A + calib.B / z;
}

double depth_at(double d, const DpCalibration& calib)
{
    return calib.B / (d - calib.A);
}

DepthConversion disparity_to_depth(const DisparityMap& d, const DpCalibration& calib, double eps)
{
    calib.validate();
    DepthConversion out;
    std::vector<double> z(d.pixel_count(), 0.0);
    Mask mask(d.pixel_count(), 0);
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!d.valid(i))
            continue;
        const double denom = d.value(i) - calib.A;
        if (std::abs(denom) < eps) {
            ++out.masked_singular;
            continue;
        }
        const double zi = calib.B / denom;
        if (!(zi > 0.0) || !std::isfinite(zi)) {
            ++out.masked_nonpositive;
            continue;
        }
        z[i] = zi;
        mask[i] = 1;
    }
    out.depth = DepthMap(d.width(), d.height(), std::move(z), std::move(mask));
    return out;
}

DisparityMap depth_to_disparity(const DepthMap& z, const DpCalibration& calib)
{
    calib.validate();
    std::vector<double> d(z.pixel_count(), 0.0);
    Mask mask(z.pixel_count(), 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!z.valid(i))
            continue;
        d[i] = disparity_at(z.value(i), calib);
        mask[i] = 1;
    }
    return DisparityMap(z.width(), z.height(), std::move(d), std::move(mask));
}

std::pair<double, double> refine_saddle(const ImageF& image, std::pair<double, double> initial, int window)
{
    if (window < 5 || window % 2 == 0)
        fail(ErrorCode::DomainError, "saddle window must be odd and at least 5");
    if (!std::isfinite(initial.first) || !std::isfinite(initial.second))
        fail(ErrorCode::DomainError, "initial position must be finite");
    const int half = window / 2;
    const int cx = int(std::lround(initial.first));
    const int cy = int(std::lround(initial.second));
    if (cx - half < 0 || cy - half < 0 || cx + half >= image.width() || cy + half >= image.height())
        fail(ErrorCode::DomainError, "saddle window must lie inside the image");

    // I(x, y) ≈ c0 + c1 x + c2 y + c3 x² + c4 xy + c5 y², window-centered coordinates.
    const int n = window * window;
    Eigen::MatrixXd design(n, 6);
    Eigen::VectorXd rhs(n);
    int row = 0;
    for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx, ++row) {
            design.row(row) << 1.0, dx, dy, double(dx) * dx, double(dx) * dy, double(dy) * dy;
            rhs(row) = image.at(cx + dx, cy + dy);
        }
    const Eigen::VectorXd c = design.colPivHouseholderQr().solve(rhs);

    Eigen::Matrix2d hessian;
    hessian << 2.0 * c(3), c(4), c(4), 2.0 * c(5);
    const double det = hessian.determinant();
    const double scale = hessian.cwiseAbs().maxCoeff();
    if (!(det < -1e-12 * scale * scale) || scale == 0.0)
        fail(ErrorCode::NotASaddle, "local surface is not a saddle");
    const Eigen::Vector2d s = hessian.fullPivLu().solve(-Eigen::Vector2d(c(1), c(2)));
    if (!s.allFinite() || std::abs(s.x()) > half || std::abs(s.y()) > half)
        fail(ErrorCode::Diverged, "saddle point lies outside the window");
    return {cx + s.x(), cy + s.y()};
}

} // namespace dpface::dpcalib
