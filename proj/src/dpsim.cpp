#include "dpface/dpsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include "dpface/error.hpp"
#include "dpface/parallel.hpp"

namespace dpface::dpsim {

void OpticsConfig::validate() const
{
    const bool finite = std::isfinite(focal_length) && std::isfinite(f_number) && std::isfinite(focus_distance) &&
                        std::isfinite(pixel_pitch) && std::isfinite(alpha);
    if (!finite)
        fail(ErrorCode::DomainError, "optics parameters must be finite");
    if (!(focal_length > 0.0))
        fail(ErrorCode::DomainError, "focal length must be positive");
    if (!(f_number > 0.0))
        fail(ErrorCode::DomainError, "f-number must be positive");
    if (!(focus_distance > focal_length))
        fail(ErrorCode::DomainError, "focus distance must exceed the focal length");
    if (!(pixel_pitch > 0.0))
        fail(ErrorCode::DomainError, "pixel pitch must be positive");
}

double OpticsConfig::blur_gain() const
{
    return alpha * aperture() * focal_length / (1.0 - focal_length / focus_distance) / pixel_pitch;
}

double alpha_for_range(OpticsConfig optics, double z_near, double z_far, double d_min, double d_max)
{
    optics.alpha = 1.0;
    optics.validate();
    if (!(z_near > 0.0 && z_far > z_near && d_min < 0.0 && d_max > 0.0))
        fail(ErrorCode::DomainError, "invalid depth or disparity range");
    // d is monotone in Z, so only the endpoints constrain α.
    double alpha = std::numeric_limits<double>::infinity();
    for (double z : {z_near, z_far}) {
        const double unit = signed_blur(z, optics);
        if (unit < 0.0)
            alpha = std::min(alpha, d_min / unit);
        else if (unit > 0.0)
            alpha = std::min(alpha, d_max / unit);
    }
    return alpha;
}

OpticsConfig OpticsConfig::dataset_preset()
{
    OpticsConfig o;
    o.alpha = alpha_for_range(o, 0.80, 1.10, -12.0, 32.0);
    return o;
}

double signed_blur(double z, const OpticsConfig& optics)
{
    if (!(z > 0.0) || !std::isfinite(z))
        fail(ErrorCode::DomainError, "depth must be positive");
    return optics.blur_gain() * (1.0 / optics.focus_distance - 1.0 / z);
}

DisparityMap signed_blur(const DepthMap& depth, const OpticsConfig& optics)
{
    optics.validate();
    std::vector<double> d(depth.pixel_count(), 0.0);
    Mask mask(depth.mask().begin(), depth.mask().end());
    for (std::size_t i = 0; i < d.size(); ++i)
        if (mask[i])
            d[i] = signed_blur(depth.value(i), optics);
    return DisparityMap(depth.width(), depth.height(), std::move(d), std::move(mask));
}

DpImagePair::DpImagePair(ImageF left_view, ImageF right_view, OpticsConfig config)
    : left(std::move(left_view))
    , right(std::move(right_view))
    , optics(config)
{
    if (!left.same_shape(right))
        fail(ErrorCode::ShapeError, "left and right views must share dimensions");
}

BlurKernel make_left_kernel(double d, PsfShape shape, int supersample)
{
    if (!std::isfinite(d))
        fail(ErrorCode::DomainError, "disparity must be finite");
    if (supersample < 1)
        fail(ErrorCode::DomainError, "supersample must be >= 1");

    double radius = 0.0;
    double center = 0.0;
    double full_radius = 0.0;
    if (shape == PsfShape::InscribedDisc) {
        full_radius = std::abs(d);
        radius = 0.5 * std::abs(d);
        center = 0.5 * d;
    } else {
        full_radius = 3.0 * std::numbers::pi * std::abs(d) / 8.0;
        radius = full_radius;
    }
    if (full_radius < kIdentityRadius)
        return {};

    const int x0 = int(std::floor(center - radius)) - 1;
    const int x1 = int(std::ceil(center + radius)) + 2;
    const int y0 = int(std::floor(-radius)) - 1;
    const int y1 = int(std::ceil(radius)) + 2;
    BlurKernel k;
    k.offset_x = x0;
    k.offset_y = y0;
    k.width = x1 - x0 + 1;
    k.height = y1 - y0 + 1;
    k.weights.assign(std::size_t(k.width) * std::size_t(k.height), 0.0);

    // Rasterize the continuous kernel with linear (tent) splatting so the
    // discrete centroid matches the continuous one.
    const double step = 1.0 / supersample;
    const double r2 = radius * radius;
    double total = 0.0;
    for (int cy = y0 + 1; cy < y1; ++cy) {
        for (int cx = x0 + 1; cx < x1; ++cx) {
            for (int sy = 0; sy < supersample; ++sy) {
                const double py = cy - 0.5 + (sy + 0.5) * step;
                for (int sx = 0; sx < supersample; ++sx) {
                    const double px = cx - 0.5 + (sx + 0.5) * step;
                    const double dx = px - center;
                    if (dx * dx + py * py > r2)
                        continue;
                    if (shape == PsfShape::SplitDisc && (d > 0.0 ? px <= 0.0 : px >= 0.0))
                        continue;
                    const int ix = int(std::floor(px));
                    const int iy = int(std::floor(py));
                    const double fx = px - ix;
                    const double fy = py - iy;
                    auto add = [&](int x, int y, double w) {
                        k.weights[std::size_t(y - y0) * std::size_t(k.width) + std::size_t(x - x0)] += w;
                    };
                    add(ix, iy, (1 - fx) * (1 - fy));
                    add(ix + 1, iy, fx * (1 - fy));
                    add(ix, iy + 1, (1 - fx) * fy);
                    add(ix + 1, iy + 1, fx * fy);
                    total += 1.0;
                }
            }
        }
    }
    if (total <= 0.0)
        return {};
    for (double& w : k.weights)
        w /= total;
    return k;
}

namespace {

BlurKernel mirror_x(const BlurKernel& k)
{
    BlurKernel m = k;
    m.offset_x = -(k.offset_x + k.width - 1);
    for (int y = 0; y < k.height; ++y)
        for (int x = 0; x < k.width; ++x)
            m.weights[std::size_t(y) * std::size_t(k.width) + std::size_t(x)] =
                k.weights[std::size_t(y) * std::size_t(k.width) + std::size_t(k.width - 1 - x)];
    return m;
}

// Kernels are shared between pixels whose disparity agrees to 1/64 px.
constexpr double kKernelQuantum = 64.0;

long kernel_key(double d)
{
    return std::lround(d * kKernelQuantum);
}

ImageF to_luminance(const ImageF& image)
{
    if (image.channels() == 1)
        return image;
    std::vector<double> y(image.pixel_count());
    for (int v = 0; v < image.height(); ++v)
        for (int u = 0; u < image.width(); ++u)
            y[std::size_t(v) * std::size_t(image.width()) + std::size_t(u)] =
                0.299 * image.at(u, v, 0) + 0.587 * image.at(u, v, 1) + 0.114 * image.at(u, v, 2);
    return ImageF(image.width(), image.height(), std::move(y));
}

double gather(const ImageF& src, const BlurKernel& k, int u, int v)
{
    double acc = 0.0;
    for (int ky = 0; ky < k.height; ++ky) {
        const int sy = v - (k.offset_y + ky);
        for (int kx = 0; kx < k.width; ++kx) {
            const double w = k.weights[std::size_t(ky) * std::size_t(k.width) + std::size_t(kx)];
            if (w != 0.0)
                acc += w * src.clamped(u - (k.offset_x + kx), sy);
        }
    }
    return acc;
}

} // namespace

DpImagePair render_dp(const ImageF& image, const DisparityMap& disparity, const OpticsConfig& optics,
                      const RenderOptions& options)
{
    optics.validate();
    if (image.width() != disparity.width() || image.height() != disparity.height())
        fail(ErrorCode::ShapeError, "image and disparity map must share dimensions");
    const ImageF src = to_luminance(image);
    const int w = src.width();
    const int h = src.height();

    // Kernel table is built serially so the render is independent of thread count.
    std::map<long, std::pair<BlurKernel, BlurKernel>> kernels;
    std::vector<const std::pair<BlurKernel, BlurKernel>*> per_pixel(src.pixel_count());
    for (std::size_t i = 0; i < per_pixel.size(); ++i) {
        const long key = disparity.valid(i) ? kernel_key(disparity.value(i)) : 0;
        auto it = kernels.find(key);
        if (it == kernels.end()) {
            BlurKernel left = make_left_kernel(double(key) / kKernelQuantum, options.psf, options.supersample);
            BlurKernel right = mirror_x(left);
            it = kernels.emplace(key, std::make_pair(std::move(left), std::move(right))).first;
        }
        per_pixel[i] = &it->second;
    }

    std::vector<double> left(src.pixel_count());
    std::vector<double> right(src.pixel_count());
    parallel_for(0, h, [&](long v) {
        for (int u = 0; u < w; ++u) {
            const std::size_t i = std::size_t(v) * std::size_t(w) + std::size_t(u);
            left[i] = gather(src, per_pixel[i]->first, u, int(v));
            right[i] = gather(src, per_pixel[i]->second, u, int(v));
        }
    });

    if (options.noise_sigma > 0.0) {
        std::mt19937_64 rng(options.seed);
        std::normal_distribution<double> noise(0.0, options.noise_sigma);
        for (double& s : left)
            s += noise(rng);
        for (double& s : right)
            s += noise(rng);
    }
    return DpImagePair(ImageF(w, h, std::move(left)), ImageF(w, h, std::move(right)), optics);
}

DpImagePair render_dp(const ImageF& image, const DepthMap& depth, const OpticsConfig& optics,
                      const RenderOptions& options)
{
    if (image.width() != depth.width() || image.height() != depth.height())
        fail(ErrorCode::ShapeError, "image and depth map must share dimensions");
    return render_dp(image, signed_blur(depth, optics), optics, options);
}

// ---- scenes ----------------------------------------------------------------

PinholeCamera SceneParams::camera() const
{
    return PinholeCamera(fx, fy, cx, cy);
}

ImageF make_texture(int width, int height, double sigma, std::uint64_t seed)
{
    if (width <= 0 || height <= 0)
        fail(ErrorCode::ShapeError, "texture dimensions must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> img(std::size_t(width) * std::size_t(height));
    for (double& s : img)
        s = uni(rng);

    if (sigma > 0.0) {
        const int r = int(std::ceil(3.0 * sigma));
        std::vector<double> g(std::size_t(2 * r + 1));
        double sum = 0.0;
        for (int i = -r; i <= r; ++i)
            sum += g[std::size_t(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
        for (double& v : g)
            v /= sum;
        std::vector<double> tmp(img.size());
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i)
                    acc += g[std::size_t(i + r)] * img[std::size_t(y) * std::size_t(width) + std::size_t(std::clamp(x + i, 0, width - 1))];
                tmp[std::size_t(y) * std::size_t(width) + std::size_t(x)] = acc;
            }
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i)
                    acc += g[std::size_t(i + r)] * tmp[std::size_t(std::clamp(y + i, 0, height - 1)) * std::size_t(width) + std::size_t(x)];
                img[std::size_t(y) * std::size_t(width) + std::size_t(x)] = acc;
            }
    }
    const auto [lo, hi] = std::minmax_element(img.begin(), img.end());
    const double min = *lo;
    const double span = *hi - *lo;
    for (double& s : img)
        s = span > 0.0 ? 0.1 + 0.8 * (s - min) / span : 0.5;
    return ImageF(width, height, std::move(img));
}

TestScene make_test_scene(SceneKind kind, const SceneParams& p)
{
    if (p.width <= 0 || p.height <= 0)
        fail(ErrorCode::DomainError, "scene dimensions must be positive");
    const PinholeCamera cam = p.camera();
    const std::size_t n = std::size_t(p.width) * std::size_t(p.height);
    std::vector<double> z(n, 0.0);
    std::vector<double> normals(3 * n, 0.0);
    Mask mask(n, 0);

    auto set = [&](std::size_t i, double depth, const Eigen::Vector3d& nrm) {
        z[i] = depth;
        normals[3 * i] = nrm.x();
        normals[3 * i + 1] = nrm.y();
        normals[3 * i + 2] = nrm.z();
        mask[i] = 1;
    };

    switch (kind) {
    case SceneKind::Plane:
    case SceneKind::SlantedPlane:
    case SceneKind::CheckerboardTarget: {
        if (!(p.plane_depth > 0.0))
            fail(ErrorCode::DomainError, "plane depth must be positive");
        const double sx = kind == SceneKind::SlantedPlane ? p.slope_x : 0.0;
        const double sy = kind == SceneKind::SlantedPlane ? p.slope_y : 0.0;
        const Eigen::Vector3d nrm = Eigen::Vector3d(-sx, -sy, 1.0).normalized();
        for (int v = 0; v < p.height; ++v)
            for (int u = 0; u < p.width; ++u) {
                const Eigen::Vector3d r = cam.ray(u, v);
                const double denom = 1.0 - sx * r.x() - sy * r.y();
                if (denom > 0.0)
                    set(std::size_t(v) * std::size_t(p.width) + std::size_t(u), p.plane_depth / denom, nrm);
            }
        break;
    }
    case SceneKind::Sphere: {
        if (!(p.sphere_radius > 0.0))
            fail(ErrorCode::DomainError, "sphere radius must be positive");
        const Eigen::Vector3d& c = p.sphere_center;
        const double r2 = p.sphere_radius * p.sphere_radius;
        if (c.squaredNorm() <= r2)
            fail(ErrorCode::DomainError, "camera must lie outside the sphere");
        for (int v = 0; v < p.height; ++v)
            for (int u = 0; u < p.width; ++u) {
                const Eigen::Vector3d r = cam.ray(u, v);
                // |t r - c|^2 = R^2, nearest root.
                const double a = r.squaredNorm();
                const double b = r.dot(c);
                const double disc = b * b - a * (c.squaredNorm() - r2);
                if (disc < 0.0)
                    continue;
                const double t = (b - std::sqrt(disc)) / a;
                if (!(t > 0.0))
                    continue;
                const Eigen::Vector3d x = t * r;
                set(std::size_t(v) * std::size_t(p.width) + std::size_t(u), t, (c - x) / p.sphere_radius);
            }
        break;
    }
    }

    ImageF image;
    if (kind == SceneKind::CheckerboardTarget) {
        if (p.checker_size <= 0)
            fail(ErrorCode::DomainError, "checker size must be positive");
        std::vector<double> img(n);
        for (int v = 0; v < p.height; ++v)
            for (int u = 0; u < p.width; ++u)
                img[std::size_t(v) * std::size_t(p.width) + std::size_t(u)] =
                    ((u / p.checker_size + v / p.checker_size) % 2) ? 0.9 : 0.1;
        image = ImageF(p.width, p.height, std::move(img));
    } else {
        image = make_texture(p.width, p.height, p.texture_sigma, p.seed);
    }
    // Renormalize to absorb rounding drift from the sphere/plane formulas.
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask[i])
            continue;
        Eigen::Map<Eigen::Vector3d> v(normals.data() + 3 * i);
        v.normalize();
    }
    return {std::move(image), DepthMap(p.width, p.height, std::move(z), mask),
            NormalMap(p.width, p.height, std::move(normals), mask)};
}

DepthMap raycast_depth(SceneKind kind, const SceneParams& p, const PinholeCamera& cam, int width, int height)
{
    if (width <= 0 || height <= 0)
        fail(ErrorCode::DomainError, "image dimensions must be positive");
    const std::size_t n = std::size_t(width) * std::size_t(height);
    const Eigen::Vector3d origin = cam.center();
    const Eigen::Matrix3d to_world = cam.pose().rotation.transpose();
    const bool sphere = kind == SceneKind::Sphere;
    const double sx = kind == SceneKind::SlantedPlane ? p.slope_x : 0.0;
    const double sy = kind == SceneKind::SlantedPlane ? p.slope_y : 0.0;
    const Eigen::Vector3d plane_n(-sx, -sy, 1.0);
    const Eigen::Vector3d oc = p.sphere_center - origin;
    const double r2 = p.sphere_radius * p.sphere_radius;
    if (sphere && !(p.sphere_radius > 0.0))
        fail(ErrorCode::DomainError, "sphere radius must be positive");
    if (sphere && oc.squaredNorm() <= r2)
        fail(ErrorCode::DomainError, "camera must lie outside the sphere");
    if (!sphere && !(p.plane_depth > 0.0))
        fail(ErrorCode::DomainError, "plane depth must be positive");

    std::vector<double> z(n, 0.0);
    Mask mask(n, 0);
    for (int v = 0; v < height; ++v)
        for (int u = 0; u < width; ++u) {
            const Eigen::Vector3d dir = to_world * cam.ray(u, v);
            double t = 0.0;
            if (sphere) {
                const double a = dir.squaredNorm();
                const double b = dir.dot(oc);
                const double disc = b * b - a * (oc.squaredNorm() - r2);
                if (disc < 0.0)
                    continue;
                t = (b - std::sqrt(disc)) / a;
            } else {
                const double denom = plane_n.dot(dir);
                if (denom == 0.0)
                    continue;
                t = (p.plane_depth - plane_n.dot(origin)) / denom;
            }
            if (t > 0.0 && std::isfinite(t)) {
                const std::size_t i = std::size_t(v) * std::size_t(width) + std::size_t(u);
                z[i] = t;
                mask[i] = 1;
            }
        }
    return DepthMap(width, height, std::move(z), std::move(mask));
}

} // namespace dpface::dpsim
