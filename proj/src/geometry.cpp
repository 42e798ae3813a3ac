#include "dpface/geometry.hpp"

#include <cmath>

#include "dpface/error.hpp"

namespace dpface {

PointCloud back_project(const DepthMap& depth, const PinholeCamera& cam)
{
    if (depth.valid_count() == 0)
        fail(ErrorCode::EmptyInput, "depth map has no valid pixels");
    std::vector<Eigen::Vector3d> points;
    points.reserve(depth.valid_count());
    for (int v = 0; v < depth.height(); ++v) {
        for (int u = 0; u < depth.width(); ++u) {
            if (!depth.valid(u, v))
                continue;
            const double z = depth.value(u, v);
            const Eigen::Vector3d p((u - cam.cx()) * z / cam.fx(), (v - cam.cy()) * z / cam.fy(), z);
            points.push_back(cam.to_world(p));
        }
    }
    return PointCloud(std::move(points));
}

DepthMap project(const PointCloud& cloud, const PinholeCamera& cam, int width, int height)
{
    if (cloud.empty())
        fail(ErrorCode::EmptyInput, "cannot project an empty cloud");
    const std::size_t n = std::size_t(width) * std::size_t(height);
    std::vector<double> z(n, 0.0);
    Mask mask(n, 0);
    for (const auto& pw : cloud.points()) {
        const Eigen::Vector3d pc = cam.to_camera(pw);
        if (!(pc.z() > 0.0))
            continue;
        const Eigen::Vector2d px = cam.pixel(pc);
        const double ur = std::round(px.x());
        const double vr = std::round(px.y());
        if (!(ur >= 0.0 && vr >= 0.0 && ur < width && vr < height))
            continue;
        const std::size_t i = std::size_t(vr) * std::size_t(width) + std::size_t(ur);
        if (!mask[i] || pc.z() < z[i]) {
            z[i] = pc.z();
            mask[i] = 1;
        }
    }
    return DepthMap(width, height, std::move(z), std::move(mask));
}

} // namespace dpface
