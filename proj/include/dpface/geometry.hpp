#pragma once

#include "dpface/camera.hpp"
#include "dpface/image.hpp"

namespace dpface {

/// One world-frame point per valid pixel, in row-major pixel order.
PointCloud back_project(const DepthMap& depth, const PinholeCamera& cam);

/// Z-buffer rendering: each point lands on its nearest pixel and the smallest
/// camera-frame depth wins. Points with z <= 0 are skipped.
DepthMap project(const PointCloud& cloud, const PinholeCamera& cam, int width, int height);

} // namespace dpface
