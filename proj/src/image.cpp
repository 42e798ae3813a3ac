#include "dpface/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpface/error.hpp"

namespace dpface {

namespace {

void check_dims(int width, int height)
{
    if (width <= 0 || height <= 0)
        fail(ErrorCode::ShapeError, "dimensions must be positive, got " + std::to_string(width) + "x" + std::to_string(height));
}

std::size_t count_valid(std::span<const std::uint8_t> mask)
{
    return std::size_t(std::count_if(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }));
}

} // namespace

ImageF::ImageF(int width, int height, std::vector<double> data, int channels)
    : width_(width)
    , height_(height)
    , channels_(channels)
    , data_(std::move(data))
{
    check_dims(width, height);
    if (channels != 1 && channels != 3)
        fail(ErrorCode::ShapeError, "image channels must be 1 or 3");
    if (data_.size() != std::size_t(width) * std::size_t(height) * std::size_t(channels))
        fail(ErrorCode::ShapeError, "image data length does not match width*height*channels");
    for (double v : data_)
        if (!std::isfinite(v))
            fail(ErrorCode::DomainError, "image samples must be finite");
}

ImageF ImageF::filled(int width, int height, double value, int channels)
{
    check_dims(width, height);
    return ImageF(width, height, std::vector<double>(std::size_t(width) * std::size_t(height) * std::size_t(channels), value), channels);
}

double ImageF::clamped(int x, int y, int c) const noexcept
{
    return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1), c);
}

ScalarMap::ScalarMap(int width, int height, std::vector<double> values, Mask mask)
    : width_(width)
    , height_(height)
    , values_(std::move(values))
    , mask_(std::move(mask))
{
    check_dims(width, height);
    const std::size_t n = std::size_t(width) * std::size_t(height);
    if (values_.size() != n || mask_.size() != n)
        fail(ErrorCode::ShapeError, "map values/mask length does not match width*height");
    for (std::size_t i = 0; i < n; ++i) {
        mask_[i] = mask_[i] ? 1 : 0;
        if (!mask_[i])
            values_[i] = 0.0;
    }
}

std::size_t ScalarMap::valid_count() const noexcept
{
    return count_valid(mask_);
}

DepthMap::DepthMap(int width, int height, std::vector<double> z, Mask mask)
    : ScalarMap(width, height, std::move(z), std::move(mask))
{
    for (std::size_t i = 0; i < values_.size(); ++i)
        if (mask_[i] && !(std::isfinite(values_[i]) && values_[i] > 0.0))
            fail(ErrorCode::DomainError, "valid depth samples must be finite and positive");
}

DepthMap::DepthMap(int width, int height, std::vector<double> z)
    : DepthMap(width, height, std::move(z), Mask(std::size_t(std::max(width, 0)) * std::size_t(std::max(height, 0)), 1))
{
}

DisparityMap::DisparityMap(int width, int height, std::vector<double> d, Mask mask)
    : ScalarMap(width, height, std::move(d), std::move(mask))
{
    for (std::size_t i = 0; i < values_.size(); ++i)
        if (mask_[i] && !std::isfinite(values_[i]))
            fail(ErrorCode::DomainError, "valid disparity samples must be finite");
}

DisparityMap::DisparityMap(int width, int height, std::vector<double> d)
    : DisparityMap(width, height, std::move(d), Mask(std::size_t(std::max(width, 0)) * std::size_t(std::max(height, 0)), 1))
{
}

NormalMap::NormalMap(int width, int height, std::vector<double> n, Mask mask)
    : width_(width)
    , height_(height)
    , n_(std::move(n))
    , mask_(std::move(mask))
{
    check_dims(width, height);
    const std::size_t count = std::size_t(width) * std::size_t(height);
    if (mask_.size() != count || n_.size() != 3 * count)
        fail(ErrorCode::ShapeError, "normal map length does not match width*height");
    for (std::size_t i = 0; i < count; ++i) {
        mask_[i] = mask_[i] ? 1 : 0;
        if (!mask_[i]) {
            n_[3 * i] = n_[3 * i + 1] = n_[3 * i + 2] = 0.0;
            continue;
        }
        const Eigen::Vector3d v(n_[3 * i], n_[3 * i + 1], n_[3 * i + 2]);
        if (!v.allFinite() || std::abs(v.norm() - 1.0) > kUnitTolerance)
            fail(ErrorCode::DomainError, "valid normals must be unit length");
    }
}

std::size_t NormalMap::valid_count() const noexcept
{
    return count_valid(mask_);
}

PointCloud::PointCloud(std::vector<Eigen::Vector3d> points,
                       std::optional<std::vector<Eigen::Vector3d>> normals,
                       std::optional<std::vector<int>> view_ids)
    : points_(std::move(points))
    , normals_(std::move(normals))
    , view_ids_(std::move(view_ids))
{
    if (normals_ && normals_->size() != points_.size())
        fail(ErrorCode::ShapeError, "normals list must parallel the point list");
    if (view_ids_ && view_ids_->size() != points_.size())
        fail(ErrorCode::ShapeError, "view id list must parallel the point list");
    for (const auto& p : points_)
        if (!p.allFinite())
            fail(ErrorCode::DomainError, "points must be finite");
}

PointCloud PointCloud::select(std::span<const std::size_t> indices) const
{
    std::vector<Eigen::Vector3d> pts;
    pts.reserve(indices.size());
    std::optional<std::vector<Eigen::Vector3d>> nrm;
    std::optional<std::vector<int>> ids;
    if (normals_)
        nrm.emplace().reserve(indices.size());
    if (view_ids_)
        ids.emplace().reserve(indices.size());
    for (std::size_t i : indices) {
        pts.push_back(points_.at(i));
        if (nrm)
            nrm->push_back((*normals_)[i]);
        if (ids)
            ids->push_back((*view_ids_)[i]);
    }
    return PointCloud(std::move(pts), std::move(nrm), std::move(ids));
}

} // namespace dpface
