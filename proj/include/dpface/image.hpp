#pragma once

// Image and per-pixel field containers shared by every module.
//
// Layout is row-major with the origin at the top-left pixel, +x to the right
// and +y down. Invalid pixels are carried by an explicit mask (1 = valid);
// masked-out samples are stored as 0 so that equal maps compare equal.
// Every container validates its shape and sample invariants in the
// constructor and is immutable afterwards.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace dpface {

using Mask = std::vector<std::uint8_t>;

class ImageF {
public:
    ImageF() = default;
    ImageF(int width, int height, std::vector<double> data, int channels = 1);

    static ImageF filled(int width, int height, double value, int channels = 1);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept { return std::size_t(width_) * std::size_t(height_); }
    bool empty() const noexcept { return data_.empty(); }

    double at(int x, int y, int c = 0) const noexcept
    {
        return data_[(std::size_t(y) * std::size_t(width_) + std::size_t(x)) * std::size_t(channels_) + std::size_t(c)];
    }
    /// Sample with coordinates clamped to the image border.
    double clamped(int x, int y, int c = 0) const noexcept;

    std::span<const double> data() const noexcept { return data_; }
    std::vector<double> release() && { return std::move(data_); }

    bool same_shape(const ImageF& other) const noexcept
    {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 1;
    std::vector<double> data_;
};

/// Scalar field with a validity mask. Base of DepthMap and DisparityMap.
class ScalarMap {
public:
    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return values_.size(); }

    double value(int x, int y) const noexcept { return values_[index(x, y)]; }
    bool valid(int x, int y) const noexcept { return mask_[index(x, y)] != 0; }
    double value(std::size_t i) const noexcept { return values_[i]; }
    bool valid(std::size_t i) const noexcept { return mask_[i] != 0; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<const std::uint8_t> mask() const noexcept { return mask_; }
    std::size_t valid_count() const noexcept;

    std::size_t index(int x, int y) const noexcept { return std::size_t(y) * std::size_t(width_) + std::size_t(x); }

    template <class Other>
    bool same_shape(const Other& other) const noexcept
    {
        return width_ == other.width() && height_ == other.height();
    }

protected:
    ScalarMap() = default;
    ScalarMap(int width, int height, std::vector<double> values, Mask mask);

    int width_ = 0;
    int height_ = 0;
    std::vector<double> values_;
    Mask mask_;
};

/// Metric depth Z along the optical axis, meters. Valid samples are finite and > 0.
class DepthMap : public ScalarMap {
public:
    DepthMap() = default;
    DepthMap(int width, int height, std::vector<double> z, Mask mask);
    /// All pixels valid.
    DepthMap(int width, int height, std::vector<double> z);
};

/// Signed defocus disparity, pixels. Valid samples are finite.
class DisparityMap : public ScalarMap {
public:
    DisparityMap() = default;
    DisparityMap(int width, int height, std::vector<double> d, Mask mask);
    DisparityMap(int width, int height, std::vector<double> d);
};

/// Unit normals in camera coordinates, oriented away from the camera center
/// (n·X > 0 for the surface point X), so a fronto-parallel surface stores (0,0,1).
class NormalMap {
public:
    static constexpr double kUnitTolerance = 1e-6;

    NormalMap() = default;
    /// `n` holds three doubles per pixel.
    NormalMap(int width, int height, std::vector<double> n, Mask mask);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return mask_.size(); }

    Eigen::Vector3d normal(int x, int y) const noexcept { return normal(index(x, y)); }
    Eigen::Vector3d normal(std::size_t i) const noexcept
    {
        return {n_[3 * i], n_[3 * i + 1], n_[3 * i + 2]};
    }
    bool valid(int x, int y) const noexcept { return mask_[index(x, y)] != 0; }
    bool valid(std::size_t i) const noexcept { return mask_[i] != 0; }

    std::span<const double> data() const noexcept { return n_; }
    std::span<const std::uint8_t> mask() const noexcept { return mask_; }
    std::size_t valid_count() const noexcept;

    std::size_t index(int x, int y) const noexcept { return std::size_t(y) * std::size_t(width_) + std::size_t(x); }

    template <class Other>
    bool same_shape(const Other& other) const noexcept
    {
        return width_ == other.width() && height_ == other.height();
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> n_;
    Mask mask_;
};

/// 3D points in meters with optional parallel normals and source-view ids.
class PointCloud {
public:
    PointCloud() = default;
    PointCloud(std::vector<Eigen::Vector3d> points,
               std::optional<std::vector<Eigen::Vector3d>> normals = std::nullopt,
               std::optional<std::vector<int>> view_ids = std::nullopt);

    std::size_t size() const noexcept { return points_.size(); }
    bool empty() const noexcept { return points_.empty(); }

    const std::vector<Eigen::Vector3d>& points() const noexcept { return points_; }
    const std::optional<std::vector<Eigen::Vector3d>>& normals() const noexcept { return normals_; }
    const std::optional<std::vector<int>>& view_ids() const noexcept { return view_ids_; }

    /// Subset in the given index order.
    PointCloud select(std::span<const std::size_t> indices) const;

private:
    std::vector<Eigen::Vector3d> points_;
    std::optional<std::vector<Eigen::Vector3d>> normals_;
    std::optional<std::vector<int>> view_ids_;
};

} // namespace dpface
