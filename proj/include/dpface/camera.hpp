#pragma once

#include <Eigen/Core>

namespace dpface {

/// World-to-camera rigid transform: X_cam = rotation * X_world + translation.
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d& world) const { return rotation * world + translation; }
    Eigen::Vector3d apply_inverse(const Eigen::Vector3d& cam) const { return rotation.transpose() * (cam - translation); }
};

/// Pinhole camera without distortion. Pixel (u, v) has its center at integer
/// coordinates; +z points into the scene.
class PinholeCamera {
public:
    static constexpr double kOrthonormalTolerance = 1e-9;

    PinholeCamera() = default;
    PinholeCamera(double fx, double fy, double cx, double cy, RigidTransform pose = {});

    double fx() const noexcept { return fx_; }
    double fy() const noexcept { return fy_; }
    double cx() const noexcept { return cx_; }
    double cy() const noexcept { return cy_; }
    const RigidTransform& pose() const noexcept { return pose_; }

    /// Camera-frame direction through pixel (u, v), scaled so that z = 1.
    Eigen::Vector3d ray(double u, double v) const noexcept
    {
        return {(u - cx_) / fx_, (v - cy_) / fy_, 1.0};
    }
    Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const { return pose_.apply(world); }
    Eigen::Vector3d to_world(const Eigen::Vector3d& cam) const { return pose_.apply_inverse(cam); }
    /// Camera center in world coordinates.
    Eigen::Vector3d center() const { return pose_.apply_inverse(Eigen::Vector3d::Zero()); }
    /// Continuous pixel coordinates of a camera-frame point (z must be non-zero).
    Eigen::Vector2d pixel(const Eigen::Vector3d& cam) const noexcept
    {
        return {fx_ * cam.x() / cam.z() + cx_, fy_ * cam.y() / cam.z() + cy_};
    }

private:
    double fx_ = 1.0;
    double fy_ = 1.0;
    double cx_ = 0.0;
    double cy_ = 0.0;
    RigidTransform pose_;
};

/// Pose of a camera at `eye` looking toward `target`; `up` is the world direction
/// that appears toward the top of the image.
RigidTransform look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up = Eigen::Vector3d(0, -1, 0));

} // namespace dpface
