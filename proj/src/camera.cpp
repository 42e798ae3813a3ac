#include "dpface/camera.hpp"

#include <cmath>
#include <utility>

#include <Eigen/Geometry>

#include "dpface/error.hpp"

namespace dpface {

PinholeCamera::PinholeCamera(double fx, double fy, double cx, double cy, RigidTransform pose)
    : fx_(fx)
    , fy_(fy)
    , cx_(cx)
    , cy_(cy)
    , pose_(std::move(pose))
{
    if (!(fx > 0.0 && fy > 0.0 && std::isfinite(fx) && std::isfinite(fy)))
        fail(ErrorCode::DomainError, "focal lengths must be positive");
    if (!std::isfinite(cx) || !std::isfinite(cy) || !pose_.translation.allFinite())
        fail(ErrorCode::DomainError, "camera parameters must be finite");
    const Eigen::Matrix3d& r = pose_.rotation;
    const double off = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(off <= kOrthonormalTolerance) || r.determinant() <= 0.0)
        fail(ErrorCode::DomainError, "camera rotation is not orthonormal");
}

RigidTransform look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up)
{
    // Rows of the rotation are the camera axes expressed in world coordinates.
    const Eigen::Vector3d z = (target - eye).normalized();
    const Eigen::Vector3d x = z.cross(up).normalized();
    const Eigen::Vector3d y = z.cross(x);
    RigidTransform t;
    t.rotation.row(0) = x.transpose();
    t.rotation.row(1) = y.transpose();
    t.rotation.row(2) = z.transpose();
    t.translation = -t.rotation * eye;
    return t;
}

} // namespace dpface
