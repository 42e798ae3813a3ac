#include "dpface/photostereo.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "dpface/error.hpp"
#include "dpface/parallel.hpp"

namespace dpface::photostereo {

void LightSet::validate() const
{
    if (directions.empty())
        fail(ErrorCode::DegenerateLights, "light set is empty");
    for (const auto& l : directions) {
        if (!l.allFinite() || std::abs(l.norm() - 1.0) > kUnitTolerance)
            fail(ErrorCode::DomainError, "light directions must be unit vectors");
    }
}

Eigen::Vector3d light_from_highlight(const ChromeBall& ball, double hx, double hy)
{
    if (!(ball.r > 0.0) || !std::isfinite(ball.r) || !std::isfinite(ball.cx) || !std::isfinite(ball.cy))
        fail(ErrorCode::DomainError, "chrome ball needs a finite center and positive radius");
    if (!std::isfinite(hx) || !std::isfinite(hy))
        fail(ErrorCode::DomainError, "highlight must be finite");
    const double nx = hx - ball.cx;
    const double ny = hy - ball.cy;
    const double rem = ball.r * ball.r - nx * nx - ny * ny;
    if (rem < 0.0)
        fail(ErrorCode::OutOfBall, "highlight lies outside the ball");
    const Eigen::Vector3d n = Eigen::Vector3d(nx, ny, std::sqrt(rem)) / ball.r;
    const Eigen::Vector3d view(0.0, 0.0, 1.0);
    const Eigen::Vector3d l = 2.0 * n.dot(view) * n - view;
    return l.normalized();
}

Eigen::Vector3d to_camera_normal(const Eigen::Vector3d& ps)
{
    return {-ps.x(), -ps.y(), ps.z()};
}

Eigen::Vector3d to_photometric_normal(const Eigen::Vector3d& cam)
{
    return {-cam.x(), -cam.y(), cam.z()};
}

namespace {

// Solves the rows flagged in `use`; returns false if they are rank-deficient.
bool solve_rows(const Eigen::MatrixXd& lmat, const Eigen::VectorXd& obs, const std::vector<char>& use,
                Eigen::Vector3d& g)
{
    int rows = 0;
    for (char u : use)
        rows += u ? 1 : 0;
    if (rows < 3)
        return false;
    Eigen::MatrixXd a(rows, 3);
    Eigen::VectorXd b(rows);
    int r = 0;
    for (Eigen::Index k = 0; k < lmat.rows(); ++k) {
        if (!use[std::size_t(k)])
            continue;
        a.row(r) = lmat.row(k);
        b(r) = obs(k);
        ++r;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < 3)
        return false;
    g = qr.solve(b);
    return g.allFinite();
}

} // namespace

PsResult solve_normals(std::span<const ImageF> images, const LightSet& lights, const SolveOptions& options)
{
    lights.validate();
    if (images.size() != lights.directions.size())
        fail(ErrorCode::ShapeError, "image count differs from light count");
    if (images.size() < 3)
        fail(ErrorCode::DegenerateLights, "photometric stereo needs at least 3 lights");
    for (const auto& img : images)
        if (!img.same_shape(images.front()) || img.channels() != 1)
            fail(ErrorCode::ShapeError, "images must be single-channel and share one shape");

    const auto m = Eigen::Index(images.size());
    Eigen::MatrixXd lmat(m, 3);
    for (Eigen::Index k = 0; k < m; ++k)
        lmat.row(k) = lights.directions[std::size_t(k)].transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(lmat);
    const auto sv = svd.singularValues();
    if (sv(2) <= 1e-10 * sv(0))
        fail(ErrorCode::DegenerateLights, "light directions span fewer than 3 dimensions");

    const int w = images.front().width();
    const int h = images.front().height();
    const std::size_t n = images.front().pixel_count();
    std::vector<double> normals(3 * n, 0.0);
    std::vector<double> albedo(n, 0.0);
    Mask mask(n, 0);
    parallel_for(0, long(n), [&](long li) {
        const auto i = std::size_t(li);
        Eigen::VectorXd obs(m);
        std::vector<char> lit(static_cast<std::size_t>(m)), usable(static_cast<std::size_t>(m));
        bool any_lit = false;
        for (Eigen::Index k = 0; k < m; ++k) {
            const double v = images[std::size_t(k)].data()[i];
            obs(k) = v;
            const bool highlight = v >= options.highlight_threshold;
            lit[std::size_t(k)] = v > options.shadow_threshold && !highlight;
            usable[std::size_t(k)] = !highlight;
            any_lit = any_lit || lit[std::size_t(k)];
        }
        if (!any_lit)
            return;
        Eigen::Vector3d g;
        if (!solve_rows(lmat, obs, lit, g)) {
            if (!solve_rows(lmat, obs, usable, g))
                return;
            for (Eigen::Index k = 0; k < m; ++k) {
                if (usable[std::size_t(k)] && !lit[std::size_t(k)] &&
                    lmat.row(k).dot(g) > options.shadow_threshold)
                    return;
            }
        }
        const double rho = g.norm();
        if (!(rho > 0.0) || !std::isfinite(rho))
            return;
        const Eigen::Vector3d nc = to_camera_normal(g / rho);
        normals[3 * i] = nc.x();
        normals[3 * i + 1] = nc.y();
        normals[3 * i + 2] = nc.z();
        albedo[i] = rho;
        mask[i] = 1;
    });
    return {NormalMap(w, h, std::move(normals), std::move(mask)), ImageF(w, h, std::move(albedo))};
}

std::vector<ImageF> render_lambertian(const NormalMap& normals, const ImageF& albedo, const LightSet& lights)
{
    lights.validate();
    if (albedo.width() != normals.width() || albedo.height() != normals.height() || albedo.channels() != 1)
        fail(ErrorCode::ShapeError, "albedo and normal map differ in shape");
    std::vector<ImageF> out;
    for (const auto& l : lights.directions) {
        std::vector<double> img(normals.pixel_count(), 0.0);
        parallel_for(0, long(img.size()), [&](long li) {
            const auto i = std::size_t(li);
            if (normals.valid(i))
                img[i] = albedo.data()[i] * std::max(0.0, l.dot(to_photometric_normal(normals.normal(i))));
        });
        out.emplace_back(normals.width(), normals.height(), std::move(img));
    }
    return out;
}

} // namespace dpface::photostereo
