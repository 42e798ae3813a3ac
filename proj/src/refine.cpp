#include "dpface/refine.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include "dpface/error.hpp"
#include "dpface/parallel.hpp"

namespace dpface::refine {

void ConsistencyConfig::validate() const
{
    if (!(depth_tol > 0.0) || !std::isfinite(depth_tol))
        fail(ErrorCode::DomainError, "depth_tol must be positive");
    if (min_views < 1)
        fail(ErrorCode::DomainError, "min_views must be at least 1");
    if (photo_tol && !(*photo_tol >= 0.0))
        fail(ErrorCode::DomainError, "photo_tol must be non-negative");
}

int consistent_views(const Eigen::Vector3d& point, std::span<const View> views, const ConsistencyConfig& cfg)
{
    int count = 0;
    double samples[64];
    int sampled = 0;
    for (const auto& view : views) {
        const Eigen::Vector3d pc = view.camera.to_camera(point);
        if (!(pc.z() > 0.0))
            continue;
        const Eigen::Vector2d px = view.camera.pixel(pc);
        const double ur = std::round(px.x());
        const double vr = std::round(px.y());
        if (!(ur >= 0.0 && vr >= 0.0 && ur < view.depth.width() && vr < view.depth.height()))
            continue;
        const int u = int(ur);
        const int v = int(vr);
        if (!view.depth.valid(u, v) || std::abs(view.depth.value(u, v) - pc.z()) > cfg.depth_tol)
            continue;
        ++count;
        if (cfg.photo_tol && sampled < 64)
            samples[sampled++] = view.image->at(u, v);
    }
    if (!cfg.photo_tol || sampled == 0)
        return count;
    std::vector<double> sorted(samples, samples + sampled);
    std::sort(sorted.begin(), sorted.end());
    const double median = sampled % 2 ? sorted[std::size_t(sampled / 2)]
                                      : 0.5 * (sorted[std::size_t(sampled / 2 - 1)] + sorted[std::size_t(sampled / 2)]);
    int agree = 0;
    for (int k = 0; k < sampled; ++k)
        agree += std::abs(samples[k] - median) <= *cfg.photo_tol ? 1 : 0;
    return agree;
}

PointCloud filter_points(const PointCloud& cloud, std::span<const View> views, const ConsistencyConfig& cfg)
{
    cfg.validate();
    if (views.empty())
        fail(ErrorCode::EmptyInput, "no views supplied");
    if (int(views.size()) < cfg.min_views)
        fail(ErrorCode::DomainError, "fewer views than min_views");
    for (const auto& v : views) {
        if (cfg.photo_tol && (!v.image || v.image->width() != v.depth.width() || v.image->height() != v.depth.height() ||
                              v.image->channels() != 1))
            fail(ErrorCode::ShapeError, "photometric filtering needs one grayscale image per view");
    }
    std::vector<char> keep(cloud.size(), 0);
    parallel_for(0, long(cloud.size()), [&](long i) {
        keep[std::size_t(i)] = consistent_views(cloud.points()[std::size_t(i)], views, cfg) >= cfg.min_views;
    });
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < keep.size(); ++i)
        if (keep[i])
            indices.push_back(i);
    return cloud.select(indices);
}

void RefineConfig::validate() const
{
    if (!(lambda >= 0.0 && lambda <= 1.0))
        fail(ErrorCode::DomainError, "lambda must lie in [0, 1]");
    if (!(solver_tol > 0.0))
        fail(ErrorCode::DomainError, "solver_tol must be positive");
    if (max_iters < 1)
        fail(ErrorCode::DomainError, "max_iters must be positive");
}

namespace {

// One linear residual: Σ coeff_k · z[var_k] − rhs.
struct Row {
    int var[2] = {-1, -1};
    double coeff[2] = {0.0, 0.0};
    double rhs = 0.0;
};

struct Problem {
    std::vector<int> var_of_pixel; // -1 for fixed pixels
    std::vector<std::size_t> pixel_of_var;
    std::vector<Row> rows;
};

Problem build_problem(const DepthMap& measured, const NormalMap& normals, const PinholeCamera& cam, double lambda)
{
    const int w = measured.width();
    const int h = measured.height();
    Problem pr;
    pr.var_of_pixel.assign(measured.pixel_count(), -1);
    for (std::size_t i = 0; i < measured.pixel_count(); ++i) {
        if (measured.valid(i) && normals.valid(i)) {
            pr.var_of_pixel[i] = int(pr.pixel_of_var.size());
            pr.pixel_of_var.push_back(i);
        }
    }
    const double wd = std::sqrt(lambda);
    const double wn = std::sqrt(1.0 - lambda);
    auto var_at = [&](int x, int y) -> int {
        if (x < 0 || y < 0 || x >= w || y >= h)
            return -1;
        return pr.var_of_pixel[measured.index(x, y)];
    };
    for (std::size_t k = 0; k < pr.pixel_of_var.size(); ++k) {
        const std::size_t i = pr.pixel_of_var[k];
        const int x = int(i % std::size_t(w));
        const int y = int(i / std::size_t(w));
        const Eigen::Vector3d rp = cam.ray(x, y);
        const Eigen::Vector3d np = normals.normal(i);
        if (wd > 0.0) {
            const double s = wd * rp.norm();
            Row r;
            r.var[0] = int(k);
            r.coeff[0] = s;
            r.rhs = s * measured.value(i);
            pr.rows.push_back(r);
        }
        if (wn == 0.0)
            continue;
        for (int axis = 0; axis < 2; ++axis) {
            const int dx = axis == 0 ? 1 : 0;
            const int dy = axis == 0 ? 0 : 1;
            int a = var_at(x + dx, y + dy); // forward: X_a − X_p
            int b = int(k);
            int qx = x + dx, qy = y + dy, px = x, py = y;
            if (a < 0) {
                a = int(k);
                b = var_at(x - dx, y - dy);
                qx = x;
                qy = y;
                px = x - dx;
                py = y - dy;
                if (b < 0)
                    continue;
            }
            Row r;
            r.var[0] = a;
            r.coeff[0] = wn * cam.ray(qx, qy).dot(np);
            r.var[1] = b;
            r.coeff[1] = -wn * cam.ray(px, py).dot(np);
            pr.rows.push_back(r);
        }
    }
    return pr;
}

double problem_energy(const Problem& pr, const Eigen::VectorXd& z)
{
    double e = 0.0;
    for (const auto& r : pr.rows) {
        double v = -r.rhs;
        for (int t = 0; t < 2; ++t)
            if (r.var[t] >= 0)
                v += r.coeff[t] * z(r.var[t]);
        e += v * v;
    }
    return e;
}

void check_inputs(const DepthMap& depth, const NormalMap& normals)
{
    if (depth.width() != normals.width() || depth.height() != normals.height())
        fail(ErrorCode::ShapeError, "depth and normal maps differ in shape");
}

} // namespace

double refine_energy(std::span<const double> z, const DepthMap& measured, const NormalMap& normals,
                     const PinholeCamera& cam, double lambda)
{
    check_inputs(measured, normals);
    if (z.size() != measured.pixel_count())
        fail(ErrorCode::ShapeError, "depth vector size mismatch");
    if (!(lambda >= 0.0 && lambda <= 1.0))
        fail(ErrorCode::DomainError, "lambda must lie in [0, 1]");
    const Problem pr = build_problem(measured, normals, cam, lambda);
    Eigen::VectorXd x(Eigen::Index(pr.pixel_of_var.size()));
    for (std::size_t k = 0; k < pr.pixel_of_var.size(); ++k)
        x(Eigen::Index(k)) = z[pr.pixel_of_var[k]];
    return problem_energy(pr, x);
}

RefineResult refine_depth(const DepthMap& depth, const NormalMap& normals, const PinholeCamera& cam,
                          const RefineConfig& cfg)
{
    cfg.validate();
    check_inputs(depth, normals);
    RefineResult out;
    if (cfg.lambda == 1.0) {
        out.depth = depth;
        return out;
    }
    const Problem pr = build_problem(depth, normals, cam, cfg.lambda);
    const auto n = Eigen::Index(pr.pixel_of_var.size());
    Eigen::VectorXd x0(n);
    for (Eigen::Index k = 0; k < n; ++k)
        x0(k) = depth.value(pr.pixel_of_var[std::size_t(k)]);
    out.energy_before = problem_energy(pr, x0);
    if (n == 0) {
        out.depth = depth;
        return out;
    }

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(pr.rows.size() * 2);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(Eigen::Index(pr.rows.size()));
    for (std::size_t r = 0; r < pr.rows.size(); ++r) {
        for (int t = 0; t < 2; ++t)
            if (pr.rows[r].var[t] >= 0)
                triplets.emplace_back(Eigen::Index(r), pr.rows[r].var[t], pr.rows[r].coeff[t]);
        b(Eigen::Index(r)) = pr.rows[r].rhs;
    }
    Eigen::SparseMatrix<double> a(Eigen::Index(pr.rows.size()), n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    const Eigen::SparseMatrix<double> ata = Eigen::SparseMatrix<double>(a.transpose()) * a;
    const Eigen::VectorXd atb = a.transpose() * b;

    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(cfg.solver_tol);
    cg.setMaxIterations(cfg.max_iters);
    cg.compute(ata);
    Eigen::VectorXd x = cg.solveWithGuess(atb, x0);
    out.iterations = int(cg.iterations());
    out.residual = cg.error();
    out.converged = cg.info() == Eigen::Success;

    double e = x.allFinite() ? problem_energy(pr, x) : out.energy_before;
    if (!x.allFinite() || e > out.energy_before) {
        x = x0;
        e = out.energy_before;
    }
    out.energy_after = e;

    std::vector<double> z(depth.values().begin(), depth.values().end());
    Mask mask(depth.mask().begin(), depth.mask().end());
    for (Eigen::Index k = 0; k < n; ++k) {
        const std::size_t i = pr.pixel_of_var[std::size_t(k)];
        if (x(k) > 0.0) {
            z[i] = x(k);
        } else {
            z[i] = 0.0;
            mask[i] = 0;
            ++out.masked_nonpositive;
        }
    }
    out.depth = DepthMap(depth.width(), depth.height(), std::move(z), std::move(mask));
    return out;
}

} // namespace dpface::refine
