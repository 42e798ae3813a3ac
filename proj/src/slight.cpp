#include "dpface/slight.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dpface/error.hpp"
#include "dpface/parallel.hpp"

namespace dpface::slight {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct StackSlot {
    Orientation orientation;
    int local;
};

StackSlot slot(const PatternSet& cfg, int index)
{
    if (index < 0 || index >= cfg.image_count())
        fail(ErrorCode::DomainError, "pattern index out of range");
    const int per = cfg.images_per_orientation();
    return {cfg.orientations[std::size_t(index / per)], index % per};
}

void require_same_shape(std::span<const ImageF> images, const char* what)
{
    for (const auto& img : images) {
        if (!img.same_shape(images.front()) || img.channels() != 1)
            fail(ErrorCode::ShapeError, std::string(what) + " must be single-channel images of one shape");
    }
}

} // namespace

void PatternSet::validate() const
{
    if (gray_bits < 1 || gray_bits > 16)
        fail(ErrorCode::DomainError, "gray_bits must be in [1, 16]");
    if (phase_steps < 3)
        fail(ErrorCode::DomainError, "phase_steps must be at least 3");
    if (proj_width < 1 || proj_height < 1)
        fail(ErrorCode::DomainError, "projector extent must be positive");
    if (orientations.empty() || orientations.size() > 2 ||
        (orientations.size() == 2 && orientations[0] == orientations[1]))
        fail(ErrorCode::DomainError, "orientations must be one or two distinct entries");
    for (Orientation o : orientations) {
        if (phase_period != 0 && phase_period != stripe_width(o))
            fail(ErrorCode::DomainError, "phase period must equal the gray stripe width");
    }
}

int PatternSet::stripe_width(Orientation o) const
{
    const int bands = 1 << gray_bits;
    return (extent(o) + bands - 1) / bands;
}

std::uint32_t gray_encode(std::uint32_t binary)
{
    return binary ^ (binary >> 1);
}

std::uint32_t gray_decode(std::uint32_t gray)
{
    std::uint32_t b = gray;
    for (std::uint32_t shift = 1; shift < 32; shift <<= 1)
        b ^= b >> shift;
    return b;
}

double pattern_value(const PatternSet& cfg, int index, double px, double py)
{
    const StackSlot s = slot(cfg, index);
    const double p = s.orientation == Orientation::Horizontal ? px : py;
    const int stripe = cfg.stripe_width(s.orientation);
    if (s.local < 2 * cfg.gray_bits) {
        const int bit = s.local % cfg.gray_bits;
        const double pixel = std::max(0.0, std::round(p));
        const auto band = std::uint32_t(std::floor(pixel / stripe));
        const std::uint32_t code = gray_encode(band);
        const double value = double((code >> (cfg.gray_bits - 1 - bit)) & 1u);
        return s.local < cfg.gray_bits ? value : 1.0 - value;
    }
    const int k = s.local - 2 * cfg.gray_bits;
    return 0.5 + 0.5 * std::cos(kTwoPi * p / stripe - kTwoPi * k / cfg.phase_steps);
}

ImageF generate_pattern(const PatternSet& cfg, int index)
{
    cfg.validate();
    std::vector<double> data(std::size_t(cfg.proj_width) * std::size_t(cfg.proj_height));
    for (int y = 0; y < cfg.proj_height; ++y)
        for (int x = 0; x < cfg.proj_width; ++x)
            data[std::size_t(y) * std::size_t(cfg.proj_width) + std::size_t(x)] = pattern_value(cfg, index, x, y);
    return ImageF(cfg.proj_width, cfg.proj_height, std::move(data));
}

std::vector<ImageF> generate_patterns(const PatternSet& cfg)
{
    cfg.validate();
    std::vector<ImageF> out;
    out.reserve(std::size_t(cfg.image_count()));
    for (int i = 0; i < cfg.image_count(); ++i)
        out.push_back(generate_pattern(cfg, i));
    return out;
}

std::size_t PhaseField::valid_count() const
{
    return std::size_t(std::count(mask.begin(), mask.end(), std::uint8_t(1)));
}

BandMap decode_gray(std::span<const ImageF> codes, std::span<const ImageF> inverses, double contrast_threshold)
{
    if (codes.empty())
        fail(ErrorCode::EmptyInput, "no gray-code images");
    if (codes.size() != inverses.size())
        fail(ErrorCode::ShapeError, "gray codes and inverses differ in count");
    if (codes.size() > 31)
        fail(ErrorCode::DomainError, "too many gray-code bits");
    require_same_shape(codes, "gray codes");
    require_same_shape(inverses, "gray inverses");
    if (!codes.front().same_shape(inverses.front()))
        fail(ErrorCode::ShapeError, "gray codes and inverses differ in shape");

    BandMap out;
    out.width = codes.front().width();
    out.height = codes.front().height();
    const std::size_t n = codes.front().pixel_count();
    out.band.assign(n, 0);
    out.mask.assign(n, 0);
    parallel_for(0, long(n), [&](long i) {
        std::uint32_t gray = 0;
        bool confident = true;
        for (std::size_t b = 0; b < codes.size(); ++b) {
            const double diff = codes[b].data()[std::size_t(i)] - inverses[b].data()[std::size_t(i)];
            if (std::abs(diff) < contrast_threshold || diff == 0.0)
                confident = false;
            gray = (gray << 1) | (diff > 0.0 ? 1u : 0u);
        }
        if (confident) {
            out.band[std::size_t(i)] = int(gray_decode(gray));
            out.mask[std::size_t(i)] = 1;
        }
    });
    return out;
}

WrappedPhase decode_phase(std::span<const ImageF> shots, double amplitude_threshold)
{
    if (shots.size() < 3)
        fail(ErrorCode::InsufficientShots, "phase decoding needs at least 3 shots");
    require_same_shape(shots, "phase shots");
    const int k_count = int(shots.size());
    std::vector<double> sin_k(shots.size()), cos_k(shots.size());
    for (int k = 0; k < k_count; ++k) {
        sin_k[std::size_t(k)] = std::sin(kTwoPi * k / k_count);
        cos_k[std::size_t(k)] = std::cos(kTwoPi * k / k_count);
    }

    WrappedPhase out;
    out.width = shots.front().width();
    out.height = shots.front().height();
    const std::size_t n = shots.front().pixel_count();
    out.phase.assign(n, 0.0);
    out.amplitude.assign(n, 0.0);
    out.mask.assign(n, 0);
    parallel_for(0, long(n), [&](long i) {
        double s = 0.0, c = 0.0;
        for (std::size_t k = 0; k < shots.size(); ++k) {
            const double v = shots[k].data()[std::size_t(i)];
            s += v * sin_k[k];
            c += v * cos_k[k];
        }
        const double amp = 2.0 / k_count * std::hypot(s, c);
        double phi = std::atan2(s, c);
        if (phi < 0.0)
            phi += kTwoPi;
        if (phi >= kTwoPi)
            phi = 0.0;
        out.amplitude[std::size_t(i)] = amp;
        if (amp >= amplitude_threshold && amp > 0.0) {
            out.phase[std::size_t(i)] = phi;
            out.mask[std::size_t(i)] = 1;
        }
    });
    return out;
}

PhaseField unwrap(const BandMap& bands, const WrappedPhase& wrapped, const UnwrapOptions& options)
{
    if (bands.width != wrapped.width || bands.height != wrapped.height)
        fail(ErrorCode::ShapeError, "band and phase maps differ in shape");
    if (!(options.period > 0.0) || !(options.extent > 0.0) || options.correction_radius < 0)
        fail(ErrorCode::DomainError, "invalid unwrap options");
    const int w = bands.width;
    const int h = bands.height;
    const std::size_t n = std::size_t(w) * std::size_t(h);

    std::vector<double> naive(n, 0.0);
    Mask valid(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (bands.mask[i] && wrapped.mask[i]) {
            naive[i] = (bands.band[i] + wrapped.phase[i] / kTwoPi) * options.period;
            valid[i] = 1;
        }
    }

    PhaseField out;
    out.width = w;
    out.height = h;
    out.orientation = options.orientation;
    out.period = options.period;
    out.unwrapped.assign(n, 0.0);
    out.mask.assign(n, 0);
    const bool along_x = options.orientation == Orientation::Horizontal;
    const int r = options.correction_radius;
    parallel_for(0, long(n), [&](long li) {
        const auto i = std::size_t(li);
        if (!valid[i])
            return;
        const int x = int(i % std::size_t(w));
        const int y = int(i / std::size_t(w));
        double neighbors[64];
        int count = 0;
        for (int o = -r; o <= r && count < 64; ++o) {
            const int nx = along_x ? x + o : x;
            const int ny = along_x ? y : y + o;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h)
                continue;
            const std::size_t j = std::size_t(ny) * std::size_t(w) + std::size_t(nx);
            if (valid[j])
                neighbors[count++] = naive[j];
        }
        double u = naive[i];
        if (count >= 3) {
            std::sort(neighbors, neighbors + count);
            const double median = count % 2 ? neighbors[count / 2]
                                            : 0.5 * (neighbors[count / 2 - 1] + neighbors[count / 2]);
            const double k = std::round((median - u) / options.period);
            if (std::abs(k) > 1.0)
                return;
            u += k * options.period;
        }
        if (u < 0.0 || u >= options.extent)
            return;
        out.unwrapped[i] = u;
        out.mask[i] = 1;
    });
    return out;
}

std::vector<PhaseField> decode_stack(std::span<const ImageF> captures, const PatternSet& cfg)
{
    cfg.validate();
    if (int(captures.size()) != cfg.image_count())
        fail(ErrorCode::ShapeError, "capture count does not match the pattern set");
    std::vector<PhaseField> fields;
    const auto per = std::size_t(cfg.images_per_orientation());
    const auto bits = std::size_t(cfg.gray_bits);
    for (std::size_t oi = 0; oi < cfg.orientations.size(); ++oi) {
        const Orientation o = cfg.orientations[oi];
        const auto stack = captures.subspan(oi * per, per);
        const BandMap bands = decode_gray(stack.subspan(0, bits), stack.subspan(bits, bits));
        const WrappedPhase phase = decode_phase(stack.subspan(2 * bits));
        UnwrapOptions opt;
        opt.orientation = o;
        opt.period = cfg.period(o);
        opt.extent = cfg.extent(o);
        fields.push_back(unwrap(bands, phase, opt));
    }
    return fields;
}

DepthMap triangulate(const PhaseField& field, const PinholeCamera& cam, const PinholeCamera& proj)
{
    const std::size_t n = std::size_t(field.width) * std::size_t(field.height);
    if (field.unwrapped.size() != n || field.mask.size() != n)
        fail(ErrorCode::ShapeError, "phase field size mismatch");
    // Camera center and camera-to-projector rotation, both in the projector frame.
    const Eigen::Vector3d center = proj.to_camera(cam.center());
    const Eigen::Matrix3d rot = proj.pose().rotation * cam.pose().rotation.transpose();
    const bool columns = field.orientation == Orientation::Horizontal;

    std::vector<double> z(n, 0.0);
    Mask mask(n, 0);
    parallel_for(0, long(n), [&](long li) {
        const auto i = std::size_t(li);
        if (!field.mask[i])
            return;
        const double u = double(i % std::size_t(field.width));
        const double v = double(i / std::size_t(field.width));
        const double p = field.unwrapped[i];
        const Eigen::Vector3d normal = columns ? Eigen::Vector3d(1.0, 0.0, -(p - proj.cx()) / proj.fx())
                                               : Eigen::Vector3d(0.0, 1.0, -(p - proj.cy()) / proj.fy());
        const double denom = normal.dot(rot * cam.ray(u, v));
        if (std::abs(denom) < 1e-12)
            return;
        const double t = -normal.dot(center) / denom;
        if (t > 0.0 && std::isfinite(t)) {
            z[i] = t;
            mask[i] = 1;
        }
    });
    return DepthMap(field.width, field.height, std::move(z), std::move(mask));
}

Rig make_default_rig(double baseline, double target_depth)
{
    Rig rig;
    rig.camera = PinholeCamera(1200.0, 1200.0, 127.5, 127.5);
    const Eigen::Vector3d eye(baseline, 0.0, 0.0);
    const Eigen::Vector3d target(0.0, 0.0, target_depth);
    rig.projector = PinholeCamera(3000.0, 3000.0, 511.5, 383.5, look_at(eye, target));
    return rig;
}

namespace {

struct ProjectorHit {
    double px = 0.0;
    double py = 0.0;
    bool hit = false;
};

std::vector<ProjectorHit> projector_hits(const PatternSet& cfg, const DepthMap& depth, const Rig& rig)
{
    std::vector<ProjectorHit> hits(depth.pixel_count());
    parallel_for(0, long(hits.size()), [&](long li) {
        const auto i = std::size_t(li);
        if (!depth.valid(i))
            return;
        const double u = double(i % std::size_t(depth.width()));
        const double v = double(i / std::size_t(depth.width()));
        const Eigen::Vector3d world = rig.camera.to_world(rig.camera.ray(u, v) * depth.value(i));
        const Eigen::Vector3d pc = rig.projector.to_camera(world);
        if (!(pc.z() > 0.0))
            return;
        const Eigen::Vector2d px = rig.projector.pixel(pc);
        if (px.x() < -0.5 || px.y() < -0.5 || px.x() >= cfg.proj_width - 0.5 || px.y() >= cfg.proj_height - 0.5)
            return;
        hits[i] = {px.x(), px.y(), true};
    });
    return hits;
}

} // namespace

std::vector<ImageF> render_captures(const PatternSet& cfg, const DepthMap& depth, const Rig& rig,
                                    const CaptureOptions& options)
{
    cfg.validate();
    const std::vector<ProjectorHit> hits = projector_hits(cfg, depth, rig);
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> noise(0.0, options.noise_sigma > 0.0 ? options.noise_sigma : 1.0);
    std::vector<ImageF> out;
    out.reserve(std::size_t(cfg.image_count()));
    for (int k = 0; k < cfg.image_count(); ++k) {
        std::vector<double> img(hits.size(), options.ambient);
        parallel_for(0, long(hits.size()), [&](long li) {
            const auto& hit = hits[std::size_t(li)];
            if (hit.hit)
                img[std::size_t(li)] += options.gain * pattern_value(cfg, k, hit.px, hit.py);
        });
        if (options.noise_sigma > 0.0)
            for (double& v : img)
                v += noise(rng);
        out.emplace_back(depth.width(), depth.height(), std::move(img));
    }
    return out;
}

PhaseField true_projector_coordinate(const PatternSet& cfg, Orientation o, const DepthMap& depth, const Rig& rig)
{
    cfg.validate();
    const std::vector<ProjectorHit> hits = projector_hits(cfg, depth, rig);
    PhaseField f;
    f.width = depth.width();
    f.height = depth.height();
    f.orientation = o;
    f.period = cfg.period(o);
    f.unwrapped.assign(hits.size(), 0.0);
    f.mask.assign(hits.size(), 0);
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (!hits[i].hit)
            continue;
        f.unwrapped[i] = o == Orientation::Horizontal ? hits[i].px : hits[i].py;
        f.mask[i] = 1;
    }
    return f;
}

} // namespace dpface::slight
