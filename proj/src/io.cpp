#include "dpface/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <png.h>

#include "dpface/error.hpp"

namespace dpface::io {

namespace fs = std::filesystem;

namespace {

/// Minimal cursor over a byte buffer for the netpbm-style headers.
class HeaderReader {
public:
    HeaderReader(std::string_view bytes, std::size_t start)
        : bytes_(bytes)
        , pos_(start)
    {
    }

    std::size_t offset() const { return pos_; }

    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size()) {
            const char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n')
                    ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::string_view token()
    {
        skip_space_and_comments();
        const std::size_t start = pos_;
        while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
            ++pos_;
        if (start == pos_)
            throw ParseError(start, "unexpected end of header");
        return bytes_.substr(start, pos_ - start);
    }

    long integer(const char* what)
    {
        skip_space_and_comments();
        const std::size_t start = pos_;
        const std::string_view tok = token();
        long value = 0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
            throw ParseError(start, std::string("malformed ") + what);
        return value;
    }

    double real(const char* what)
    {
        skip_space_and_comments();
        const std::size_t start = pos_;
        const std::string tok(token());
        char* end = nullptr;
        const double value = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size() || !std::isfinite(value))
            throw ParseError(start, std::string("malformed ") + what);
        return value;
    }

    /// Consumes the single whitespace byte that separates the header from the raster.
    void end_of_header()
    {
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
            throw ParseError(pos_, "missing whitespace after header");
        ++pos_;
    }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t byteswap32(std::uint32_t v)
{
    return (v >> 24) | ((v >> 8) & 0x0000FF00u) | ((v << 8) & 0x00FF0000u) | (v << 24);
}

void check_dimension(long value, std::size_t offset)
{
    if (value <= 0 || value > (1L << 20))
        throw ParseError(offset, "image dimension out of range");
}

std::uint16_t to_u16(double v)
{
    const double s = std::round(std::clamp(v, 0.0, 1.0) * 65535.0);
    return static_cast<std::uint16_t>(s);
}

PfmData to_pfm(int width, int height, int channels, std::span<const double> values,
               std::span<const std::uint8_t> mask = {})
{
    PfmData out;
    out.width = width;
    out.height = height;
    out.channels = channels;
    out.samples.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const bool ok = mask.empty() || mask[i / std::size_t(channels)] != 0;
        out.samples[i] = ok ? static_cast<float>(values[i]) : std::numeric_limits<float>::quiet_NaN();
    }
    return out;
}

PfmData load_pfm(const fs::path& path)
{
    return parse_pfm(read_file(path));
}

/// Splits PFM samples into values + per-pixel mask according to the NaN policy.
void split_invalid(const PfmData& pfm, NanPolicy policy, std::vector<double>& values, Mask& mask)
{
    const std::size_t pixels = std::size_t(pfm.width) * std::size_t(pfm.height);
    values.assign(pfm.samples.size(), 0.0);
    mask.assign(pixels, 1);
    for (std::size_t p = 0; p < pixels; ++p) {
        for (int c = 0; c < pfm.channels; ++c) {
            const float s = pfm.samples[p * std::size_t(pfm.channels) + std::size_t(c)];
            if (!std::isfinite(s)) {
                if (policy == NanPolicy::Reject)
                    fail(ErrorCode::DomainError, "non-finite sample in map (pass allow-NaN to mask it)");
                mask[p] = 0;
            }
            values[p * std::size_t(pfm.channels) + std::size_t(c)] = static_cast<double>(s);
        }
    }
}

} // namespace

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file(const fs::path& path, std::string_view bytes)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorCode::IoError, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        fail(ErrorCode::IoError, "write failed for " + path.string());
}

// ---- PFM -------------------------------------------------------------------

PfmData parse_pfm(std::string_view bytes)
{
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != 'f' && bytes[1] != 'F'))
        throw ParseError(0, "not a PFM file");
    HeaderReader r(bytes, 2);
    PfmData out;
    out.channels = bytes[1] == 'F' ? 3 : 1;
    const std::size_t wpos = r.offset();
    const long w = r.integer("width");
    check_dimension(w, wpos);
    const std::size_t hpos = r.offset();
    const long h = r.integer("height");
    check_dimension(h, hpos);
    const std::size_t spos = r.offset();
    const double scale = r.real("scale");
    if (scale == 0.0)
        throw ParseError(spos, "PFM scale must be non-zero");
    r.end_of_header();
    const std::size_t data_start = r.offset();

    out.width = int(w);
    out.height = int(h);
    const std::size_t count = std::size_t(w) * std::size_t(h) * std::size_t(out.channels);
    if (bytes.size() - data_start < count * 4)
        throw ParseError(bytes.size(), "truncated PFM raster");

    const bool little = scale < 0.0;
    const bool swap = little != (std::endian::native == std::endian::little);
    out.samples.resize(count);
    const std::size_t row_len = std::size_t(w) * std::size_t(out.channels);
    for (long file_row = 0; file_row < h; ++file_row) {
        const std::size_t dst_row = std::size_t(h - 1 - file_row);
        for (std::size_t i = 0; i < row_len; ++i) {
            std::uint32_t raw;
            std::memcpy(&raw, bytes.data() + data_start + (std::size_t(file_row) * row_len + i) * 4, 4);
            if (swap)
                raw = byteswap32(raw);
            out.samples[dst_row * row_len + i] = std::bit_cast<float>(raw);
        }
    }
    return out;
}

std::string encode_pfm(const PfmData& data)
{
    std::string out = (data.channels == 3 ? "PF\n" : "Pf\n") + std::to_string(data.width) + " " + std::to_string(data.height) + "\n-1.0\n";
    const std::size_t header = out.size();
    const std::size_t row_len = std::size_t(data.width) * std::size_t(data.channels);
    out.resize(header + data.samples.size() * 4);
    for (int file_row = 0; file_row < data.height; ++file_row) {
        const std::size_t src_row = std::size_t(data.height - 1 - file_row);
        for (std::size_t i = 0; i < row_len; ++i) {
            std::uint32_t raw = std::bit_cast<std::uint32_t>(data.samples[src_row * row_len + i]);
            if constexpr (std::endian::native == std::endian::big)
                raw = byteswap32(raw);
            std::memcpy(out.data() + header + (std::size_t(file_row) * row_len + i) * 4, &raw, 4);
        }
    }
    return out;
}

ImageF read_pfm(const fs::path& path)
{
    const PfmData pfm = load_pfm(path);
    return ImageF(pfm.width, pfm.height, std::vector<double>(pfm.samples.begin(), pfm.samples.end()), pfm.channels);
}

DepthMap read_depth_pfm(const fs::path& path, NanPolicy policy)
{
    const PfmData pfm = load_pfm(path);
    if (pfm.channels != 1)
        fail(ErrorCode::ShapeError, "depth PFM must be single channel");
    std::vector<double> z;
    Mask mask;
    split_invalid(pfm, policy, z, mask);
    for (std::size_t i = 0; i < z.size(); ++i)
        if (!(z[i] > 0.0))
            mask[i] = 0;
    return DepthMap(pfm.width, pfm.height, std::move(z), std::move(mask));
}

DisparityMap read_disparity_pfm(const fs::path& path, NanPolicy policy)
{
    const PfmData pfm = load_pfm(path);
    if (pfm.channels != 1)
        fail(ErrorCode::ShapeError, "disparity PFM must be single channel");
    std::vector<double> d;
    Mask mask;
    split_invalid(pfm, policy, d, mask);
    return DisparityMap(pfm.width, pfm.height, std::move(d), std::move(mask));
}

NormalMap read_normal_pfm(const fs::path& path, NanPolicy policy)
{
    const PfmData pfm = load_pfm(path);
    if (pfm.channels != 3)
        fail(ErrorCode::ShapeError, "normal PFM must have three channels");
    std::vector<double> n;
    Mask mask;
    split_invalid(pfm, policy, n, mask);
    // float32 storage loses a few ulps of unit length; renormalize on load.
    for (std::size_t p = 0; p < mask.size(); ++p) {
        if (!mask[p])
            continue;
        Eigen::Map<Eigen::Vector3d> v(n.data() + 3 * p);
        const double len = v.norm();
        if (len > 0.0 && std::abs(len - 1.0) < 1e-3)
            v /= len;
    }
    return NormalMap(pfm.width, pfm.height, std::move(n), std::move(mask));
}

void write_pfm(const fs::path& path, const ImageF& image)
{
    write_file(path, encode_pfm(to_pfm(image.width(), image.height(), image.channels(), image.data())));
}

void write_pfm(const fs::path& path, const DepthMap& depth)
{
    write_file(path, encode_pfm(to_pfm(depth.width(), depth.height(), 1, depth.values(), depth.mask())));
}

void write_pfm(const fs::path& path, const DisparityMap& disparity)
{
    write_file(path, encode_pfm(to_pfm(disparity.width(), disparity.height(), 1, disparity.values(), disparity.mask())));
}

void write_pfm(const fs::path& path, const NormalMap& normals)
{
    write_file(path, encode_pfm(to_pfm(normals.width(), normals.height(), 3, normals.data(), normals.mask())));
}

// ---- PGM -------------------------------------------------------------------

ImageF parse_pgm16(std::string_view bytes)
{
    if (bytes.size() < 2 || bytes.substr(0, 2) != "P5")
        throw ParseError(0, "not a binary PGM file");
    HeaderReader r(bytes, 2);
    const std::size_t wpos = r.offset();
    const long w = r.integer("width");
    check_dimension(w, wpos);
    const std::size_t hpos = r.offset();
    const long h = r.integer("height");
    check_dimension(h, hpos);
    const std::size_t mpos = r.offset();
    const long maxval = r.integer("maxval");
    if (maxval <= 0 || maxval > 65535)
        throw ParseError(mpos, "PGM maxval out of range");
    r.end_of_header();
    const std::size_t start = r.offset();
    const std::size_t bps = maxval > 255 ? 2 : 1;
    const std::size_t count = std::size_t(w) * std::size_t(h);
    if (bytes.size() - start < count * bps)
        throw ParseError(bytes.size(), "truncated PGM raster");
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + start + i * bps);
        const unsigned v = bps == 2 ? (unsigned(p[0]) << 8) | unsigned(p[1]) : unsigned(p[0]);
        data[i] = double(v) / double(maxval);
    }
    return ImageF(int(w), int(h), std::move(data));
}

std::string encode_pgm16(const ImageF& image)
{
    if (image.channels() != 1)
        fail(ErrorCode::ShapeError, "PGM output requires a single-channel image");
    std::string out = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n65535\n";
    const std::size_t header = out.size();
    out.resize(header + image.pixel_count() * 2);
    for (std::size_t i = 0; i < image.pixel_count(); ++i) {
        const std::uint16_t v = to_u16(image.data()[i]);
        out[header + 2 * i] = static_cast<char>(v >> 8);
        out[header + 2 * i + 1] = static_cast<char>(v & 0xFF);
    }
    return out;
}

ImageF read_pgm16(const fs::path& path)
{
    return parse_pgm16(read_file(path));
}

void write_pgm16(const fs::path& path, const ImageF& image)
{
    write_file(path, encode_pgm16(image));
}

// ---- PNG -------------------------------------------------------------------

namespace {

struct PngFile {
    std::FILE* fp = nullptr;
    explicit PngFile(const fs::path& path, const char* mode)
        : fp(std::fopen(path.c_str(), mode))
    {
    }
    ~PngFile()
    {
        if (fp)
            std::fclose(fp);
    }
    PngFile(const PngFile&) = delete;
    PngFile& operator=(const PngFile&) = delete;
};

} // namespace

ImageF read_png16(const fs::path& path)
{
    PngFile file(path, "rb");
    if (!file.fp)
        fail(ErrorCode::IoError, "cannot open " + path.string());
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, file.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw ParseError(0, "not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorCode::IoError, "libpng initialisation failed");
    }
    std::vector<std::vector<unsigned char>> rows;
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    int depth = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(0, "corrupt PNG stream in " + path.string());
    }
    png_init_io(png, file.fp);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    int color = 0;
    png_get_IHDR(png, info, &width, &height, &depth, &color, nullptr, nullptr, nullptr);
    if (color == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA)
        png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);
    depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    rows.assign(height, std::vector<unsigned char>(rowbytes));
    std::vector<png_bytep> ptrs(height);
    for (png_uint_32 y = 0; y < height; ++y)
        ptrs[y] = rows[y].data();
    png_read_image(png, ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    std::vector<double> data(std::size_t(width) * height);
    const double maxval = depth == 16 ? 65535.0 : 255.0;
    for (png_uint_32 y = 0; y < height; ++y) {
        for (png_uint_32 x = 0; x < width; ++x) {
            unsigned v = depth == 16 ? (unsigned(rows[y][2 * x]) << 8) | rows[y][2 * x + 1] : rows[y][x];
            data[std::size_t(y) * width + x] = double(v) / maxval;
        }
    }
    return ImageF(int(width), int(height), std::move(data));
}

void write_png16(const fs::path& path, const ImageF& image)
{
    if (image.channels() != 1)
        fail(ErrorCode::ShapeError, "PNG output requires a single-channel image");
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    PngFile file(path, "wb");
    if (!file.fp)
        fail(ErrorCode::IoError, "cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorCode::IoError, "libpng initialisation failed");
    }
    std::vector<unsigned char> row(std::size_t(image.width()) * 2);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorCode::IoError, "PNG encode failed for " + path.string());
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, png_uint_32(image.width()), png_uint_32(image.height()), 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const std::uint16_t v = to_u16(image.at(x, y));
            row[2 * std::size_t(x)] = static_cast<unsigned char>(v >> 8);
            row[2 * std::size_t(x) + 1] = static_cast<unsigned char>(v & 0xFF);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

ImageF read_image(const fs::path& path)
{
    const std::string ext = path.extension().string();
    if (ext == ".pfm")
        return read_pfm(path);
    if (ext == ".pgm")
        return read_pgm16(path);
    if (ext == ".png")
        return read_png16(path);
    fail(ErrorCode::IoError, "unsupported image extension: " + path.string());
}

// ---- PLY -------------------------------------------------------------------

PointCloud parse_ply(std::string_view text)
{
    std::size_t pos = 0;
    auto next_line = [&](std::string_view& line) -> bool {
        if (pos >= text.size())
            return false;
        const std::size_t end = text.find('\n', pos);
        const std::size_t stop = end == std::string_view::npos ? text.size() : end;
        line = text.substr(pos, stop - pos);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        pos = stop + 1;
        return true;
    };
    auto words = [](std::string_view line) {
        std::vector<std::string> out;
        std::istringstream ss{std::string(line)};
        for (std::string w; ss >> w;)
            out.push_back(w);
        return out;
    };

    std::string_view line;
    if (!next_line(line) || line != "ply")
        throw ParseError(0, "missing 'ply' magic");
    std::size_t line_start = pos;
    if (!next_line(line) || words(line) != std::vector<std::string>{"format", "ascii", "1.0"})
        throw ParseError(line_start, "only 'format ascii 1.0' is supported");

    long vertex_count = -1;
    std::vector<std::string> props;
    bool in_vertex = false;
    for (;;) {
        line_start = pos;
        if (!next_line(line))
            throw ParseError(pos, "missing end_header");
        const auto w = words(line);
        if (w.empty() || w[0] == "comment" || w[0] == "obj_info")
            continue;
        if (w[0] == "end_header")
            break;
        if (w[0] == "element") {
            if (w.size() != 3)
                throw ParseError(line_start, "malformed element line");
            in_vertex = w[1] == "vertex";
            if (in_vertex) {
                char* end = nullptr;
                vertex_count = std::strtol(w[2].c_str(), &end, 10);
                if (*end != '\0' || vertex_count < 0)
                    throw ParseError(line_start, "malformed vertex count");
            } else if (w[2] != "0") {
                throw ParseError(line_start, "only the vertex element is supported");
            }
        } else if (w[0] == "property") {
            if (w.size() != 3 || w[1] == "list")
                throw ParseError(line_start, "unsupported property declaration");
            if (in_vertex)
                props.push_back(w[2]);
        } else {
            throw ParseError(line_start, "unknown header keyword '" + w[0] + "'");
        }
    }
    if (vertex_count < 0)
        throw ParseError(pos, "no vertex element declared");

    auto find = [&](const char* name) -> int {
        for (std::size_t i = 0; i < props.size(); ++i)
            if (props[i] == name)
                return int(i);
        return -1;
    };
    const int ix = find("x"), iy = find("y"), iz = find("z");
    const int inx = find("nx"), iny = find("ny"), inz = find("nz");
    const int iview = find("view_id");
    if (ix < 0 || iy < 0 || iz < 0)
        throw ParseError(pos, "vertex element lacks x/y/z");
    const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;

    std::vector<Eigen::Vector3d> points;
    std::vector<Eigen::Vector3d> normals;
    std::vector<int> views;
    points.reserve(std::size_t(vertex_count));
    std::vector<double> vals(props.size());
    for (long v = 0; v < vertex_count; ++v) {
        line_start = pos;
        if (!next_line(line))
            throw ParseError(pos, "truncated vertex list");
        std::size_t cursor = 0;
        for (std::size_t k = 0; k < props.size(); ++k) {
            while (cursor < line.size() && std::isspace(static_cast<unsigned char>(line[cursor])))
                ++cursor;
            const std::string tok(line.substr(cursor, line.find_first_of(" \t", cursor) - cursor));
            char* end = nullptr;
            vals[k] = std::strtod(tok.c_str(), &end);
            if (tok.empty() || end != tok.c_str() + tok.size())
                throw ParseError(line_start + cursor, "malformed vertex value");
            cursor += tok.size();
        }
        points.emplace_back(vals[std::size_t(ix)], vals[std::size_t(iy)], vals[std::size_t(iz)]);
        if (has_normals)
            normals.emplace_back(vals[std::size_t(inx)], vals[std::size_t(iny)], vals[std::size_t(inz)]);
        if (iview >= 0)
            views.push_back(int(vals[std::size_t(iview)]));
    }
    std::optional<std::vector<Eigen::Vector3d>> n;
    std::optional<std::vector<int>> ids;
    if (has_normals)
        n = std::move(normals);
    if (iview >= 0)
        ids = std::move(views);
    return PointCloud(std::move(points), std::move(n), std::move(ids));
}

std::string encode_ply(const PointCloud& cloud)
{
    std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
                      "\nproperty double x\nproperty double y\nproperty double z\n";
    if (cloud.normals())
        out += "property double nx\nproperty double ny\nproperty double nz\n";
    if (cloud.view_ids())
        out += "property int view_id\n";
    out += "end_header\n";
    char buf[64];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof buf, "%.17g%c", v, sep);
        out += buf;
    };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const bool more_after_xyz = cloud.normals() || cloud.view_ids();
        const auto& p = cloud.points()[i];
        put(p.x(), ' ');
        put(p.y(), ' ');
        put(p.z(), more_after_xyz ? ' ' : '\n');
        if (cloud.normals()) {
            const auto& n = (*cloud.normals())[i];
            put(n.x(), ' ');
            put(n.y(), ' ');
            put(n.z(), cloud.view_ids() ? ' ' : '\n');
        }
        if (cloud.view_ids())
            out += std::to_string((*cloud.view_ids())[i]) + "\n";
    }
    return out;
}

PointCloud read_ply(const fs::path& path)
{
    return parse_ply(read_file(path));
}

void write_ply(const fs::path& path, const PointCloud& cloud)
{
    write_file(path, encode_ply(cloud));
}

// ---- JSON ------------------------------------------------------------------

nlohmann::json read_json(const fs::path& path)
{
    const std::string text = read_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.byte, path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const nlohmann::json& value)
{
    write_file(path, value.dump(2) + "\n");
}

} // namespace dpface::io
