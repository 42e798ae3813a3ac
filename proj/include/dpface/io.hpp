#pragma once

// File formats:
//   PFM      32-bit float maps, rows stored bottom-to-top; written little-endian
//            with scale -1.0. Invalid pixels of masked maps are written as NaN.
//   PGM (P5) 16-bit big-endian grayscale, samples mapped from [0, 1].
//   PNG      16-bit grayscale, same sample mapping as PGM.
//   PLY      ascii 1.0 point clouds with optional nx/ny/nz and view_id.
//   JSON     UTF-8 structured records.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dpface/image.hpp"

namespace dpface::io {

/// How non-finite samples in a float map are treated on read.
enum class NanPolicy {
    Reject,      ///< DomainError
    MaskInvalid, ///< pixel marked invalid
};

/// Decoded PFM payload; samples are top-to-bottom, row-major, interleaved channels.
struct PfmData {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<float> samples;
};

PfmData parse_pfm(std::string_view bytes);
std::string encode_pfm(const PfmData& data);

ImageF read_pfm(const std::filesystem::path& path);
DepthMap read_depth_pfm(const std::filesystem::path& path, NanPolicy policy = NanPolicy::Reject);
DisparityMap read_disparity_pfm(const std::filesystem::path& path, NanPolicy policy = NanPolicy::Reject);
NormalMap read_normal_pfm(const std::filesystem::path& path, NanPolicy policy = NanPolicy::Reject);

void write_pfm(const std::filesystem::path& path, const ImageF& image);
void write_pfm(const std::filesystem::path& path, const DepthMap& depth);
void write_pfm(const std::filesystem::path& path, const DisparityMap& disparity);
void write_pfm(const std::filesystem::path& path, const NormalMap& normals);

ImageF parse_pgm16(std::string_view bytes);
std::string encode_pgm16(const ImageF& image);
ImageF read_pgm16(const std::filesystem::path& path);
void write_pgm16(const std::filesystem::path& path, const ImageF& image);

ImageF read_png16(const std::filesystem::path& path);
void write_png16(const std::filesystem::path& path, const ImageF& image);

/// Dispatch on extension: .pfm, .pgm, .png.
ImageF read_image(const std::filesystem::path& path);

PointCloud parse_ply(std::string_view text);
std::string encode_ply(const PointCloud& cloud);
PointCloud read_ply(const std::filesystem::path& path);
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& value);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

} // namespace dpface::io
