#pragma once

#include <filesystem>

#include "surfelnbp/image.hpp"

namespace surfelnbp {

/// Binary PPM (P6), 8 bits per channel; values clamped to [0, 1].
void write_ppm(const ImageRGB& img, const std::filesystem::path& path);
ImageRGB read_ppm(const std::filesystem::path& path);

/// Little-endian 32-bit PFM. Single-channel ("Pf") and three-channel ("PF").
/// Rows are stored bottom-to-top as the format requires.
void write_pfm(const ImageD& img, const std::filesystem::path& path);
void write_pfm(const ImageVec3& img, const std::filesystem::path& path);
ImageD read_pfm_gray(const std::filesystem::path& path);
ImageVec3 read_pfm_rgb(const std::filesystem::path& path);

}  // namespace surfelnbp
