#include "surfelnbp/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "surfelnbp/errors.hpp"

namespace surfelnbp {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

void put_float_le(std::ofstream& out, double v) {
  const auto f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  out.write(reinterpret_cast<const char*>(&bits), 4);
}

double get_float(std::ifstream& in, bool little) {
  std::uint32_t bits;
  in.read(reinterpret_cast<char*>(&bits), 4);
  if (!in) throw Error("truncated PFM payload");
  const bool native_little = std::endian::native == std::endian::little;
  if (little != native_little) bits = __builtin_bswap32(bits);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

template <int Channels, typename Img>
void write_pfm_impl(const Img& img, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << (Channels == 1 ? "Pf" : "PF") << "\n" << img.width() << " " << img.height() << "\n-1.0\n";
  for (int y = img.height() - 1; y >= 0; --y) {
    for (int x = 0; x < img.width(); ++x) {
      if constexpr (Channels == 1) {
        put_float_le(out, img(x, y));
      } else {
        for (int c = 0; c < 3; ++c) put_float_le(out, img(x, y)[c]);
      }
    }
  }
}

template <int Channels, typename Img>
Img read_pfm_impl(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0;
  in >> magic >> w >> h >> scale;
  in.get();
  if (magic != (Channels == 1 ? "Pf" : "PF")) throw Error("unexpected PFM magic in " + path.string());
  if (w <= 0 || h <= 0) throw Error("bad PFM size in " + path.string());
  const bool little = scale < 0;
  Img img(w, h);
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      if constexpr (Channels == 1) {
        img(x, y) = get_float(in, little);
      } else {
        for (int c = 0; c < 3; ++c) img(x, y)[c] = get_float(in, little);
      }
    }
  }
  return img;
}

}  // namespace

void write_ppm(const ImageRGB& img, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(img(x, y)[c], 0.0, 1.0);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
    }
  }
}

ImageRGB read_ppm(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  in.get();
  if (magic != "P6" || maxv != 255) throw Error("unsupported PPM " + path.string());
  ImageRGB img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const int b = in.get();
        if (b < 0) throw Error("truncated PPM payload");
        img(x, y)[c] = b / 255.0;
      }
    }
  }
  return img;
}

void write_pfm(const ImageD& img, const std::filesystem::path& path) {
  write_pfm_impl<1>(img, path);
}
void write_pfm(const ImageVec3& img, const std::filesystem::path& path) {
  write_pfm_impl<3>(img, path);
}
ImageD read_pfm_gray(const std::filesystem::path& path) {
  return read_pfm_impl<1, ImageD>(path);
}
ImageVec3 read_pfm_rgb(const std::filesystem::path& path) {
  return read_pfm_impl<3, ImageVec3>(path);
}

}  // namespace surfelnbp
