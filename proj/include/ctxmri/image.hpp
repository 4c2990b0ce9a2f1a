#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace ctxmri {

using cxd = std::complex<double>;

/// Row-major complex 2D grid. Used both for image-space and k-space data.
struct ComplexImage {
  int height = 0;
  int width = 0;
  std::vector<cxd> data;

  ComplexImage() = default;
  ComplexImage(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w) {}

  cxd& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
  const cxd& at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
  size_t size() const { return data.size(); }
  bool same_shape(const ComplexImage& o) const { return height == o.height && width == o.width; }
};

/// Real/imaginary split of a ComplexImage, the network-facing layout.
struct TwoChannelImage {
  int height = 0;
  int width = 0;
  std::vector<double> real_channel;
  std::vector<double> imag_channel;

  TwoChannelImage() = default;
  TwoChannelImage(int h, int w)
      : height(h),
        width(w),
        real_channel(static_cast<size_t>(h) * w),
        imag_channel(static_cast<size_t>(h) * w) {}

  size_t size() const { return real_channel.size(); }
  bool same_shape(const TwoChannelImage& o) const {
    return height == o.height && width == o.width;
  }
};

TwoChannelImage pack_channels(const ComplexImage& img);
ComplexImage unpack_channels(const TwoChannelImage& tc);

bool all_finite(const ComplexImage& img);
void require_finite(const ComplexImage& img, const char* what);

double norm2(const ComplexImage& img);
/// Complex inner product <a, b> = sum conj(a_i) b_i.
cxd cdot(const ComplexImage& a, const ComplexImage& b);

ComplexImage operator+(const ComplexImage& a, const ComplexImage& b);
ComplexImage operator-(const ComplexImage& a, const ComplexImage& b);
ComplexImage operator*(cxd s, const ComplexImage& a);

/// Flat binary container: 16-byte header (magic "CMRI", version u16,
/// height u32, width u32, 2 reserved bytes) followed by little-endian
/// f64 (re, im) pairs, row-major.
void save_cmri(const ComplexImage& img, const std::filesystem::path& path);
ComplexImage load_cmri(const std::filesystem::path& path);

/// Multiple CMRI blocks concatenated in one file.
void save_cmri_blocks(const std::vector<ComplexImage>& blocks, const std::filesystem::path& path);
std::vector<ComplexImage> load_cmri_blocks(const std::filesystem::path& path);

}  // namespace ctxmri
