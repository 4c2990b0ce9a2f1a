#include "ctxmri/image.hpp"

#include <cmath>
#include <fstream>

#include "ctxmri/binio.hpp"
#include "ctxmri/error.hpp"

namespace ctxmri {

TwoChannelImage pack_channels(const ComplexImage& img) {
  TwoChannelImage tc(img.height, img.width);
  for (size_t i = 0; i < img.data.size(); ++i) {
    tc.real_channel[i] = img.data[i].real();
    tc.imag_channel[i] = img.data[i].imag();
  }
  return tc;
}

ComplexImage unpack_channels(const TwoChannelImage& tc) {
  ComplexImage img(tc.height, tc.width);
  for (size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = cxd(tc.real_channel[i], tc.imag_channel[i]);
  return img;
}

bool all_finite(const ComplexImage& img) {
  for (const cxd& v : img.data)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

void require_finite(const ComplexImage& img, const char* what) {
  if (!all_finite(img)) throw InvalidInputError(std::string(what) + ": non-finite input");
}

double norm2(const ComplexImage& img) {
  double s = 0.0;
  for (const cxd& v : img.data) s += std::norm(v);
  return std::sqrt(s);
}

cxd cdot(const ComplexImage& a, const ComplexImage& b) {
  if (!a.same_shape(b)) throw ShapeError("cdot: shape mismatch");
  cxd s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) s += std::conj(a.data[i]) * b.data[i];
  return s;
}

ComplexImage operator+(const ComplexImage& a, const ComplexImage& b) {
  if (!a.same_shape(b)) throw ShapeError("image add: shape mismatch");
  ComplexImage out(a.height, a.width);
  for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  return out;
}

ComplexImage operator-(const ComplexImage& a, const ComplexImage& b) {
  if (!a.same_shape(b)) throw ShapeError("image sub: shape mismatch");
  ComplexImage out(a.height, a.width);
  for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] - b.data[i];
  return out;
}

ComplexImage operator*(cxd s, const ComplexImage& a) {
  ComplexImage out(a.height, a.width);
  for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = s * a.data[i];
  return out;
}

namespace {
constexpr char kCmriMagic[4] = {'C', 'M', 'R', 'I'};
constexpr std::uint16_t kCmriVersion = 1;

void write_cmri_block(std::ostream& os, const ComplexImage& img) {
  binio::write_magic(os, kCmriMagic);
  binio::write_pod<std::uint16_t>(os, kCmriVersion);
  binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(img.height));
  binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(img.width));
  binio::write_pod<std::uint16_t>(os, 0);  // reserved, pads header to 16 bytes
  for (const cxd& v : img.data) {
    binio::write_pod<double>(os, v.real());
    binio::write_pod<double>(os, v.imag());
  }
}

ComplexImage read_cmri_block(std::istream& is) {
  binio::expect_magic(is, kCmriMagic, "CMRI");
  const auto version = binio::read_pod<std::uint16_t>(is);
  if (version != kCmriVersion) throw IoError("unsupported CMRI version");
  const auto h = binio::read_pod<std::uint32_t>(is);
  const auto w = binio::read_pod<std::uint32_t>(is);
  binio::read_pod<std::uint16_t>(is);
  if (h == 0 || w == 0) throw IoError("CMRI: empty grid");
  ComplexImage img(static_cast<int>(h), static_cast<int>(w));
  for (cxd& v : img.data) {
    const double re = binio::read_pod<double>(is);
    const double im = binio::read_pod<double>(is);
    v = cxd(re, im);
  }
  return img;
}
}  // namespace

void save_cmri(const ComplexImage& img, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path.string());
  write_cmri_block(os, img);
  if (!os) throw IoError("write failed: " + path.string());
}

ComplexImage load_cmri(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  return read_cmri_block(is);
}

void save_cmri_blocks(const std::vector<ComplexImage>& blocks,
                      const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path.string());
  for (const ComplexImage& b : blocks) write_cmri_block(os, b);
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<ComplexImage> load_cmri_blocks(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  std::vector<ComplexImage> blocks;
  while (is.peek() != EOF) blocks.push_back(read_cmri_block(is));
  return blocks;
}

}  // namespace ctxmri
