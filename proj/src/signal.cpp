#include "ctxmri/signal.hpp"

#include <algorithm>
#include <cmath>

#include "ctxmri/error.hpp"
#include "ctxmri/fft.hpp"

namespace ctxmri {

namespace {
constexpr double kSupportEps = 1e-8;
}

double magnitude_quantile(const ComplexImage& img, double q) {
  if (q <= 0.0 || q > 1.0) throw InvalidInputError("quantile must be in (0, 1]");
  std::vector<double> mags(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) mags[i] = std::abs(img.data[i]);
  std::sort(mags.begin(), mags.end());
  // nearest-rank: smallest value with rank >= ceil(q*n)
  const size_t n = mags.size();
  size_t rank = static_cast<size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<size_t>(rank, 1, n);
  return mags[rank - 1];
}

NormalizeResult normalize_quantile(const ComplexImage& img, double q) {
  const double scale = magnitude_quantile(img, q);
  if (scale <= 0.0) throw InvalidInputError("normalize_quantile: degenerate scale (all-zero image)");
  NormalizeResult out;
  out.scale = scale;
  out.image = ComplexImage(img.height, img.width);
  const double inv = 1.0 / scale;
  for (size_t i = 0; i < img.data.size(); ++i) out.image.data[i] = img.data[i] * inv;
  return out;
}

ComplexImage mvue(const MultiCoilKSpace& ksp, const SensitivityMaps& maps) {
  if (maps.num_coils != ksp.num_coils)
    throw ShapeError("mvue: coil count mismatch");
  if (maps.height != ksp.height || maps.width != ksp.width)
    throw ShapeError("mvue: grid shape mismatch");

  const std::vector<ComplexImage> coil_imgs = ifft2c_batch(ksp.coil_data);

  ComplexImage out(ksp.height, ksp.width);
  for (size_t i = 0; i < out.data.size(); ++i) {
    cxd num = 0.0;
    double den = 0.0;
    for (int c = 0; c < ksp.num_coils; ++c) {
      const cxd s = maps.maps[c].data[i];
      num += std::conj(s) * coil_imgs[c].data[i];
      den += std::norm(s);
    }
    out.data[i] = den > kSupportEps ? num / den : cxd(0.0, 0.0);
  }
  return out;
}

std::vector<double> magnitude(const ComplexImage& img) {
  std::vector<double> out(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) out[i] = std::abs(img.data[i]);
  return out;
}

}  // namespace ctxmri
