#pragma once

#include "ctxmri/image.hpp"
#include "ctxmri/kspace.hpp"

namespace ctxmri {

struct NormalizeResult {
  ComplexImage image;
  double scale = 1.0;
};

/// Divides the image by the q-quantile of its magnitude distribution
/// (nearest-rank convention on sorted magnitudes). At q = 0.99 this puts
/// phantom channels approximately in [-1.5, 1.5].
NormalizeResult normalize_quantile(const ComplexImage& img, double q);

/// Nearest-rank magnitude quantile used by normalize_quantile.
double magnitude_quantile(const ComplexImage& img, double q);

/// Coil combination (sum_i conj(S_i) . ifft2c(y_i)) / (sum_i |S_i|^2),
/// zeroed where the coil support sum_i |S_i|^2 <= 1e-8.
ComplexImage mvue(const MultiCoilKSpace& ksp, const SensitivityMaps& maps);

/// Magnitude image of a complex image.
std::vector<double> magnitude(const ComplexImage& img);

}  // namespace ctxmri
