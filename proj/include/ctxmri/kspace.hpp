#pragma once

#include <filesystem>
#include <vector>

#include "ctxmri/image.hpp"
#include "ctxmri/masks.hpp"

namespace ctxmri {

/// Per-coil frequency-domain measurements plus the sampling pattern that
/// produced them. Entries at mask-zero locations are exactly zero.
struct MultiCoilKSpace {
  int num_coils = 0;
  int height = 0;
  int width = 0;
  std::vector<ComplexImage> coil_data;
  SamplingMask mask;

  MultiCoilKSpace() = default;
  MultiCoilKSpace(int coils, int h, int w)
      : num_coils(coils),
        height(h),
        width(w),
        coil_data(coils, ComplexImage(h, w)),
        mask(h, w) {}

  bool same_shape(const MultiCoilKSpace& o) const {
    return num_coils == o.num_coils && height == o.height && width == o.width;
  }
};

/// Zeroes entries outside the mask; kept entries pass through unchanged.
/// Idempotent.
MultiCoilKSpace apply_mask(const MultiCoilKSpace& ksp, const SamplingMask& mask);

/// Per-pixel coil weights. Normalized so sum_i |S_i|^2 == 1 on support and
/// exactly zero off support.
struct SensitivityMaps {
  int num_coils = 0;
  int height = 0;
  int width = 0;
  std::vector<ComplexImage> maps;
  std::vector<double> eigenvalue_map;  // top ESPIRiT eigenvalue per pixel, in [0,1]

  SensitivityMaps() = default;
  SensitivityMaps(int coils, int h, int w)
      : num_coils(coils),
        height(h),
        width(w),
        maps(coils, ComplexImage(h, w)),
        eigenvalue_map(static_cast<size_t>(h) * w, 0.0) {}
};

void save_maps(const SensitivityMaps& maps, const std::filesystem::path& path);
SensitivityMaps load_maps(const std::filesystem::path& path);

}  // namespace ctxmri
