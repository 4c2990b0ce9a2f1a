#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ctxmri {

enum class MaskKind : std::uint8_t { Uniform1D = 0, Poisson2D = 1 };

/// k-space undersampling pattern; kept(r,c) == 1 means the location is
/// sampled. Construction is deterministic per (parameters, seed).
struct SamplingMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> kept;
  MaskKind kind = MaskKind::Uniform1D;
  double accel_nominal = 1.0;
  double acs_fraction = 0.0;  // Uniform1D only
  std::uint64_t seed = 0;
  double density_scale = 0.0;  // Poisson2D: bisected radius scale (not persisted)
  int acs_start = 0;           // Uniform1D: centered ACS band columns
  int acs_width = 0;

  SamplingMask() = default;
  SamplingMask(int h, int w)
      : height(h), width(w), kept(static_cast<size_t>(h) * w, 1) {}

  std::uint8_t at(int r, int c) const { return kept[static_cast<size_t>(r) * width + c]; }
  std::uint8_t& at(int r, int c) { return kept[static_cast<size_t>(r) * width + c]; }

  size_t count_kept() const;
  double achieved_accel() const;
};

/// Equispaced column mask with a centered contiguous ACS band. ACS width is
/// round-half-up of acs_fraction*width; outside the band columns with
/// index % accel == seed % accel are kept. Every row is identical.
SamplingMask make_uniform1d(int height, int width, int accel, double acs_fraction,
                            std::uint64_t seed);

/// Variable-density Poisson-disc pattern with a fully sampled circular
/// calibration region at the center (radius 8 px at 320, scaled
/// proportionally). The local minimum distance grows linearly with the
/// normalized distance from center; a bisection on the density scale makes
/// the achieved acceleration match the request within 15%.
SamplingMask make_poisson2d(int height, int width, double accel, std::uint64_t seed);

/// Calibration disc radius used by make_poisson2d for a given grid.
double poisson_calibration_radius(int height, int width);

/// The local minimum-distance law of a Poisson2D mask at a point:
/// density_scale * (1 + 3 * normalized distance from center).
double poisson_local_radius(const SamplingMask& mask, double y, double x);

void save_mask(const SamplingMask& mask, const std::filesystem::path& path);
SamplingMask load_mask(const std::filesystem::path& path);

}  // namespace ctxmri
