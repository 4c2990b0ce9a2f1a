#pragma once

#include <Eigen/Dense>

#include "ctxmri/kspace.hpp"

namespace ctxmri {

struct CalibrationConfig {
  int kernel_size = 6;
  double sv_threshold = 0.01;  // fraction of the largest singular value
  double eig_crop = 0.85;      // per-pixel top-eigenvalue crop
};

/// Hankel-structured calibration matrix: one row per sliding kernel
/// position inside the ACS block, one column per (coil, kernel pixel).
Eigen::MatrixXcd build_calibration_matrix(const MultiCoilKSpace& acs, int kernel_size);

/// Extracts the largest fully sampled centered rectangle of the k-space
/// mask, capped at cap_extent per axis. Throws CalibrationError when the
/// region is smaller than the kernel.
MultiCoilKSpace extract_acs_region(const MultiCoilKSpace& ksp, int kernel_size,
                                   int cap_extent = 32);

/// ESPIRiT sensitivity estimation: SVD of the calibration matrix, image
/// domain transform of the retained kernels, per-pixel eigen-decomposition
/// of the kernel Gram matrix. Maps are unit-norm per pixel on support,
/// zero where the top eigenvalue falls below eig_crop, and phase-gauged so
/// coil 0 has nonnegative real part.
SensitivityMaps estimate_maps(const MultiCoilKSpace& ksp, const CalibrationConfig& cfg);

/// Serial reference for the per-pixel eigen stage (same output bit-for-bit).
SensitivityMaps estimate_maps_serial(const MultiCoilKSpace& ksp, const CalibrationConfig& cfg);

/// Applies the coil-0 phase gauge used by estimate_maps to arbitrary maps.
void gauge_fix_coil0(SensitivityMaps& maps);

}  // namespace ctxmri
