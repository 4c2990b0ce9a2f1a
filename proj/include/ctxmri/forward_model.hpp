#pragma once

#include <cstdint>

#include "ctxmri/kspace.hpp"

namespace ctxmri {

/// SENSE operator A = D F S with per-coil maps S_i, centered orthonormal
/// Fourier transform F, and the sampling projector D, plus the Gaussian
/// measurement noise level.
struct ForwardModel {
  SensitivityMaps maps;
  SamplingMask mask;
  double noise_sigma = 0.0;

  int height() const { return maps.height; }
  int width() const { return maps.width; }
  int num_coils() const { return maps.num_coils; }
};

void validate(const ForwardModel& model);

/// y_i = D F (S_i . x) per coil; linear in x.
MultiCoilKSpace forward(const ForwardModel& model, const ComplexImage& x);

/// A^H y = sum_i conj(S_i) . F^-1 (D y_i); the true adjoint under the
/// orthonormal transform convention.
ComplexImage adjoint(const ForwardModel& model, const MultiCoilKSpace& y);

/// forward(x) plus i.i.d. complex Gaussian noise (std noise_sigma per
/// real/imag component) on kept samples only; deterministic per seed.
MultiCoilKSpace measure(const ForwardModel& model, const ComplexImage& x, std::uint64_t seed);

}  // namespace ctxmri
