#pragma once

#include "ctxmri/image.hpp"

namespace ctxmri {

/// Centered orthonormal 2D DFT: fftshift(FFT(ifftshift(x))) / sqrt(h*w).
/// DC lands at (h/2, w/2). Unitary, so ifft2c is both inverse and adjoint.
ComplexImage fft2c(const ComplexImage& img);
ComplexImage ifft2c(const ComplexImage& ksp);

/// Batch transforms over coils. The parallel variants split coils across
/// OpenMP threads; per-coil results are bit-identical to the serial loop.
std::vector<ComplexImage> fft2c_batch_serial(const std::vector<ComplexImage>& imgs);
std::vector<ComplexImage> fft2c_batch(const std::vector<ComplexImage>& imgs);
std::vector<ComplexImage> ifft2c_batch_serial(const std::vector<ComplexImage>& ksps);
std::vector<ComplexImage> ifft2c_batch(const std::vector<ComplexImage>& ksps);

}  // namespace ctxmri
