#include "ctxmri/espirit.hpp"

#include <omp.h>

#include <cmath>

#include "ctxmri/error.hpp"
#include "ctxmri/fft.hpp"
#include "ctxmri/parallel.hpp"

namespace ctxmri {

namespace {

bool rect_fully_kept(const SamplingMask& mask, int r0, int r1, int c0, int c1) {
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c)
      if (!mask.at(r, c)) return false;
  return true;
}

}  // namespace

MultiCoilKSpace extract_acs_region(const MultiCoilKSpace& ksp, int kernel_size, int cap_extent) {
  const int h = ksp.height, w = ksp.width;
  // grow a centered rectangle while it stays fully sampled
  int eh = 1, ew = 1;
  auto bounds = [&](int ext_h, int ext_w, int& r0, int& r1, int& c0, int& c1) {
    r0 = (h - ext_h) / 2;
    r1 = r0 + ext_h;
    c0 = (w - ext_w) / 2;
    c1 = c0 + ext_w;
  };
  int r0, r1, c0, c1;
  bounds(eh, ew, r0, r1, c0, c1);
  if (!rect_fully_kept(ksp.mask, r0, r1, c0, c1))
    throw CalibrationError("no ACS region detectable at grid center");
  bool grew = true;
  while (grew) {
    grew = false;
    if (eh < std::min(h, cap_extent)) {
      bounds(eh + 1, ew, r0, r1, c0, c1);
      if (rect_fully_kept(ksp.mask, r0, r1, c0, c1)) {
        ++eh;
        grew = true;
      }
    }
    if (ew < std::min(w, cap_extent)) {
      bounds(eh, ew + 1, r0, r1, c0, c1);
      if (rect_fully_kept(ksp.mask, r0, r1, c0, c1)) {
        ++ew;
        grew = true;
      }
    }
  }
  if (eh < kernel_size || ew < kernel_size)
    throw CalibrationError("ACS region smaller than calibration kernel");

  bounds(eh, ew, r0, r1, c0, c1);
  MultiCoilKSpace acs(ksp.num_coils, eh, ew);
  for (int c = 0; c < ksp.num_coils; ++c)
    for (int r = 0; r < eh; ++r)
      for (int cc = 0; cc < ew; ++cc) acs.coil_data[c].at(r, cc) = ksp.coil_data[c].at(r0 + r, c0 + cc);
  return acs;
}

Eigen::MatrixXcd build_calibration_matrix(const MultiCoilKSpace& acs, int kernel_size) {
  const int k = kernel_size;
  if (k <= 0) throw ConfigError("calibration kernel must be positive");
  if (acs.height < k || acs.width < k)
    throw ConfigError("ACS region smaller than calibration kernel");
  const int rows_h = acs.height - k + 1;
  const int rows_w = acs.width - k + 1;
  const int nrows = rows_h * rows_w;
  const int ncols = k * k * acs.num_coils;
  Eigen::MatrixXcd mat(nrows, ncols);
  for (int py = 0; py < rows_h; ++py) {
    for (int px = 0; px < rows_w; ++px) {
      const int row = py * rows_w + px;
      for (int c = 0; c < acs.num_coils; ++c)
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx)
            mat(row, c * k * k + dy * k + dx) = acs.coil_data[c].at(py + dy, px + dx);
    }
  }
  return mat;
}

namespace {

struct PixelEigenInput {
  // image-domain kernels, indexed [kernel * num_coils + coil]
  const std::vector<ComplexImage>* kernels;
  int num_kernels;
  int num_coils;
  double gram_scale;
  double eig_crop;
};

/// Top eigenpair of the kernel Gram matrix at one pixel. Shared by the
/// serial and OpenMP drivers so both paths are bit-identical.
__attribute__((noinline)) void espirit_pixel(const PixelEigenInput& in, size_t pixel,
                                             std::vector<ComplexImage>& out_maps,
                                             std::vector<double>& out_eig) {
  const int nc = in.num_coils;
  Eigen::MatrixXcd gram = Eigen::MatrixXcd::Zero(nc, nc);
  for (int r = 0; r < in.num_kernels; ++r) {
    Eigen::VectorXcd v(nc);
    for (int c = 0; c < nc; ++c) v(c) = (*in.kernels)[r * nc + c].data[pixel];
    gram.noalias() += v * v.adjoint();
  }
  gram *= in.gram_scale;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(gram);
  if (solver.info() != Eigen::Success) throw NumericalError("espirit: pixel eigensolver failed");
  const int top = nc - 1;  // eigenvalues ascending
  double lambda = solver.eigenvalues()(top);
  lambda = std::clamp(lambda, 0.0, 1.0);
  out_eig[pixel] = lambda;

  if (lambda < in.eig_crop) {
    for (int c = 0; c < nc; ++c) out_maps[c].data[pixel] = cxd(0.0, 0.0);
    return;
  }
  Eigen::VectorXcd vec = solver.eigenvectors().col(top).conjugate();
  // coil-0 nonnegative real part gauge
  const cxd s0 = vec(0);
  if (std::abs(s0) > 1e-14) vec *= std::conj(s0) / std::abs(s0);
  for (int c = 0; c < nc; ++c) out_maps[c].data[pixel] = vec(c);
}

SensitivityMaps estimate_maps_impl(const MultiCoilKSpace& ksp, const CalibrationConfig& cfg,
                                   bool parallel) {
  const int h = ksp.height, w = ksp.width, nc = ksp.num_coils;
  const int k = cfg.kernel_size;

  const MultiCoilKSpace acs = extract_acs_region(ksp, k);
  const Eigen::MatrixXcd calib = build_calibration_matrix(acs, k);

  Eigen::BDCSVD<Eigen::MatrixXcd> svd(calib, Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("espirit: calibration SVD failed");
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) throw CalibrationError("espirit: empty calibration signal");

  int retained = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) >= cfg.sv_threshold * sv(0)) ++retained;
  if (retained == 0) throw CalibrationError("espirit: no kernels above threshold");

  // k-space kernels -> 180-degree flip -> zero-padded centered grids ->
  // image domain. The flip puts the image-domain maps in the image's own
  // orientation; the per-pixel eigenvector is conjugated afterwards so the
  // inter-coil phases come out as S(p) rather than conj(S(p)). The residual
  // half-kernel shift is a pure per-pixel phase and dies in the gauge.
  std::vector<ComplexImage> img_kernels;
  img_kernels.reserve(static_cast<size_t>(retained) * nc);
  const int pad_r = (h - k) / 2;
  const int pad_c = (w - k) / 2;
  std::vector<ComplexImage> padded;
  padded.reserve(static_cast<size_t>(retained) * nc);
  for (int r = 0; r < retained; ++r) {
    const Eigen::VectorXcd col = svd.matrixV().col(r);
    for (int c = 0; c < nc; ++c) {
      ComplexImage grid(h, w);
      for (int dy = 0; dy < k; ++dy)
        for (int dx = 0; dx < k; ++dx)
          grid.at(pad_r + (k - 1 - dy), pad_c + (k - 1 - dx)) = col(c * k * k + dy * k + dx);
      padded.push_back(std::move(grid));
    }
  }
  img_kernels = parallel ? ifft2c_batch(padded) : ifft2c_batch_serial(padded);

  PixelEigenInput in;
  in.kernels = &img_kernels;
  in.num_kernels = retained;
  in.num_coils = nc;
  in.gram_scale = static_cast<double>(h) * w / static_cast<double>(k * k);
  in.eig_crop = cfg.eig_crop;

  SensitivityMaps maps(nc, h, w);
  const size_t npix = static_cast<size_t>(h) * w;
  bool failed = false;
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (long p = 0; p < static_cast<long>(npix); ++p) {
      try {
        espirit_pixel(in, static_cast<size_t>(p), maps.maps, maps.eigenvalue_map);
      } catch (...) {
#pragma omp atomic write
        failed = true;
      }
    }
  } else {
    for (size_t p = 0; p < npix; ++p) espirit_pixel(in, p, maps.maps, maps.eigenvalue_map);
  }
  if (failed) throw NumericalError("espirit: pixel eigensolver failed");
  return maps;
}

}  // namespace

SensitivityMaps estimate_maps(const MultiCoilKSpace& ksp, const CalibrationConfig& cfg) {
  return estimate_maps_impl(ksp, cfg, use_parallel_kernels());
}

SensitivityMaps estimate_maps_serial(const MultiCoilKSpace& ksp, const CalibrationConfig& cfg) {
  return estimate_maps_impl(ksp, cfg, false);
}

void gauge_fix_coil0(SensitivityMaps& maps) {
  for (size_t p = 0; p < maps.maps[0].data.size(); ++p) {
    const cxd s0 = maps.maps[0].data[p];
    if (std::abs(s0) > 1e-14) {
      const cxd g = std::conj(s0) / std::abs(s0);
      for (int c = 0; c < maps.num_coils; ++c) maps.maps[c].data[p] *= g;
    }
  }
}

}  // namespace ctxmri
