#include "ctxmri/fft.hpp"

#include <fftw3.h>
#include <omp.h>

#include <cmath>
#include <map>
#include <mutex>

#include "ctxmri/error.hpp"
#include "ctxmri/parallel.hpp"

namespace ctxmri {

namespace {

// FFTW plan creation is not thread-safe; executing a cached plan on new
// arrays is. Plans use FFTW_ESTIMATE (deterministic choice, no runtime
// measurement) and FFTW_UNALIGNED so plain vector storage works.
class PlanCache {
 public:
  fftw_plan get(int h, int w, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    const auto key = std::make_tuple(h, w, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<cxd> dummy_in(static_cast<size_t>(h) * w);
    std::vector<cxd> dummy_out(dummy_in.size());
    fftw_plan p = fftw_plan_dft_2d(h, w, reinterpret_cast<fftw_complex*>(dummy_in.data()),
                                   reinterpret_cast<fftw_complex*>(dummy_out.data()), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw NumericalError("fftw plan creation failed");
    plans_.emplace(key, p);
    return p;
  }

 private:
  std::mutex mu_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

// numpy-style shifts: fftshift rotates by ceil(N/2), ifftshift by floor(N/2).
ComplexImage shift2(const ComplexImage& in, int row_shift, int col_shift) {
  ComplexImage out(in.height, in.width);
  for (int r = 0; r < in.height; ++r) {
    const int sr = (r + row_shift) % in.height;
    for (int c = 0; c < in.width; ++c) {
      const int sc = (c + col_shift) % in.width;
      out.at(r, c) = in.at(sr, sc);
    }
  }
  return out;
}

ComplexImage fftshift2(const ComplexImage& in) {
  return shift2(in, (in.height + 1) / 2, (in.width + 1) / 2);
}

ComplexImage ifftshift2(const ComplexImage& in) {
  return shift2(in, in.height / 2, in.width / 2);
}

ComplexImage centered_transform(const ComplexImage& img, int sign, const char* what) {
  require_finite(img, what);
  ComplexImage shifted = ifftshift2(img);
  ComplexImage raw(img.height, img.width);
  fftw_plan plan = plan_cache().get(img.height, img.width, sign);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(shifted.data.data()),
                   reinterpret_cast<fftw_complex*>(raw.data.data()));
  const double scale = 1.0 / std::sqrt(static_cast<double>(img.height) * img.width);
  for (cxd& v : raw.data) v *= scale;
  return fftshift2(raw);
}

}  // namespace

ComplexImage fft2c(const ComplexImage& img) {
  return centered_transform(img, FFTW_FORWARD, "fft2c");
}

ComplexImage ifft2c(const ComplexImage& ksp) {
  return centered_transform(ksp, FFTW_BACKWARD, "ifft2c");
}

std::vector<ComplexImage> fft2c_batch_serial(const std::vector<ComplexImage>& imgs) {
  std::vector<ComplexImage> out(imgs.size());
  for (size_t i = 0; i < imgs.size(); ++i) out[i] = fft2c(imgs[i]);
  return out;
}

std::vector<ComplexImage> fft2c_batch(const std::vector<ComplexImage>& imgs) {
  if (!use_parallel_kernels()) return fft2c_batch_serial(imgs);
  std::vector<ComplexImage> out(imgs.size());
  if (!imgs.empty()) plan_cache().get(imgs[0].height, imgs[0].width, FFTW_FORWARD);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(imgs.size()); ++i) out[i] = fft2c(imgs[i]);
  return out;
}

std::vector<ComplexImage> ifft2c_batch_serial(const std::vector<ComplexImage>& ksps) {
  std::vector<ComplexImage> out(ksps.size());
  for (size_t i = 0; i < ksps.size(); ++i) out[i] = ifft2c(ksps[i]);
  return out;
}

std::vector<ComplexImage> ifft2c_batch(const std::vector<ComplexImage>& ksps) {
  if (!use_parallel_kernels()) return ifft2c_batch_serial(ksps);
  std::vector<ComplexImage> out(ksps.size());
  if (!ksps.empty()) plan_cache().get(ksps[0].height, ksps[0].width, FFTW_BACKWARD);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(ksps.size()); ++i) out[i] = ifft2c(ksps[i]);
  return out;
}

}  // namespace ctxmri
