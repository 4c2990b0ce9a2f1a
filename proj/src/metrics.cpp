#include "ctxmri/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "ctxmri/error.hpp"

namespace ctxmri {

double psnr(const std::vector<double>& ref, const std::vector<double>& test, int height,
            int width, double data_range) {
  const size_t n = static_cast<size_t>(height) * width;
  if (ref.size() != n || test.size() != n) throw ShapeError("psnr: shape mismatch");
  if (data_range <= 0.0) throw InvalidInputError("psnr: data_range must be positive");
  double mse = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = ref[i] - test[i];
    mse += d * d;
  }
  mse /= static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / mse);
}

double ssim(const std::vector<double>& ref, const std::vector<double>& test, int height,
            int width, double data_range) {
  constexpr int kWin = 7;
  const size_t n = static_cast<size_t>(height) * width;
  if (ref.size() != n || test.size() != n) throw ShapeError("ssim: shape mismatch");
  if (height < kWin || width < kWin) throw ShapeError("ssim: image smaller than 7x7 window");
  if (data_range <= 0.0) throw InvalidInputError("ssim: data_range must be positive");

  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);
  const double np = static_cast<double>(kWin) * kWin;
  const double cov_norm = np / (np - 1.0);  // sample covariance

  double total = 0.0;
  long count = 0;
  for (int y0 = 0; y0 + kWin <= height; ++y0) {
    for (int x0 = 0; x0 + kWin <= width; ++x0) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (int dy = 0; dy < kWin; ++dy) {
        const size_t row = static_cast<size_t>(y0 + dy) * width + x0;
        for (int dx = 0; dx < kWin; ++dx) {
          const double a = ref[row + dx];
          const double b = test[row + dx];
          sx += a;
          sy += b;
          sxx += a * a;
          syy += b * b;
          sxy += a * b;
        }
      }
      const double ux = sx / np, uy = sy / np;
      const double vx = cov_norm * (sxx / np - ux * ux);
      const double vy = cov_norm * (syy / np - uy * uy);
      const double cov = cov_norm * (sxy / np - ux * uy);
      const double s = ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) /
                       ((ux * ux + uy * uy + c1) * (vx + vy + c2));
      total += s;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

MetricSummary aggregate(const std::vector<SliceMetrics>& slices) {
  if (slices.empty()) throw InvalidInputError("aggregate: empty metric list");
  MetricSummary s;
  s.count = slices.size();
  for (const SliceMetrics& m : slices) {
    s.psnr_mean += m.psnr;
    s.ssim_mean += m.ssim;
  }
  s.psnr_mean /= static_cast<double>(s.count);
  s.ssim_mean /= static_cast<double>(s.count);
  for (const SliceMetrics& m : slices) {
    s.psnr_std += (m.psnr - s.psnr_mean) * (m.psnr - s.psnr_mean);
    s.ssim_std += (m.ssim - s.ssim_mean) * (m.ssim - s.ssim_mean);
  }
  s.psnr_std = std::sqrt(s.psnr_std / static_cast<double>(s.count));
  s.ssim_std = std::sqrt(s.ssim_std / static_cast<double>(s.count));
  return s;
}

std::string format_mu_sigma(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", mean, std);
  return std::string(buf);
}

}  // namespace ctxmri
