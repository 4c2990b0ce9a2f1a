#pragma once

#include <string>
#include <vector>

namespace ctxmri {

struct SliceMetrics {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricSummary {
  double psnr_mean = 0.0, psnr_std = 0.0;
  double ssim_mean = 0.0, ssim_std = 0.0;
  size_t count = 0;
};

/// 10 log10(data_range^2 / MSE); +infinity for identical images.
double psnr(const std::vector<double>& ref, const std::vector<double>& test, int height,
            int width, double data_range);

/// Mean local SSIM, 7x7 uniform window over the valid region,
/// C1 = (0.01 L)^2, C2 = (0.03 L)^2, sample-covariance normalization.
double ssim(const std::vector<double>& ref, const std::vector<double>& test, int height,
            int width, double data_range);

/// Arithmetic mean and population standard deviation per metric.
MetricSummary aggregate(const std::vector<SliceMetrics>& slices);

/// "MM.mm ± SS.ss" with two decimals.
std::string format_mu_sigma(double mean, double std);

}  // namespace ctxmri
