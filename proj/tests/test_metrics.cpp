#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ctxmri/error.hpp"
#include "ctxmri/metrics.hpp"
#include "ctxmri/rng.hpp"

using namespace ctxmri;

namespace {

std::vector<double> random_vec(size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// direct-formula PSNR oracle, written independently of the implementation
double psnr_oracle(const std::vector<double>& a, const std::vector<double>& b, double range) {
  double acc = 0;
  for (size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = acc / a.size();
  return 10.0 * std::log10(range * range / mse);
}

// direct sliding-window SSIM oracle (7x7 uniform, sample covariance)
double ssim_oracle(const std::vector<double>& a, const std::vector<double>& b, int h, int w,
                   double range) {
  const int win = 7;
  const double c1 = 0.01 * range * 0.01 * range;
  const double c2 = 0.03 * range * 0.03 * range;
  double total = 0;
  int count = 0;
  for (int y = 0; y + win <= h; ++y)
    for (int x = 0; x + win <= w; ++x) {
      std::vector<double> pa, pb;
      for (int dy = 0; dy < win; ++dy)
        for (int dx = 0; dx < win; ++dx) {
          pa.push_back(a[(y + dy) * w + x + dx]);
          pb.push_back(b[(y + dy) * w + x + dx]);
        }
      const double n = static_cast<double>(pa.size());
      double ua = 0, ub = 0;
      for (size_t i = 0; i < pa.size(); ++i) {
        ua += pa[i];
        ub += pb[i];
      }
      ua /= n;
      ub /= n;
      double va = 0, vb = 0, cov = 0;
      for (size_t i = 0; i < pa.size(); ++i) {
        va += (pa[i] - ua) * (pa[i] - ua);
        vb += (pb[i] - ub) * (pb[i] - ub);
        cov += (pa[i] - ua) * (pb[i] - ub);
      }
      va /= n - 1;
      vb /= n - 1;
      cov /= n - 1;
      total += ((2 * ua * ub + c1) * (2 * cov + c2)) /
               ((ua * ua + ub * ub + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

}  // namespace

TEST_CASE("psnr") {
  SUBCASE("identical images give the infinity sentinel") {
    auto a = random_vec(64, 1);
    CHECK(std::isinf(psnr(a, a, 8, 8, 1.0)));
  }
  SUBCASE("closed form: range 1, mse 0.01 -> 20 dB") {
    std::vector<double> a(100, 0.0), b(100, 0.1);
    CHECK(psnr(a, b, 10, 10, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
  }
  SUBCASE("random pair matches the direct-formula oracle") {
    auto a = random_vec(256, 2);
    auto b = random_vec(256, 3);
    CHECK(std::abs(psnr(a, b, 16, 16, 1.0) - psnr_oracle(a, b, 1.0)) < 1e-10);
  }
  SUBCASE("invariant under matched affine rescale") {
    auto a = random_vec(256, 4);
    auto b = random_vec(256, 5);
    const double p1 = psnr(a, b, 16, 16, 2.0);
    std::vector<double> a2(a), b2(b);
    for (auto& v : a2) v *= 3.0;
    for (auto& v : b2) v *= 3.0;
    const double p2 = psnr(a2, b2, 16, 16, 6.0);
    CHECK(std::abs(p1 - p2) < 1e-10);
  }
  SUBCASE("shape and range validation") {
    auto a = random_vec(64, 6);
    auto b = random_vec(16, 7);
    CHECK_THROWS_AS(psnr(a, b, 8, 8, 1.0), ShapeError);
    CHECK_THROWS_AS(psnr(a, a, 8, 8, 0.0), InvalidInputError);
  }
}

TEST_CASE("ssim") {
  SUBCASE("identical images score 1") {
    auto a = random_vec(16 * 16, 8);
    CHECK(ssim(a, a, 16, 16, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("anti-correlated zero-mean images score negative") {
    // period-7 sine rows: every 7x7 window has exactly zero mean, so the
    // covariance term controls the sign
    std::vector<double> a(16 * 16);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) a[y * 16 + x] = std::sin(2.0 * M_PI * x / 7.0);
    std::vector<double> b(a);
    for (double& v : b) v = -v;
    CHECK(ssim(a, b, 16, 16, 2.0) < 0.0);
  }
  SUBCASE("fixed 16x16 pair matches the sliding-window oracle") {
    auto a = random_vec(16 * 16, 10);
    auto b = random_vec(16 * 16, 11);
    CHECK(std::abs(ssim(a, b, 16, 16, 1.0) - ssim_oracle(a, b, 16, 16, 1.0)) < 1e-8);
  }
  SUBCASE("images smaller than the window are rejected") {
    std::vector<double> a(36, 0.5);
    CHECK_THROWS_AS(ssim(a, a, 6, 6, 1.0), ShapeError);
  }
}

TEST_CASE("aggregate") {
  SUBCASE("single entry has zero std") {
    MetricSummary s = aggregate({{"0", 31.0, 0.9}});
    CHECK(s.psnr_mean == 31.0);
    CHECK(s.psnr_std == 0.0);
    CHECK(s.count == 1);
  }
  SUBCASE("population statistics for {30, 32}") {
    MetricSummary s = aggregate({{"0", 30.0, 0.8}, {"1", 32.0, 0.9}});
    CHECK(s.psnr_mean == doctest::Approx(31.0));
    CHECK(s.psnr_std == doctest::Approx(1.0));
    CHECK(format_mu_sigma(s.psnr_mean, s.psnr_std) == "31.00 ± 1.00");
  }
  SUBCASE("formatting matches the two-decimal mu-sigma pattern") {
    CHECK(format_mu_sigma(30.52, 2.84) == "30.52 ± 2.84");
    CHECK(format_mu_sigma(87.02341, 8.8299) == "87.02 ± 8.83");
  }
  SUBCASE("mean lies within [min, max]") {
    std::vector<SliceMetrics> slices;
    Rng rng(13);
    double lo = 1e9, hi = -1e9;
    for (int i = 0; i < 20; ++i) {
      const double p = rng.uniform(20.0, 40.0);
      lo = std::min(lo, p);
      hi = std::max(hi, p);
      slices.push_back({std::to_string(i), p, 0.5});
    }
    const MetricSummary s = aggregate(slices);
    CHECK(s.psnr_mean >= lo);
    CHECK(s.psnr_mean <= hi);
  }
  SUBCASE("empty list is rejected") {
    CHECK_THROWS_AS(aggregate({}), InvalidInputError);
  }
}
