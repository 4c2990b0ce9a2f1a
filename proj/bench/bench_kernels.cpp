// Compares the OpenMP kernel paths against their serial references:
// wall time, speedup, and a max-abs-difference column that must read 0.

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <functional>

#include "ctxmri/espirit.hpp"
#include "ctxmri/fft.hpp"
#include "ctxmri/forward_model.hpp"
#include "ctxmri/masks.hpp"
#include "ctxmri/nn.hpp"
#include "ctxmri/phantom.hpp"
#include "ctxmri/rng.hpp"

using namespace ctxmri;

namespace {

double wall() { return omp_get_wtime(); }

void report(const char* name, double t_serial, double t_parallel, double max_diff) {
  std::printf("%-28s serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   max|diff| %g\n", name,
              1e3 * t_serial, 1e3 * t_parallel, t_serial / t_parallel, max_diff);
}

ComplexImage random_image(int h, int w, Rng& rng) {
  ComplexImage img(h, w);
  for (cxd& v : img.data) v = cxd(rng.normal(), rng.normal());
  return img;
}

}  // namespace

int main() {
  std::printf("threads available: %d\n\n", omp_get_max_threads());
  Rng rng(7);

  {  // batched coil FFTs
    std::vector<ComplexImage> coils;
    for (int i = 0; i < 16; ++i) coils.push_back(random_image(320, 320, rng));
    fft2c_batch_serial({coils[0]});  // warm the plan
    double t0 = wall();
    auto a = fft2c_batch_serial(coils);
    double t1 = wall();
    auto b = fft2c_batch(coils);
    double t2 = wall();
    double diff = 0;
    for (size_t i = 0; i < a.size(); ++i)
      for (size_t j = 0; j < a[i].data.size(); ++j)
        diff = std::max(diff, std::abs(a[i].data[j] - b[i].data[j]));
    report("fft2c batch 16x320x320", t1 - t0, t2 - t1, diff);
  }

  {  // conv2d forward + backward
    nn::Conv2d conv;
    conv.init(32, 32, 3, 1, 1, 11);
    nn::Tensor in(32, 64, 64);
    Rng r2(3);
    for (double& v : in.v) v = r2.normal();
    auto fwd_serial = nn::conv2d_forward(conv, in, false);
    double t0 = wall();
    for (int i = 0; i < 10; ++i) fwd_serial = nn::conv2d_forward(conv, in, false);
    double t1 = wall();
    auto fwd_par = nn::conv2d_forward(conv, in, true);
    double t2 = wall();
    for (int i = 0; i < 10; ++i) fwd_par = nn::conv2d_forward(conv, in, true);
    double t3 = wall();
    double diff = 0;
    for (size_t i = 0; i < fwd_serial.size(); ++i)
      diff = std::max(diff, std::abs(fwd_serial.v[i] - fwd_par.v[i]));
    report("conv2d fwd 32ch 64x64 x10", t1 - t0, t3 - t2, diff);

    nn::Conv2d c1 = conv, c2 = conv;
    double t4 = wall();
    auto gin_s = nn::conv2d_backward(c1, in, fwd_serial, false);
    double t5 = wall();
    auto gin_p = nn::conv2d_backward(c2, in, fwd_serial, true);
    double t6 = wall();
    diff = 0;
    for (size_t i = 0; i < gin_s.size(); ++i)
      diff = std::max(diff, std::abs(gin_s.v[i] - gin_p.v[i]));
    for (size_t i = 0; i < c1.gw.size(); ++i)
      diff = std::max(diff, std::abs(c1.gw[i] - c2.gw[i]));
    report("conv2d bwd 32ch 64x64", t5 - t4, t6 - t5, diff);
  }

  {  // ESPIRiT per-pixel eigen stage
    DatasetOptions opts;
    opts.height = 64;
    opts.width = 64;
    auto records = generate_dataset(1, 99, opts);
    ForwardModel model{records[0].maps, SamplingMask(64, 64), 0.0};
    const MultiCoilKSpace y = forward(model, records[0].image);
    CalibrationConfig cal;
    double t0 = wall();
    auto maps_s = estimate_maps_serial(y, cal);
    double t1 = wall();
    auto maps_p = estimate_maps(y, cal);
    double t2 = wall();
    double diff = 0;
    for (int c = 0; c < maps_s.num_coils; ++c)
      for (size_t i = 0; i < maps_s.maps[c].data.size(); ++i)
        diff = std::max(diff, std::abs(maps_s.maps[c].data[i] - maps_p.maps[c].data[i]));
    report("espirit 4-coil 64x64", t1 - t0, t2 - t1, diff);
  }

  return 0;
}
