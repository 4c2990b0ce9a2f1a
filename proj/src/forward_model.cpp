#include "ctxmri/forward_model.hpp"

#include "ctxmri/error.hpp"
#include "ctxmri/fft.hpp"
#include "ctxmri/rng.hpp"

namespace ctxmri {

void validate(const ForwardModel& model) {
  if (model.maps.height != model.mask.height || model.maps.width != model.mask.width)
    throw ShapeError("forward model: maps and mask grids disagree");
  if (model.maps.num_coils <= 0) throw ConfigError("forward model: needs at least one coil");
  if (model.noise_sigma < 0.0) throw ConfigError("forward model: negative noise sigma");
}

MultiCoilKSpace forward(const ForwardModel& model, const ComplexImage& x) {
  if (x.height != model.height() || x.width != model.width())
    throw ShapeError("forward: image shape mismatch");
  std::vector<ComplexImage> weighted(model.num_coils());
  for (int c = 0; c < model.num_coils(); ++c) {
    ComplexImage img(x.height, x.width);
    const ComplexImage& s = model.maps.maps[c];
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = s.data[i] * x.data[i];
    weighted[c] = std::move(img);
  }
  MultiCoilKSpace out(model.num_coils(), x.height, x.width);
  out.coil_data = fft2c_batch(weighted);
  return apply_mask(out, model.mask);
}

ComplexImage adjoint(const ForwardModel& model, const MultiCoilKSpace& y) {
  if (y.height != model.height() || y.width != model.width() || y.num_coils != model.num_coils())
    throw ShapeError("adjoint: k-space shape mismatch");
  const MultiCoilKSpace masked = apply_mask(y, model.mask);
  const std::vector<ComplexImage> coil_imgs = ifft2c_batch(masked.coil_data);
  ComplexImage out(y.height, y.width);
  for (int c = 0; c < model.num_coils(); ++c) {
    const ComplexImage& s = model.maps.maps[c];
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] += std::conj(s.data[i]) * coil_imgs[c].data[i];
  }
  return out;
}

MultiCoilKSpace measure(const ForwardModel& model, const ComplexImage& x, std::uint64_t seed) {
  MultiCoilKSpace y = forward(model, x);
  if (model.noise_sigma > 0.0) {
    Rng rng(seed);
    for (ComplexImage& coil : y.coil_data)
      for (size_t i = 0; i < coil.data.size(); ++i)
        if (model.mask.kept[i])
          coil.data[i] += model.noise_sigma * cxd(rng.normal(), rng.normal());
  }
  return y;
}

}  // namespace ctxmri
