#pragma once

#include <cstdint>
#include <vector>

namespace ctxmri::nn {

/// Dense (channels, height, width) tensor, channel-major.
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_) {}
  double* plane(int ch) { return v.data() + static_cast<size_t>(ch) * h * w; }
  const double* plane(int ch) const { return v.data() + static_cast<size_t>(ch) * h * w; }
  size_t size() const { return v.size(); }
  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

/// 3x3-style convolution parameters. Weights laid out
/// [c_out][c_in][k][k], bias [c_out].
struct Conv2d {
  int c_in = 0, c_out = 0, k = 3, stride = 1, pad = 1;
  std::vector<double> w, b;
  std::vector<double> gw, gb;

  void init(int cin, int cout, int kk, int s, int p, std::uint64_t seed);
  int out_h(int in_h) const { return (in_h + 2 * pad - k) / stride + 1; }
  int out_w(int in_w) const { return (in_w + 2 * pad - k) / stride + 1; }
};

/// The parallel flag selects the OpenMP path; both paths share the same
/// per-element kernels and produce bit-identical results.
Tensor conv2d_forward(const Conv2d& conv, const Tensor& in, bool parallel);
/// Returns grad wrt input; accumulates gw/gb.
Tensor conv2d_backward(Conv2d& conv, const Tensor& in, const Tensor& gout, bool parallel);

struct GroupNorm {
  int channels = 0, groups = 1;
  double eps = 1e-5;
  std::vector<double> gamma, beta;
  std::vector<double> ggamma, gbeta;

  void init(int ch, int g);

  struct Cache {
    std::vector<double> mean, invstd;  // per group
  };
};

Tensor groupnorm_forward(const GroupNorm& gn, const Tensor& in, GroupNorm::Cache* cache);
Tensor groupnorm_backward(GroupNorm& gn, const Tensor& in, const GroupNorm::Cache& cache,
                          const Tensor& gout);

Tensor silu_forward(const Tensor& in);
Tensor silu_backward(const Tensor& in, const Tensor& gout);

struct Linear {
  int n_in = 0, n_out = 0;
  std::vector<double> w, b;  // w[out][in]
  std::vector<double> gw, gb;

  void init(int in, int out, std::uint64_t seed);
  void init_zero(int in, int out);
};

std::vector<double> linear_forward(const Linear& lin, const std::vector<double>& in);
std::vector<double> linear_backward(Linear& lin, const std::vector<double>& in,
                                    const std::vector<double>& gout);

/// Nearest-neighbour 2x upsample.
Tensor upsample2x(const Tensor& in);
Tensor upsample2x_backward(const Tensor& gout);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& g, int c_a, Tensor& ga, Tensor& gb);

std::vector<double> sinusoidal_embedding(double t, int dim);

/// Named parameter registry used by the optimizer, the checkpoint writer
/// and the finite-difference tests.
struct ParamRef {
  std::vector<double>* values;
  std::vector<double>* grads;
  const char* name;
};

}  // namespace ctxmri::nn
