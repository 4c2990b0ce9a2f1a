#include "ctxmri/nn.hpp"

#include <omp.h>

#include <cmath>

#include "ctxmri/error.hpp"
#include "ctxmri/rng.hpp"

namespace ctxmri::nn {

void Conv2d::init(int cin, int cout, int kk, int s, int p, std::uint64_t seed) {
  c_in = cin;
  c_out = cout;
  k = kk;
  stride = s;
  pad = p;
  w.assign(static_cast<size_t>(cout) * cin * kk * kk, 0.0);
  b.assign(cout, 0.0);
  gw.assign(w.size(), 0.0);
  gb.assign(b.size(), 0.0);
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / (static_cast<double>(cin) * kk * kk));
  for (double& x : w) x = rng.uniform(-bound, bound);
}

namespace {

/// One output row of a convolution: out[co] row y. Shared by the serial
/// and OpenMP drivers.
__attribute__((noinline)) void conv_row(const Conv2d& conv, const Tensor& in, Tensor& out,
                                        int co, int yo) {
  const int k = conv.k, pad = conv.pad, stride = conv.stride;
  const int wi = in.w, wo = out.w;
  double* orow = out.plane(co) + static_cast<size_t>(yo) * wo;
  for (int x = 0; x < wo; ++x) orow[x] = conv.b[co];
  for (int ci = 0; ci < conv.c_in; ++ci) {
    const double* iplane = in.plane(ci);
    const double* wbase =
        conv.w.data() + ((static_cast<size_t>(co) * conv.c_in + ci) * k) * k;
    for (int ky = 0; ky < k; ++ky) {
      const int yi = yo * stride + ky - pad;
      if (yi < 0 || yi >= in.h) continue;
      const double* irow = iplane + static_cast<size_t>(yi) * wi;
      for (int kx = 0; kx < k; ++kx) {
        const double wv = wbase[ky * k + kx];
        const int dx = kx - pad;
        if (stride == 1) {
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(wo, wi - dx);
          for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x + dx];
        } else {
          for (int x = 0; x < wo; ++x) {
            const int xi = x * stride + dx;
            if (xi >= 0 && xi < wi) orow[x] += wv * irow[xi];
          }
        }
      }
    }
  }
}

/// Gradient wrt one input row (gather form, no write races).
__attribute__((noinline)) void conv_grad_in_row(const Conv2d& conv, const Tensor& gout,
                                                Tensor& gin, int ci, int yi) {
  const int k = conv.k, pad = conv.pad, stride = conv.stride;
  double* grow = gin.plane(ci) + static_cast<size_t>(yi) * gin.w;
  for (int xi = 0; xi < gin.w; ++xi) {
    double acc = 0.0;
    for (int ky = 0; ky < k; ++ky) {
      const int ynum = yi - ky + pad;
      if (ynum < 0 || ynum % stride != 0) continue;
      const int yo = ynum / stride;
      if (yo >= gout.h) continue;
      for (int kx = 0; kx < k; ++kx) {
        const int xnum = xi - kx + pad;
        if (xnum < 0 || xnum % stride != 0) continue;
        const int xo = xnum / stride;
        if (xo >= gout.w) continue;
        for (int co = 0; co < conv.c_out; ++co) {
          const double wv =
              conv.w[((static_cast<size_t>(co) * conv.c_in + ci) * k + ky) * k + kx];
          acc += wv * gout.plane(co)[static_cast<size_t>(yo) * gout.w + xo];
        }
      }
    }
    grow[xi] = acc;
  }
}

/// Weight/bias gradient contributions for one output channel.
__attribute__((noinline)) void conv_grad_w_channel(Conv2d& conv, const Tensor& in,
                                                   const Tensor& gout, int co) {
  const int k = conv.k, pad = conv.pad, stride = conv.stride;
  const double* gplane = gout.plane(co);
  double bacc = 0.0;
  for (size_t i = 0; i < static_cast<size_t>(gout.h) * gout.w; ++i) bacc += gplane[i];
  conv.gb[co] += bacc;
  for (int ci = 0; ci < conv.c_in; ++ci) {
    const double* iplane = in.plane(ci);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double acc = 0.0;
        for (int yo = 0; yo < gout.h; ++yo) {
          const int yi = yo * stride + ky - pad;
          if (yi < 0 || yi >= in.h) continue;
          const double* grow = gplane + static_cast<size_t>(yo) * gout.w;
          const double* irow = iplane + static_cast<size_t>(yi) * in.w;
          for (int xo = 0; xo < gout.w; ++xo) {
            const int xi = xo * stride + kx - pad;
            if (xi >= 0 && xi < in.w) acc += grow[xo] * irow[xi];
          }
        }
        conv.gw[((static_cast<size_t>(co) * conv.c_in + ci) * k + ky) * k + kx] += acc;
      }
    }
  }
}

}  // namespace

Tensor conv2d_forward(const Conv2d& conv, const Tensor& in, bool parallel) {
  if (in.c != conv.c_in) throw ShapeError("conv2d: channel mismatch");
  Tensor out(conv.c_out, conv.out_h(in.h), conv.out_w(in.w));
  const long rows = static_cast<long>(conv.c_out) * out.h;
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (long r = 0; r < rows; ++r) conv_row(conv, in, out, static_cast<int>(r / out.h),
                                             static_cast<int>(r % out.h));
  } else {
    for (long r = 0; r < rows; ++r)
      conv_row(conv, in, out, static_cast<int>(r / out.h), static_cast<int>(r % out.h));
  }
  return out;
}

Tensor conv2d_backward(Conv2d& conv, const Tensor& in, const Tensor& gout, bool parallel) {
  if (in.c != conv.c_in || gout.c != conv.c_out) throw ShapeError("conv2d backward: shape");
  Tensor gin(in.c, in.h, in.w);
  const long in_rows = static_cast<long>(in.c) * in.h;
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (long r = 0; r < in_rows; ++r)
      conv_grad_in_row(conv, gout, gin, static_cast<int>(r / in.h), static_cast<int>(r % in.h));
#pragma omp parallel for schedule(static)
    for (int co = 0; co < conv.c_out; ++co) conv_grad_w_channel(conv, in, gout, co);
  } else {
    for (long r = 0; r < in_rows; ++r)
      conv_grad_in_row(conv, gout, gin, static_cast<int>(r / in.h), static_cast<int>(r % in.h));
    for (int co = 0; co < conv.c_out; ++co) conv_grad_w_channel(conv, in, gout, co);
  }
  return gin;
}

void GroupNorm::init(int ch, int g) {
  channels = ch;
  groups = g;
  if (ch % g != 0) throw ConfigError("groupnorm: channels must divide into groups");
  gamma.assign(ch, 1.0);
  beta.assign(ch, 0.0);
  ggamma.assign(ch, 0.0);
  gbeta.assign(ch, 0.0);
}

Tensor groupnorm_forward(const GroupNorm& gn, const Tensor& in, GroupNorm::Cache* cache) {
  if (in.c != gn.channels) throw ShapeError("groupnorm: channel mismatch");
  const int cpg = gn.channels / gn.groups;
  const size_t plane = static_cast<size_t>(in.h) * in.w;
  const double n = static_cast<double>(cpg) * plane;
  Tensor out(in.c, in.h, in.w);
  std::vector<double> means(gn.groups), invstds(gn.groups);
  for (int g = 0; g < gn.groups; ++g) {
    double s = 0.0, s2 = 0.0;
    for (int ch = g * cpg; ch < (g + 1) * cpg; ++ch) {
      const double* p = in.plane(ch);
      for (size_t i = 0; i < plane; ++i) {
        s += p[i];
        s2 += p[i] * p[i];
      }
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    const double invstd = 1.0 / std::sqrt(var + gn.eps);
    means[g] = mean;
    invstds[g] = invstd;
    for (int ch = g * cpg; ch < (g + 1) * cpg; ++ch) {
      const double* p = in.plane(ch);
      double* q = out.plane(ch);
      const double ga = gn.gamma[ch], be = gn.beta[ch];
      for (size_t i = 0; i < plane; ++i) q[i] = ga * (p[i] - mean) * invstd + be;
    }
  }
  if (cache) {
    cache->mean = std::move(means);
    cache->invstd = std::move(invstds);
  }
  return out;
}

Tensor groupnorm_backward(GroupNorm& gn, const Tensor& in, const GroupNorm::Cache& cache,
                          const Tensor& gout) {
  const int cpg = gn.channels / gn.groups;
  const size_t plane = static_cast<size_t>(in.h) * in.w;
  const double n = static_cast<double>(cpg) * plane;
  Tensor gin(in.c, in.h, in.w);
  for (int g = 0; g < gn.groups; ++g) {
    const double mean = cache.mean[g], invstd = cache.invstd[g];
    // dgamma/dbeta and the two group means needed for dx
    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
    for (int ch = g * cpg; ch < (g + 1) * cpg; ++ch) {
      const double* x = in.plane(ch);
      const double* dy = gout.plane(ch);
      double dgam = 0.0, dbet = 0.0;
      const double ga = gn.gamma[ch];
      for (size_t i = 0; i < plane; ++i) {
        const double xhat = (x[i] - mean) * invstd;
        dgam += dy[i] * xhat;
        dbet += dy[i];
        const double dxhat = dy[i] * ga;
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
      }
      gn.ggamma[ch] += dgam;
      gn.gbeta[ch] += dbet;
    }
    const double m_dxhat = sum_dxhat / n;
    const double m_dxhat_xhat = sum_dxhat_xhat / n;
    for (int ch = g * cpg; ch < (g + 1) * cpg; ++ch) {
      const double* x = in.plane(ch);
      const double* dy = gout.plane(ch);
      double* gx = gin.plane(ch);
      const double ga = gn.gamma[ch];
      for (size_t i = 0; i < plane; ++i) {
        const double xhat = (x[i] - mean) * invstd;
        const double dxhat = dy[i] * ga;
        gx[i] = invstd * (dxhat - m_dxhat - xhat * m_dxhat_xhat);
      }
    }
  }
  return gin;
}

Tensor silu_forward(const Tensor& in) {
  Tensor out(in.c, in.h, in.w);
  for (size_t i = 0; i < in.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-in.v[i]));
    out.v[i] = in.v[i] * s;
  }
  return out;
}

Tensor silu_backward(const Tensor& in, const Tensor& gout) {
  Tensor gin(in.c, in.h, in.w);
  for (size_t i = 0; i < in.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-in.v[i]));
    gin.v[i] = gout.v[i] * s * (1.0 + in.v[i] * (1.0 - s));
  }
  return gin;
}

void Linear::init(int in, int out, std::uint64_t seed) {
  n_in = in;
  n_out = out;
  w.assign(static_cast<size_t>(in) * out, 0.0);
  b.assign(out, 0.0);
  gw.assign(w.size(), 0.0);
  gb.assign(b.size(), 0.0);
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / in);
  for (double& x : w) x = rng.uniform(-bound, bound);
}

void Linear::init_zero(int in, int out) {
  n_in = in;
  n_out = out;
  w.assign(static_cast<size_t>(in) * out, 0.0);
  b.assign(out, 0.0);
  gw.assign(w.size(), 0.0);
  gb.assign(b.size(), 0.0);
}

std::vector<double> linear_forward(const Linear& lin, const std::vector<double>& in) {
  if (static_cast<int>(in.size()) != lin.n_in) throw ShapeError("linear: input size");
  std::vector<double> out(lin.n_out);
  for (int o = 0; o < lin.n_out; ++o) {
    double acc = lin.b[o];
    const double* wrow = lin.w.data() + static_cast<size_t>(o) * lin.n_in;
    for (int i = 0; i < lin.n_in; ++i) acc += wrow[i] * in[i];
    out[o] = acc;
  }
  return out;
}

std::vector<double> linear_backward(Linear& lin, const std::vector<double>& in,
                                    const std::vector<double>& gout) {
  std::vector<double> gin(lin.n_in, 0.0);
  for (int o = 0; o < lin.n_out; ++o) {
    const double g = gout[o];
    lin.gb[o] += g;
    double* gwrow = lin.gw.data() + static_cast<size_t>(o) * lin.n_in;
    const double* wrow = lin.w.data() + static_cast<size_t>(o) * lin.n_in;
    for (int i = 0; i < lin.n_in; ++i) {
      gwrow[i] += g * in[i];
      gin[i] += g * wrow[i];
    }
  }
  return gin;
}

Tensor upsample2x(const Tensor& in) {
  Tensor out(in.c, in.h * 2, in.w * 2);
  for (int c = 0; c < in.c; ++c) {
    const double* p = in.plane(c);
    double* q = out.plane(c);
    for (int y = 0; y < in.h; ++y)
      for (int x = 0; x < in.w; ++x) {
        const double v = p[static_cast<size_t>(y) * in.w + x];
        const size_t base = static_cast<size_t>(2 * y) * out.w + 2 * x;
        q[base] = v;
        q[base + 1] = v;
        q[base + out.w] = v;
        q[base + out.w + 1] = v;
      }
  }
  return out;
}

Tensor upsample2x_backward(const Tensor& gout) {
  Tensor gin(gout.c, gout.h / 2, gout.w / 2);
  for (int c = 0; c < gout.c; ++c) {
    const double* q = gout.plane(c);
    double* p = gin.plane(c);
    for (int y = 0; y < gin.h; ++y)
      for (int x = 0; x < gin.w; ++x) {
        const size_t base = static_cast<size_t>(2 * y) * gout.w + 2 * x;
        p[static_cast<size_t>(y) * gin.w + x] =
            q[base] + q[base + 1] + q[base + gout.w] + q[base + gout.w + 1];
      }
  }
  return gin;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.h != b.h || a.w != b.w) throw ShapeError("concat: spatial mismatch");
  Tensor out(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<long>(a.v.size()));
  return out;
}

void split_channels(const Tensor& g, int c_a, Tensor& ga, Tensor& gb) {
  ga = Tensor(c_a, g.h, g.w);
  gb = Tensor(g.c - c_a, g.h, g.w);
  std::copy(g.v.begin(), g.v.begin() + static_cast<long>(ga.v.size()), ga.v.begin());
  std::copy(g.v.begin() + static_cast<long>(ga.v.size()), g.v.end(), gb.v.begin());
}

std::vector<double> sinusoidal_embedding(double t, int dim) {
  std::vector<double> out(dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                 static_cast<double>(half - 1));
    out[2 * i] = std::sin(t * freq);
    out[2 * i + 1] = std::cos(t * freq);
  }
  return out;
}

}  // namespace ctxmri::nn
