#include "ctxmri/score_model.hpp"

#include <fstream>

#include "ctxmri/binio.hpp"
#include "ctxmri/error.hpp"
#include "ctxmri/parallel.hpp"
#include "ctxmri/rng.hpp"

namespace ctxmri {

namespace {

std::vector<double> silu_vec(const std::vector<double>& in) {
  std::vector<double> out(in.size());
  for (size_t i = 0; i < in.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-in[i]));
    out[i] = in[i] * s;
  }
  return out;
}

std::vector<double> silu_vec_backward(const std::vector<double>& in,
                                      const std::vector<double>& gout) {
  std::vector<double> gin(in.size());
  for (size_t i = 0; i < in.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-in[i]));
    gin[i] = gout[i] * s * (1.0 + in[i] * (1.0 - s));
  }
  return gin;
}

nn::Tensor add_tensors(const nn::Tensor& a, const nn::Tensor& b) {
  nn::Tensor out(a.c, a.h, a.w);
  for (size_t i = 0; i < a.size(); ++i) out.v[i] = a.v[i] + b.v[i];
  return out;
}

}  // namespace

CondUnet::CondUnet(int base_channels, std::uint64_t init_seed) : base_(base_channels) {
  const int b = base_channels;
  auto s = [&](std::uint64_t salt) { return seed_combine(init_seed, salt); };

  auto gn_groups = [](int ch) {
    for (int g = std::min(8, ch); g >= 1; --g)
      if (ch % g == 0) return g;
    return 1;
  };
  auto make_rb = [&](ResBlock& rb, int cin, int cout, std::uint64_t salt) {
    rb.conv1.init(cin, cout, 3, 1, 1, s(salt));
    rb.conv2.init(cout, cout, 3, 1, 1, s(salt + 1));
    rb.gn1.init(cout, gn_groups(cout));
    rb.gn2.init(cout, gn_groups(cout));
    rb.film.init_zero(kCtxDim, 2 * cout);
    rb.has_skip = cin != cout;
    if (rb.has_skip) rb.skip.init(cin, cout, 1, 1, 0, s(salt + 2));
  };

  stem_.init(2, b, 3, 1, 1, s(1));
  make_rb(enc1_, b, b, 10);
  down1_.init(b, 2 * b, 3, 2, 1, s(20));
  make_rb(enc2_, 2 * b, 2 * b, 30);
  down2_.init(2 * b, 3 * b, 3, 2, 1, s(40));
  make_rb(mid_, 3 * b, 3 * b, 50);
  up1_.init(3 * b, 2 * b, 3, 1, 1, s(60));
  make_rb(dec2_, 4 * b, 2 * b, 70);
  up2_.init(2 * b, b, 3, 1, 1, s(80));
  make_rb(dec1_, 2 * b, b, 90);
  out_.init(b, 2, 3, 1, 1, s(100));
  std::fill(out_.w.begin(), out_.w.end(), 0.0);  // zero-init: initial prediction is 0

  temb_l1_.init(kTembRawDim, 64, s(110));
  temb_l2_.init(64, 64, s(111));
  cond_l1_.init(ConditioningVector::kDim, 64, s(120));
  cond_l2_.init(64, 64, s(121));
}

nn::Tensor CondUnet::resblock_forward(const ResBlock& rb, const nn::Tensor& x,
                                      const std::vector<double>& ctx,
                                      ResBlockCache* cache) const {
  const bool par = use_parallel_kernels();
  nn::Tensor h1 = nn::conv2d_forward(rb.conv1, x, par);
  nn::GroupNorm::Cache gn1c;
  nn::Tensor g1 = nn::groupnorm_forward(rb.gn1, h1, &gn1c);

  std::vector<double> ss = nn::linear_forward(rb.film, ctx);
  const int cch = rb.conv1.c_out;
  nn::Tensor f(g1.c, g1.h, g1.w);
  const size_t plane = static_cast<size_t>(g1.h) * g1.w;
  for (int ch = 0; ch < cch; ++ch) {
    const double scale = 1.0 + ss[ch];
    const double shift = ss[cch + ch];
    const double* p = g1.plane(ch);
    double* q = f.plane(ch);
    for (size_t i = 0; i < plane; ++i) q[i] = p[i] * scale + shift;
  }

  nn::Tensor a1 = nn::silu_forward(f);
  nn::Tensor h2 = nn::conv2d_forward(rb.conv2, a1, par);
  nn::GroupNorm::Cache gn2c;
  nn::Tensor g2 = nn::groupnorm_forward(rb.gn2, h2, &gn2c);
  nn::Tensor a2 = nn::silu_forward(g2);

  nn::Tensor skipped = rb.has_skip ? nn::conv2d_forward(rb.skip, x, par) : x;
  nn::Tensor out = add_tensors(a2, skipped);

  if (cache) {
    cache->x = x;
    cache->h1 = std::move(h1);
    cache->g1 = std::move(g1);
    cache->f = std::move(f);
    cache->a1 = std::move(a1);
    cache->h2 = std::move(h2);
    cache->g2 = std::move(g2);
    cache->gn1c = std::move(gn1c);
    cache->gn2c = std::move(gn2c);
    cache->scale_shift = std::move(ss);
  }
  return out;
}

nn::Tensor CondUnet::resblock_backward(ResBlock& rb, const ResBlockCache& cache,
                                       const nn::Tensor& gout, std::vector<double>& gctx) {
  const bool par = use_parallel_kernels();
  nn::Tensor gg2 = nn::silu_backward(cache.g2, gout);
  nn::Tensor gh2 = nn::groupnorm_backward(rb.gn2, cache.h2, cache.gn2c, gg2);
  nn::Tensor ga1 = nn::conv2d_backward(rb.conv2, cache.a1, gh2, par);
  nn::Tensor gf = nn::silu_backward(cache.f, ga1);

  const int cch = rb.conv1.c_out;
  const size_t plane = static_cast<size_t>(gf.h) * gf.w;
  std::vector<double> gss(2 * cch, 0.0);
  nn::Tensor gg1(gf.c, gf.h, gf.w);
  for (int ch = 0; ch < cch; ++ch) {
    const double scale = 1.0 + cache.scale_shift[ch];
    const double* gp = gf.plane(ch);
    const double* g1p = cache.g1.plane(ch);
    double* op = gg1.plane(ch);
    double gs = 0.0, gt = 0.0;
    for (size_t i = 0; i < plane; ++i) {
      op[i] = gp[i] * scale;
      gs += gp[i] * g1p[i];
      gt += gp[i];
    }
    gss[ch] = gs;
    gss[cch + ch] = gt;
  }
  std::vector<double> gctx_local = nn::linear_backward(rb.film, *ctx_input_, gss);
  for (size_t i = 0; i < gctx.size(); ++i) gctx[i] += gctx_local[i];

  nn::Tensor gh1 = nn::groupnorm_backward(rb.gn1, cache.h1, cache.gn1c, gg1);
  nn::Tensor gx = nn::conv2d_backward(rb.conv1, cache.x, gh1, par);
  if (rb.has_skip) {
    nn::Tensor gx_skip = nn::conv2d_backward(rb.skip, cache.x, gout, par);
    for (size_t i = 0; i < gx.size(); ++i) gx.v[i] += gx_skip.v[i];
  } else {
    for (size_t i = 0; i < gx.size(); ++i) gx.v[i] += gout.v[i];
  }
  return gx;
}

nn::Tensor CondUnet::forward(const nn::Tensor& x, int t, const ConditioningVector& c,
                             Cache* cache) const {
  const bool par = use_parallel_kernels();

  std::vector<double> temb_raw = nn::sinusoidal_embedding(static_cast<double>(t), kTembRawDim);
  std::vector<double> te_pre = nn::linear_forward(temb_l1_, temb_raw);
  std::vector<double> te_act = silu_vec(te_pre);
  std::vector<double> te = nn::linear_forward(temb_l2_, te_act);

  std::vector<double> cond_in(c.values.begin(), c.values.end());
  std::vector<double> ce_pre = nn::linear_forward(cond_l1_, cond_in);
  std::vector<double> ce_act = silu_vec(ce_pre);
  std::vector<double> ce = nn::linear_forward(cond_l2_, ce_act);

  std::vector<double> ctx(kCtxDim);
  std::copy(te.begin(), te.end(), ctx.begin());
  std::copy(ce.begin(), ce.end(), ctx.begin() + 64);

  nn::Tensor stem_out = nn::conv2d_forward(stem_, x, par);
  nn::Tensor e1 = resblock_forward(enc1_, stem_out, ctx, cache ? &cache->enc1 : nullptr);
  nn::Tensor d1 = nn::conv2d_forward(down1_, e1, par);
  nn::Tensor e2 = resblock_forward(enc2_, d1, ctx, cache ? &cache->enc2 : nullptr);
  nn::Tensor d2 = nn::conv2d_forward(down2_, e2, par);
  nn::Tensor m = resblock_forward(mid_, d2, ctx, cache ? &cache->mid : nullptr);
  nn::Tensor m_up = nn::upsample2x(m);
  nn::Tensor u1 = nn::conv2d_forward(up1_, m_up, par);
  nn::Tensor cat2 = nn::concat_channels(e2, u1);
  nn::Tensor o2 = resblock_forward(dec2_, cat2, ctx, cache ? &cache->dec2 : nullptr);
  nn::Tensor o2_up = nn::upsample2x(o2);
  nn::Tensor u2 = nn::conv2d_forward(up2_, o2_up, par);
  nn::Tensor cat1 = nn::concat_channels(e1, u2);
  nn::Tensor o1 = resblock_forward(dec1_, cat1, ctx, cache ? &cache->dec1 : nullptr);
  nn::Tensor out = nn::conv2d_forward(out_, o1, par);

  if (cache) {
    cache->temb_raw = std::move(temb_raw);
    cache->te_pre = std::move(te_pre);
    cache->te_act = std::move(te_act);
    cache->te = std::move(te);
    cache->cond_in = std::move(cond_in);
    cache->ce_pre = std::move(ce_pre);
    cache->ce_act = std::move(ce_act);
    cache->ce = std::move(ce);
    cache->ctx = std::move(ctx);
    cache->x_in = x;
    cache->stem_out = std::move(stem_out);
    cache->e1 = std::move(e1);
    cache->d1 = std::move(d1);
    cache->e2 = std::move(e2);
    cache->d2 = std::move(d2);
    cache->m = std::move(m);
    cache->m_up = std::move(m_up);
    cache->u1 = std::move(u1);
    cache->cat2 = std::move(cat2);
    cache->o2 = std::move(o2);
    cache->o2_up = std::move(o2_up);
    cache->u2 = std::move(u2);
    cache->cat1 = std::move(cat1);
    cache->o1 = std::move(o1);
  }
  return out;
}

nn::Tensor CondUnet::backward(const Cache& cache, const nn::Tensor& gout) {
  const bool par = use_parallel_kernels();
  std::vector<double> gctx(kCtxDim, 0.0);
  ctx_input_ = &cache.ctx;

  nn::Tensor go1 = nn::conv2d_backward(out_, cache.o1, gout, par);
  nn::Tensor gcat1 = resblock_backward(dec1_, cache.dec1, go1, gctx);
  nn::Tensor ge1_skip, gu2;
  nn::split_channels(gcat1, base_, ge1_skip, gu2);
  nn::Tensor go2_up = nn::conv2d_backward(up2_, cache.o2_up, gu2, par);
  nn::Tensor go2 = nn::upsample2x_backward(go2_up);
  nn::Tensor gcat2 = resblock_backward(dec2_, cache.dec2, go2, gctx);
  nn::Tensor ge2_skip, gu1;
  nn::split_channels(gcat2, 2 * base_, ge2_skip, gu1);
  nn::Tensor gm_up = nn::conv2d_backward(up1_, cache.m_up, gu1, par);
  nn::Tensor gm = nn::upsample2x_backward(gm_up);
  nn::Tensor gd2 = resblock_backward(mid_, cache.mid, gm, gctx);
  nn::Tensor ge2 = nn::conv2d_backward(down2_, cache.e2, gd2, par);
  for (size_t i = 0; i < ge2.size(); ++i) ge2.v[i] += ge2_skip.v[i];
  nn::Tensor gd1 = resblock_backward(enc2_, cache.enc2, ge2, gctx);
  nn::Tensor ge1 = nn::conv2d_backward(down1_, cache.e1, gd1, par);
  for (size_t i = 0; i < ge1.size(); ++i) ge1.v[i] += ge1_skip.v[i];
  nn::Tensor gstem = resblock_backward(enc1_, cache.enc1, ge1, gctx);
  nn::Tensor gx = nn::conv2d_backward(stem_, cache.x_in, gstem, par);

  // context gradients into the two embedding MLPs
  std::vector<double> gte(gctx.begin(), gctx.begin() + 64);
  std::vector<double> gce(gctx.begin() + 64, gctx.end());
  std::vector<double> gte_act = nn::linear_backward(temb_l2_, cache.te_act, gte);
  std::vector<double> gte_pre = silu_vec_backward(cache.te_pre, gte_act);
  nn::linear_backward(temb_l1_, cache.temb_raw, gte_pre);
  std::vector<double> gce_act = nn::linear_backward(cond_l2_, cache.ce_act, gce);
  std::vector<double> gce_pre = silu_vec_backward(cache.ce_pre, gce_act);
  nn::linear_backward(cond_l1_, cache.cond_in, gce_pre);

  ctx_input_ = nullptr;
  return gx;
}

TwoChannelImage CondUnet::predict(const TwoChannelImage& x_t, int t,
                                  const ConditioningVector& c) const {
  nn::Tensor x(2, x_t.height, x_t.width);
  std::copy(x_t.real_channel.begin(), x_t.real_channel.end(), x.plane(0));
  std::copy(x_t.imag_channel.begin(), x_t.imag_channel.end(), x.plane(1));
  nn::Tensor out = forward(x, t, c, nullptr);
  TwoChannelImage eps(x_t.height, x_t.width);
  std::copy(out.plane(0), out.plane(0) + eps.size(), eps.real_channel.begin());
  std::copy(out.plane(1), out.plane(1) + eps.size(), eps.imag_channel.begin());
  return eps;
}

std::vector<nn::ParamRef> CondUnet::resblock_params(ResBlock& rb, const char* name) {
  std::vector<nn::ParamRef> p = {
      {&rb.conv1.w, &rb.conv1.gw, name}, {&rb.conv1.b, &rb.conv1.gb, name},
      {&rb.conv2.w, &rb.conv2.gw, name}, {&rb.conv2.b, &rb.conv2.gb, name},
      {&rb.gn1.gamma, &rb.gn1.ggamma, name}, {&rb.gn1.beta, &rb.gn1.gbeta, name},
      {&rb.gn2.gamma, &rb.gn2.ggamma, name}, {&rb.gn2.beta, &rb.gn2.gbeta, name},
      {&rb.film.w, &rb.film.gw, name}, {&rb.film.b, &rb.film.gb, name},
  };
  if (rb.has_skip) {
    p.push_back({&rb.skip.w, &rb.skip.gw, name});
    p.push_back({&rb.skip.b, &rb.skip.gb, name});
  }
  return p;
}

std::vector<nn::ParamRef> CondUnet::params() {
  std::vector<nn::ParamRef> out = {
      {&stem_.w, &stem_.gw, "stem"},   {&stem_.b, &stem_.gb, "stem"},
      {&down1_.w, &down1_.gw, "down1"}, {&down1_.b, &down1_.gb, "down1"},
      {&down2_.w, &down2_.gw, "down2"}, {&down2_.b, &down2_.gb, "down2"},
      {&up1_.w, &up1_.gw, "up1"},      {&up1_.b, &up1_.gb, "up1"},
      {&up2_.w, &up2_.gw, "up2"},      {&up2_.b, &up2_.gb, "up2"},
      {&out_.w, &out_.gw, "out"},      {&out_.b, &out_.gb, "out"},
      {&temb_l1_.w, &temb_l1_.gw, "temb1"}, {&temb_l1_.b, &temb_l1_.gb, "temb1"},
      {&temb_l2_.w, &temb_l2_.gw, "temb2"}, {&temb_l2_.b, &temb_l2_.gb, "temb2"},
      {&cond_l1_.w, &cond_l1_.gw, "cond1"}, {&cond_l1_.b, &cond_l1_.gb, "cond1"},
      {&cond_l2_.w, &cond_l2_.gw, "cond2"}, {&cond_l2_.b, &cond_l2_.gb, "cond2"},
  };
  for (auto [rb, nm] : {std::pair<ResBlock*, const char*>{&enc1_, "enc1"},
                        {&enc2_, "enc2"},
                        {&mid_, "mid"},
                        {&dec2_, "dec2"},
                        {&dec1_, "dec1"}}) {
    auto p = resblock_params(*rb, nm);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

void CondUnet::zero_grads() {
  for (auto& ref : params()) std::fill(ref.grads->begin(), ref.grads->end(), 0.0);
}

size_t CondUnet::num_parameters() const {
  size_t n = 0;
  for (auto& ref : const_cast<CondUnet*>(this)->params()) n += ref.values->size();
  return n;
}

namespace {
constexpr char kCkptMagic[4] = {'C', 'K', 'P', 'T'};
constexpr std::uint16_t kCkptVersion = 1;
}  // namespace

void save_checkpoint(const CondUnet& net, const DiffusionSchedule& sched,
                     const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path.string());
  binio::write_magic(os, kCkptMagic);
  binio::write_pod<std::uint16_t>(os, kCkptVersion);
  binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(sched.num_steps));
  binio::write_pod<double>(os, sched.beta_start);
  binio::write_pod<double>(os, sched.beta_end);
  binio::write_pod<double>(os, sched.eta);
  binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(net.base_channels()));
  auto params = const_cast<CondUnet&>(net).params();
  binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (auto& ref : params) {
    binio::write_pod<std::uint64_t>(os, ref.values->size());
    for (double v : *ref.values) binio::write_pod<double>(os, v);
  }
  if (!os) throw IoError("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  binio::expect_magic(is, kCkptMagic, "checkpoint");
  if (binio::read_pod<std::uint16_t>(is) != kCkptVersion)
    throw IoError("unsupported checkpoint version");
  const int T = static_cast<int>(binio::read_pod<std::uint32_t>(is));
  const double b0 = binio::read_pod<double>(is);
  const double b1 = binio::read_pod<double>(is);
  const double eta = binio::read_pod<double>(is);
  const int base = static_cast<int>(binio::read_pod<std::uint32_t>(is));

  Checkpoint ckpt;
  ckpt.schedule = make_schedule(T, b0, b1, eta);
  ckpt.model = std::make_shared<CondUnet>(base, 0);
  auto params = ckpt.model->params();
  const auto count = binio::read_pod<std::uint32_t>(is);
  if (count != params.size()) throw IoError("checkpoint: parameter tensor count mismatch");
  for (auto& ref : params) {
    const auto n = binio::read_pod<std::uint64_t>(is);
    if (n != ref.values->size()) throw IoError("checkpoint: tensor size mismatch");
    for (double& v : *ref.values) v = binio::read_pod<double>(is);
  }
  return ckpt;
}

}  // namespace ctxmri
