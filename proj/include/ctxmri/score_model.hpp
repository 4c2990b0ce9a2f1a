#pragma once

#include <filesystem>
#include <functional>
#include <memory>

#include "ctxmri/diffusion.hpp"
#include "ctxmri/image.hpp"
#include "ctxmri/metadata.hpp"
#include "ctxmri/nn.hpp"

namespace ctxmri {

/// Conditional epsilon predictor. Implementations must be deterministic
/// and safe to call concurrently after training.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual TwoChannelImage predict(const TwoChannelImage& x_t, int t,
                                  const ConditioningVector& c) const = 0;
};

/// Wraps a plain function as a ScoreModel; test oracles use this.
class FunctionScoreModel : public ScoreModel {
 public:
  using Fn = std::function<TwoChannelImage(const TwoChannelImage&, int, const ConditioningVector&)>;
  explicit FunctionScoreModel(Fn fn) : fn_(std::move(fn)) {}
  TwoChannelImage predict(const TwoChannelImage& x_t, int t,
                          const ConditioningVector& c) const override {
    return fn_(x_t, t, c);
  }

 private:
  Fn fn_;
};

/// Small conditional U-Net: three resolution levels, sinusoidal step
/// embedding, conditioning injected at every level by feature-wise affine
/// modulation.
class CondUnet : public ScoreModel {
 public:
  struct ResBlock {
    nn::Conv2d conv1, conv2;
    nn::GroupNorm gn1, gn2;
    nn::Linear film;  // ctx -> (scale, shift), zero-initialized
    bool has_skip = false;
    nn::Conv2d skip;
  };

  struct ResBlockCache {
    nn::Tensor x, h1, g1, f, a1, h2, g2;
    nn::GroupNorm::Cache gn1c, gn2c;
    std::vector<double> scale_shift;
  };

  struct Cache {
    std::vector<double> temb_raw, te_pre, te_act, te;
    std::vector<double> cond_in, ce_pre, ce_act, ce;
    std::vector<double> ctx;
    nn::Tensor x_in, stem_out;
    ResBlockCache enc1, enc2, mid, dec2, dec1;
    nn::Tensor e1, d1, e2, d2, m, m_up, u1, cat2, o2, o2_up, u2, cat1, o1;
  };

  CondUnet() = default;
  CondUnet(int base_channels, std::uint64_t init_seed);

  TwoChannelImage predict(const TwoChannelImage& x_t, int t,
                          const ConditioningVector& c) const override;

  nn::Tensor forward(const nn::Tensor& x, int t, const ConditioningVector& c,
                     Cache* cache) const;
  /// Accumulates parameter gradients; returns d(loss)/d(input).
  nn::Tensor backward(const Cache& cache, const nn::Tensor& gout);

  std::vector<nn::ParamRef> params();
  void zero_grads();
  size_t num_parameters() const;

  int base_channels() const { return base_; }
  static constexpr int kTembRawDim = 32;
  static constexpr int kCtxDim = 128;  // 64 step embedding + 64 condition embedding

 private:
  int base_ = 0;
  nn::Conv2d stem_, down1_, down2_, up1_, up2_, out_;
  ResBlock enc1_, enc2_, mid_, dec2_, dec1_;
  nn::Linear temb_l1_, temb_l2_, cond_l1_, cond_l2_;
  const std::vector<double>* ctx_input_ = nullptr;  // set for the duration of backward()

  nn::Tensor resblock_forward(const ResBlock& rb, const nn::Tensor& x,
                              const std::vector<double>& ctx, ResBlockCache* cache) const;
  nn::Tensor resblock_backward(ResBlock& rb, const ResBlockCache& cache, const nn::Tensor& gout,
                               std::vector<double>& gctx);
  static std::vector<nn::ParamRef> resblock_params(ResBlock& rb, const char* name);
};

struct Checkpoint {
  DiffusionSchedule schedule;
  std::shared_ptr<CondUnet> model;
};

void save_checkpoint(const CondUnet& net, const DiffusionSchedule& sched,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ctxmri
