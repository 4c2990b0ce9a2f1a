#include "ctxmri/diffusion.hpp"

#include <cmath>

#include "ctxmri/error.hpp"
#include "ctxmri/metadata.hpp"
#include "ctxmri/rng.hpp"
#include "ctxmri/score_model.hpp"

namespace ctxmri {

double DiffusionSchedule::sigma(int t, int t_prev) const {
  const double ab_t = alpha_bar(t);
  const double ab_prev = alpha_bar(t_prev);
  const double step_alpha = ab_t / ab_prev;
  if (ab_t >= 1.0) return 0.0;
  const double s2 = (1.0 - step_alpha) * (1.0 - ab_prev) / (1.0 - ab_t);
  return eta * std::sqrt(std::max(0.0, s2));
}

DiffusionSchedule make_schedule(int num_steps, double beta_start, double beta_end, double eta) {
  if (num_steps < 2) throw ConfigError("schedule: need at least 2 steps");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
    throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1");
  if (eta < 0.0 || eta > 1.0) throw ConfigError("schedule: eta must be in [0, 1]");

  DiffusionSchedule s;
  s.num_steps = num_steps;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.eta = eta;
  s.betas.resize(num_steps);
  s.alphas.resize(num_steps);
  s.alpha_bars.resize(num_steps + 1);
  s.alpha_bars[0] = 1.0;
  for (int i = 0; i < num_steps; ++i) {
    const double frac = num_steps == 1 ? 0.0 : static_cast<double>(i) / (num_steps - 1);
    s.betas[i] = beta_start + (beta_end - beta_start) * frac;
    s.alphas[i] = 1.0 - s.betas[i];
    s.alpha_bars[i + 1] = s.alpha_bars[i] * s.alphas[i];
  }
  return s;
}

TwoChannelImage q_sample(const TwoChannelImage& x0, int t, const TwoChannelImage& noise,
                         const DiffusionSchedule& sched) {
  if (!x0.same_shape(noise)) throw ShapeError("q_sample: shape mismatch");
  if (t < 1 || t > sched.num_steps) throw InvalidInputError("q_sample: step out of range");
  const double ab = sched.alpha_bar(t);
  const double cs = std::sqrt(ab);
  const double cn = std::sqrt(1.0 - ab);
  TwoChannelImage out(x0.height, x0.width);
  for (size_t i = 0; i < x0.size(); ++i) {
    out.real_channel[i] = cs * x0.real_channel[i] + cn * noise.real_channel[i];
    out.imag_channel[i] = cs * x0.imag_channel[i] + cn * noise.imag_channel[i];
  }
  return out;
}

std::vector<int> ddim_step_sequence(int T, int num_inference_steps) {
  if (num_inference_steps < 1) throw ConfigError("ddim: need at least 1 inference step");
  const int k = std::min(num_inference_steps, T);
  std::vector<int> steps;
  steps.reserve(k);
  int prev = -1;
  for (int i = k; i >= 1; --i) {
    int t = static_cast<int>(std::lround(static_cast<double>(T) * i / k));
    t = std::max(1, std::min(T, t));
    if (t != prev) steps.push_back(t);
    prev = t;
  }
  return steps;  // descending, ends near 1
}

TwoChannelImage cfg_epsilon(const ScoreModel& model, const TwoChannelImage& x_t, int t,
                            const ConditioningVector& c, double gamma) {
  if (gamma < 0.0) throw InvalidInputError("cfg: gamma must be nonnegative");
  const ConditioningVector uncond{};
  if (c.is_unconditional() || gamma == 0.0) return model.predict(x_t, t, uncond);
  if (gamma == 1.0) return model.predict(x_t, t, c);
  TwoChannelImage eps_u = model.predict(x_t, t, uncond);
  TwoChannelImage eps_c = model.predict(x_t, t, c);
  TwoChannelImage out(x_t.height, x_t.width);
  for (size_t i = 0; i < out.size(); ++i) {
    out.real_channel[i] =
        eps_u.real_channel[i] + gamma * (eps_c.real_channel[i] - eps_u.real_channel[i]);
    out.imag_channel[i] =
        eps_u.imag_channel[i] + gamma * (eps_c.imag_channel[i] - eps_u.imag_channel[i]);
  }
  return out;
}

TwoChannelImage gaussian_2ch(int height, int width, Rng& rng) {
  TwoChannelImage out(height, width);
  for (size_t i = 0; i < out.size(); ++i) {
    out.real_channel[i] = rng.normal();
    out.imag_channel[i] = rng.normal();
  }
  return out;
}

ComplexImage ddim_sample(const ScoreModel& model, const DiffusionSchedule& sched,
                         const ConditioningVector& c, int height, int width,
                         const SampleConfig& cfg) {
  Rng rng(cfg.seed);
  TwoChannelImage x = gaussian_2ch(height, width, rng);
  const std::vector<int> steps = ddim_step_sequence(sched.num_steps, cfg.num_steps);
  for (size_t i = 0; i < steps.size(); ++i) {
    const int t = steps[i];
    const int t_prev = i + 1 < steps.size() ? steps[i + 1] : 0;
    const TwoChannelImage eps = cfg_epsilon(model, x, t, c, cfg.gamma);

    const double ab_t = sched.alpha_bar(t);
    const double ab_prev = sched.alpha_bar(t_prev);
    TwoChannelImage x0(height, width);
    const double inv = 1.0 / std::sqrt(ab_t);
    const double cn = std::sqrt(1.0 - ab_t);
    for (size_t j = 0; j < x.size(); ++j) {
      double re = inv * (x.real_channel[j] - cn * eps.real_channel[j]);
      double im = inv * (x.imag_channel[j] - cn * eps.imag_channel[j]);
      if (cfg.clamp_x0) {
        re = std::clamp(re, -3.0, 3.0);
        im = std::clamp(im, -3.0, 3.0);
      }
      x0.real_channel[j] = re;
      x0.imag_channel[j] = im;
    }

    const double sig = sched.sigma(t, t_prev);
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sig * sig));
    const double cs = std::sqrt(ab_prev);
    if (sig > 0.0) {
      const TwoChannelImage z = gaussian_2ch(height, width, rng);
      for (size_t j = 0; j < x.size(); ++j) {
        x.real_channel[j] = cs * x0.real_channel[j] + dir * eps.real_channel[j] +
                            sig * z.real_channel[j];
        x.imag_channel[j] = cs * x0.imag_channel[j] + dir * eps.imag_channel[j] +
                            sig * z.imag_channel[j];
      }
    } else {
      for (size_t j = 0; j < x.size(); ++j) {
        x.real_channel[j] = cs * x0.real_channel[j] + dir * eps.real_channel[j];
        x.imag_channel[j] = cs * x0.imag_channel[j] + dir * eps.imag_channel[j];
      }
    }
  }
  return unpack_channels(x);
}

}  // namespace ctxmri
