#pragma once

#include <cstdint>
#include <vector>

#include "ctxmri/image.hpp"

namespace ctxmri {

/// Discrete variance-preserving schedule with DDIM stochasticity. betas[i]
/// is the step t = i+1 coefficient; alpha_bar(0) == 1.
struct DiffusionSchedule {
  int num_steps = 0;  // T
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double eta = 0.8;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;  // length T+1, alpha_bars[t]

  double alpha_bar(int t) const { return alpha_bars[static_cast<size_t>(t)]; }

  /// DDIM sigma for a jump t -> t_prev:
  /// eta * sqrt((1 - abar_t/abar_prev) * (1 - abar_prev) / (1 - abar_t)).
  /// Reduces to eta*sqrt((1-alpha_t)(1-abar_{t-1})/(1-abar_t)) at stride 1.
  double sigma(int t, int t_prev) const;
};

DiffusionSchedule make_schedule(int num_steps, double beta_start, double beta_end, double eta);

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise.
TwoChannelImage q_sample(const TwoChannelImage& x0, int t, const TwoChannelImage& noise,
                         const DiffusionSchedule& sched);

/// Evenly strided descending step sequence for DDIM inference.
std::vector<int> ddim_step_sequence(int T, int num_inference_steps);

class ScoreModel;
class Rng;
struct ConditioningVector;

/// eps_u + gamma * (eps_c - eps_u), with the all-zeros condition as the
/// unconditional branch. gamma == 0 and gamma == 1 return the respective
/// single prediction exactly.
TwoChannelImage cfg_epsilon(const ScoreModel& model, const TwoChannelImage& x_t, int t,
                            const ConditioningVector& c, double gamma);

struct SampleConfig {
  double gamma = 1.0;
  int num_steps = 50;     // DDIM inference steps
  bool clamp_x0 = true;   // clamp the posterior-mean estimate to [-3, 3]
  std::uint64_t seed = 0;
};

/// Prior sampling: the DDS loop with the data-consistency step skipped.
ComplexImage ddim_sample(const ScoreModel& model, const DiffusionSchedule& sched,
                         const ConditioningVector& c, int height, int width,
                         const SampleConfig& cfg);

/// Seeded standard-normal 2-channel field; the shared draw order for
/// ddim_sample and the DDS solver.
TwoChannelImage gaussian_2ch(int height, int width, Rng& rng);

}  // namespace ctxmri
