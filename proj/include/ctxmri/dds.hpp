#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "ctxmri/diffusion.hpp"
#include "ctxmri/forward_model.hpp"
#include "ctxmri/metadata.hpp"

namespace ctxmri {

struct SolverConfig {
  double xi = 5.0;      // data-consistency weight
  int cg_steps = 5;     // conjugate-gradient iterations per prox
  double gamma = 1.0;   // CFG scale
  double eta = 0.8;     // DDIM stochasticity (overrides the schedule's eta)
  int num_steps = 50;   // DDIM inference steps
  std::uint64_t seed = 0;
  bool clamp_x0 = true;
  std::filesystem::path trace_path;  // optional per-step CSV trace
};

struct ProxDiagnostics {
  bool breakdown = false;
  std::vector<double> objectives;  // prox objective after each CG iterate
};

/// Approximately solves (I + xi A^H A) x = x_hat + xi A^H y by cg_steps
/// conjugate-gradient iterations (real inner product over the complex
/// image space), initialized at x_hat. xi == 0 returns x_hat unchanged.
ComplexImage prox_data_consistency(const ComplexImage& x_hat, const MultiCoilKSpace& y,
                                   const ForwardModel& model, double xi, int cg_steps,
                                   ProxDiagnostics* diag = nullptr);

/// Prox objective (xi/2)||y - A x||^2 + (1/2)||x - x_hat||^2.
double prox_objective(const ComplexImage& x, const ComplexImage& x_hat,
                      const MultiCoilKSpace& y, const ForwardModel& model, double xi);

class ScoreModel;

/// DDS reconstruction: DDIM outer loop whose posterior-mean estimate is
/// refined by the conjugate-gradient prox each step. Empty metadata (or
/// gamma == 0) reconstructs unconditionally; xi == 0 degenerates to prior
/// DDIM sampling bit-for-bit.
ComplexImage dds_reconstruct(const MultiCoilKSpace& y, const ForwardModel& model,
                             const ScoreModel& prior, const DiffusionSchedule& sched,
                             const ScanMetadata& md, const SolverConfig& cfg);

}  // namespace ctxmri
