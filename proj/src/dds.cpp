#include "ctxmri/dds.hpp"

#include <cassert>
#include <cmath>
#include <fstream>

#include "ctxmri/error.hpp"
#include "ctxmri/rng.hpp"
#include "ctxmri/score_model.hpp"

namespace ctxmri {

namespace {

double re_dot(const ComplexImage& a, const ComplexImage& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    s += a.data[i].real() * b.data[i].real() + a.data[i].imag() * b.data[i].imag();
  return s;
}

ComplexImage normal_op(const ForwardModel& model, const ComplexImage& v, double xi) {
  ComplexImage avv = adjoint(model, forward(model, v));
  ComplexImage out(v.height, v.width);
  for (size_t i = 0; i < v.data.size(); ++i) out.data[i] = v.data[i] + xi * avv.data[i];
  return out;
}

}  // namespace

double prox_objective(const ComplexImage& x, const ComplexImage& x_hat,
                      const MultiCoilKSpace& y, const ForwardModel& model, double xi) {
  const MultiCoilKSpace ax = forward(model, x);
  double data = 0.0;
  for (int c = 0; c < y.num_coils; ++c)
    for (size_t i = 0; i < ax.coil_data[c].data.size(); ++i)
      data += std::norm(y.coil_data[c].data[i] - ax.coil_data[c].data[i]);
  double prior = 0.0;
  for (size_t i = 0; i < x.data.size(); ++i) prior += std::norm(x.data[i] - x_hat.data[i]);
  return 0.5 * xi * data + 0.5 * prior;
}

ComplexImage prox_data_consistency(const ComplexImage& x_hat, const MultiCoilKSpace& y,
                                   const ForwardModel& model, double xi, int cg_steps,
                                   ProxDiagnostics* diag) {
  if (xi < 0.0) throw ConfigError("prox: xi must be nonnegative");
  if (xi == 0.0) {
    if (diag) diag->objectives.push_back(prox_objective(x_hat, x_hat, y, model, xi));
    return x_hat;
  }
  if (x_hat.height != model.height() || x_hat.width != model.width())
    throw ShapeError("prox: image shape mismatch");

  const ComplexImage adj_y = adjoint(model, y);
  ComplexImage b(x_hat.height, x_hat.width);
  for (size_t i = 0; i < b.data.size(); ++i) b.data[i] = x_hat.data[i] + xi * adj_y.data[i];

  ComplexImage x = x_hat;
  ComplexImage r = b - normal_op(model, x, xi);
  ComplexImage p = r;
  double rs_old = re_dot(r, r);
  const double rs0 = rs_old;

  if (diag) {
    diag->breakdown = false;
    diag->objectives.clear();
    diag->objectives.push_back(prox_objective(x, x_hat, y, model, xi));
  }

  for (int it = 0; it < cg_steps; ++it) {
    if (rs_old <= 1e-30 * std::max(1.0, rs0)) break;
    const ComplexImage ap = normal_op(model, p, xi);
    const double p_ap = re_dot(p, ap);
    if (!(p_ap > 0.0)) {
      // zero/negative curvature cannot happen for I + xi A^H A unless
      // numerics degenerate; return the current iterate
      if (diag) diag->breakdown = true;
      break;
    }
    const double alpha = rs_old / p_ap;
    for (size_t i = 0; i < x.data.size(); ++i) {
      x.data[i] += alpha * p.data[i];
      r.data[i] -= alpha * ap.data[i];
    }
    const double rs_new = re_dot(r, r);
    const double beta = rs_new / rs_old;
    for (size_t i = 0; i < p.data.size(); ++i) p.data[i] = r.data[i] + beta * p.data[i];
    rs_old = rs_new;
    if (diag) diag->objectives.push_back(prox_objective(x, x_hat, y, model, xi));
  }

#ifndef NDEBUG
  if (diag)
    for (size_t i = 1; i < diag->objectives.size(); ++i)
      assert(diag->objectives[i] <=
             diag->objectives[i - 1] + 1e-9 * (1.0 + std::abs(diag->objectives[i - 1])));
#endif
  return x;
}

ComplexImage dds_reconstruct(const MultiCoilKSpace& y, const ForwardModel& model,
                             const ScoreModel& prior, const DiffusionSchedule& sched,
                             const ScanMetadata& md, const SolverConfig& cfg) {
  validate(model);
  if (y.height != model.height() || y.width != model.width())
    throw ShapeError("dds: measurement shape mismatch");

  DiffusionSchedule s = sched;
  s.eta = cfg.eta;

  const ConditioningVector c = featurize(md);
  const int height = y.height, width = y.width;

  std::ofstream trace;
  if (!cfg.trace_path.empty()) {
    trace.open(cfg.trace_path);
    trace << "t,residual,x0_norm\n";
  }
  const double y_norm = [&] {
    double acc = 0.0;
    for (const ComplexImage& coil : y.coil_data) acc += norm2(coil) * norm2(coil);
    return std::sqrt(acc);
  }();

  Rng rng(cfg.seed);
  TwoChannelImage x = gaussian_2ch(height, width, rng);
  const std::vector<int> steps = ddim_step_sequence(s.num_steps, cfg.num_steps);

  for (size_t i = 0; i < steps.size(); ++i) {
    const int t = steps[i];
    const int t_prev = i + 1 < steps.size() ? steps[i + 1] : 0;
    const TwoChannelImage eps = cfg_epsilon(prior, x, t, c, cfg.gamma);

    const double ab_t = s.alpha_bar(t);
    const double ab_prev = s.alpha_bar(t_prev);
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

    const ComplexImage x0_prox = prox_data_consistency(unpack_channels(x0), y, model, cfg.xi,
                                                       cfg.cg_steps, nullptr);
    const TwoChannelImage x0p = pack_channels(x0_prox);

    const double sig = s.sigma(t, t_prev);
    if (ab_prev + sig * sig > 1.0 + 1e-12)
      throw NumericalError("dds: schedule inconsistency, alpha_bar + sigma^2 > 1");
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sig * sig));
    const double cs = std::sqrt(ab_prev);
    if (sig > 0.0) {
      const TwoChannelImage z = gaussian_2ch(height, width, rng);
      for (size_t j = 0; j < x.size(); ++j) {
        x.real_channel[j] = cs * x0p.real_channel[j] + dir * eps.real_channel[j] +
                            sig * z.real_channel[j];
        x.imag_channel[j] = cs * x0p.imag_channel[j] + dir * eps.imag_channel[j] +
                            sig * z.imag_channel[j];
      }
    } else {
      for (size_t j = 0; j < x.size(); ++j) {
        x.real_channel[j] = cs * x0p.real_channel[j] + dir * eps.real_channel[j];
        x.imag_channel[j] = cs * x0p.imag_channel[j] + dir * eps.imag_channel[j];
      }
    }

    if (trace.is_open()) {
      const MultiCoilKSpace ax = forward(model, x0_prox);
      double resid = 0.0;
      for (int ci = 0; ci < y.num_coils; ++ci)
        for (size_t j = 0; j < ax.coil_data[ci].data.size(); ++j)
          resid += std::norm(y.coil_data[ci].data[j] - ax.coil_data[ci].data[j]);
      trace << t << "," << std::sqrt(resid) / std::max(y_norm, 1e-300) << ","
            << norm2(x0_prox) << "\n";
    }
  }
  return unpack_channels(x);
}

}  // namespace ctxmri
