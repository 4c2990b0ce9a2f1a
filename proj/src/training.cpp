#include "ctxmri/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ctxmri/error.hpp"
#include "ctxmri/phantom.hpp"
#include "ctxmri/rng.hpp"

namespace ctxmri {

AdamW::AdamW(double lr, double weight_decay, double beta1, double beta2, double eps)
    : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(std::vector<nn::ParamRef>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].values->size(), 0.0);
      v_[i].assign(params[i].values->size(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    std::vector<double>& w = *params[i].values;
    const std::vector<double>& g = *params[i].grads;
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * w[j]);
    }
  }
}

std::vector<TrainingExample> load_training_examples(const std::filesystem::path& manifest_path) {
  std::vector<TrainingExample> out;
  for (const ManifestEntry& e : read_manifest(manifest_path)) {
    TrainingExample ex;
    ex.x0 = pack_channels(load_cmri(e.image_path));
    ex.metadata = parse_prompt(e.prompt);
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

double smoothed_mean(const std::vector<LossRecord>& hist, size_t begin, size_t count) {
  double s = 0.0;
  for (size_t i = begin; i < begin + count; ++i) s += hist[i].loss;
  return s / static_cast<double>(count);
}

}  // namespace

TrainResult train(const std::vector<TrainingExample>& data, const TrainingConfig& cfg) {
  if (data.empty()) throw ConfigError("train: dataset is empty");
  if (cfg.batch_size < 1 || cfg.epochs < 1) throw ConfigError("train: bad epochs/batch");

  const int h = data[0].x0.height, w = data[0].x0.width;
  for (const TrainingExample& ex : data)
    if (ex.x0.height != h || ex.x0.width != w)
      throw ShapeError("train: examples disagree on grid size");

  TrainResult result;
  result.schedule = make_schedule(cfg.schedule_steps, cfg.beta_start, cfg.beta_end, cfg.eta);
  result.model = std::make_shared<CondUnet>(cfg.base_channels, seed_combine(cfg.seed, 0xC0DE));
  CondUnet& net = *result.model;

  AdamW opt(cfg.learning_rate, cfg.weight_decay);
  auto params = net.params();
  Rng rng(seed_combine(cfg.seed, 0x7EA1));

  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  const size_t n_elems = static_cast<size_t>(2) * h * w;
  int global_step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates shuffle from the run RNG
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = rng.uniform_int(i);
      std::swap(order[i - 1], order[j]);
    }
    for (size_t start = 0; start + cfg.batch_size <= order.size();
         start += cfg.batch_size) {
      net.zero_grads();
      double batch_loss = 0.0;
      for (int bi = 0; bi < cfg.batch_size; ++bi) {
        const TrainingExample& ex = data[order[start + bi]];
        const int t = 1 + static_cast<int>(rng.uniform_int(cfg.schedule_steps));
        TwoChannelImage noise = gaussian_2ch(h, w, rng);
        TwoChannelImage x_t = q_sample(ex.x0, t, noise, result.schedule);
        const ScanMetadata md_cond = dropout_for_training(
            ex.metadata, rng.next_u64(), cfg.p_mrparams_drop, cfg.p_uncond);
        const ConditioningVector c = featurize(md_cond);

        nn::Tensor x(2, h, w);
        std::copy(x_t.real_channel.begin(), x_t.real_channel.end(), x.plane(0));
        std::copy(x_t.imag_channel.begin(), x_t.imag_channel.end(), x.plane(1));

        CondUnet::Cache cache;
        nn::Tensor out = net.forward(x, t, c, &cache);

        double loss = 0.0;
        nn::Tensor gout(2, h, w);
        const double gscale = 2.0 / (static_cast<double>(n_elems) * cfg.batch_size);
        for (size_t j = 0; j < n_elems; ++j) {
          const double target = j < out.size() / 2
                                    ? noise.real_channel[j]
                                    : noise.imag_channel[j - out.size() / 2];
          const double diff = out.v[j] - target;
          loss += diff * diff;
          gout.v[j] = gscale * diff;
        }
        loss /= static_cast<double>(n_elems);
        batch_loss += loss;
        net.backward(cache, gout);
      }
      batch_loss /= cfg.batch_size;
      if (!std::isfinite(batch_loss))
        throw TrainingDivergedError(
            "train: non-finite loss at epoch " + std::to_string(epoch) +
            (cfg.checkpoint_path.empty()
                 ? std::string("")
                 : "; last good checkpoint: " + cfg.checkpoint_path.string()));
      opt.step(params);
      result.history.push_back({epoch, global_step, batch_loss});
      ++global_step;
    }
    if (!cfg.checkpoint_path.empty())
      save_checkpoint(net, result.schedule, cfg.checkpoint_path);
    if (cfg.verbose) {
      const size_t per_epoch = result.history.size() / (epoch + 1);
      const double ep_loss =
          smoothed_mean(result.history, result.history.size() - per_epoch, per_epoch);
      std::fprintf(stderr, "epoch %d  mean loss %.5f\n", epoch, ep_loss);
    }
  }

  const size_t window =
      std::max<size_t>(1, std::min<size_t>(result.history.size() / 4, 25));
  result.initial_smoothed_loss = smoothed_mean(result.history, 0, window);
  result.final_smoothed_loss =
      smoothed_mean(result.history, result.history.size() - window, window);

  if (!cfg.loss_csv_path.empty()) write_loss_csv(result.history, cfg.loss_csv_path);
  return result;
}

TrainResult train_from_manifest(const std::filesystem::path& manifest_path,
                                const TrainingConfig& cfg) {
  return train(load_training_examples(manifest_path), cfg);
}

void write_loss_csv(const std::vector<LossRecord>& history, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write loss history: " + path.string());
  os << "epoch,step,loss\n";
  char buf[64];
  for (const LossRecord& r : history) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.10g\n", r.epoch, r.step, r.loss);
    os << buf;
  }
}

}  // namespace ctxmri
