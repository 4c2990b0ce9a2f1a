#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "ctxmri/diffusion.hpp"
#include "ctxmri/metadata.hpp"
#include "ctxmri/score_model.hpp"

namespace ctxmri {

struct TrainingConfig {
  int epochs = 10;
  int batch_size = 4;
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  double p_uncond = 0.1;
  double p_mrparams_drop = 0.5;
  int base_channels = 16;
  int schedule_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double eta = 0.8;
  std::filesystem::path checkpoint_path;  // saved after every epoch when set
  std::filesystem::path loss_csv_path;    // (epoch, step, loss) when set
  bool verbose = false;
};

struct TrainingExample {
  TwoChannelImage x0;
  ScanMetadata metadata;
};

struct LossRecord {
  int epoch = 0;
  int step = 0;
  double loss = 0.0;
};

struct TrainResult {
  std::shared_ptr<CondUnet> model;
  DiffusionSchedule schedule;
  std::vector<LossRecord> history;
  double initial_smoothed_loss = 0.0;
  double final_smoothed_loss = 0.0;
};

/// Decoupled weight decay Adam.
class AdamW {
 public:
  AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);
  void step(std::vector<nn::ParamRef>& params);

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Epsilon-matching training on in-memory examples.
TrainResult train(const std::vector<TrainingExample>& data, const TrainingConfig& cfg);

/// Loads the dataset behind a manifest and trains on it.
TrainResult train_from_manifest(const std::filesystem::path& manifest_path,
                                const TrainingConfig& cfg);

std::vector<TrainingExample> load_training_examples(const std::filesystem::path& manifest_path);

void write_loss_csv(const std::vector<LossRecord>& history, const std::filesystem::path& path);

}  // namespace ctxmri
