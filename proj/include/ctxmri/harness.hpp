#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ctxmri/masks.hpp"
#include "ctxmri/metadata.hpp"
#include "ctxmri/metrics.hpp"

namespace ctxmri {

enum class MetadataMode {
  Full,
  NoMRParams,
  NoContrast,
  NoSlice,
  Unconditional,
  WrongPathology,
  CorrectPathologyOnly,
};

enum class MapsSource { GroundTruth, EspiritFromAcs };

std::string metadata_mode_name(MetadataMode m);
MetadataMode metadata_mode_from(const std::string& s);
std::string maps_source_name(MapsSource m);
MapsSource maps_source_from(const std::string& s);

struct MaskSpec {
  MaskKind kind = MaskKind::Uniform1D;
  double accel = 4.0;
  double acs_fraction = 0.08;  // Uniform1D only

  std::string label() const;
};

struct ExperimentConfig {
  std::filesystem::path dataset_manifest;
  std::filesystem::path checkpoint;
  std::vector<MaskSpec> masks = {MaskSpec{}};
  std::vector<double> gammas = {0.0, 1.0, 2.0};
  MetadataMode metadata_mode = MetadataMode::Full;
  MapsSource maps_source = MapsSource::GroundTruth;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;

  // solver knobs
  int num_steps = 50;
  int cg_steps = 5;
  double xi = 5.0;
  double eta = 0.8;

  int max_records = 0;  // 0 = every manifest record
  int max_cells = 0;    // 0 = no limit; used to exercise interruption
};

ExperimentConfig load_experiment_config(const std::filesystem::path& json_path);

struct CellResult {
  int record = 0;
  int mask_index = 0;
  std::string mask_label;
  double gamma = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct SweepResult {
  std::vector<CellResult> cells;
  bool complete = false;
  std::filesystem::path output_dir;
};

/// Applies the metadata ablation/corruption for a sweep mode.
ScanMetadata apply_metadata_mode(const ScanMetadata& md, MetadataMode mode,
                                 std::uint64_t wrong_path_seed);

/// Runs record x mask x gamma cells in a worker pool (capped by
/// CONTEXTRECON_THREADS), persisting one JSON file per cell keyed by the
/// cell's content hash; completed cells are skipped on resume. Emits
/// results.csv and summary.json when every cell is present.
SweepResult run_sweep(const ExperimentConfig& cfg);

/// gamma rows x (mask, metric) columns, cells "mu ± sigma", strictly best
/// mean per column flagged (ties flag all).
void emit_table(const SweepResult& result, const std::filesystem::path& path);

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (gamma, mean psnr)
  bool dashed_baseline = false;                   // rendered as a horizontal dashed line
};

/// Self-contained SVG; byte-identical for identical inputs.
void emit_plot(const std::vector<PlotSeries>& series, const std::filesystem::path& path);

std::vector<PlotSeries> plot_series_from(const SweepResult& result);

/// Aggregated mean/std per (mask, gamma).
std::vector<std::tuple<std::string, double, MetricSummary>> summarize(const SweepResult& result);

}  // namespace ctxmri
