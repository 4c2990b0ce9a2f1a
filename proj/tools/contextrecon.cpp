// Command-line front end: dataset generation, training, single-case
// reconstruction, experiment sweeps and report emission.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "ctxmri/dds.hpp"
#include "ctxmri/error.hpp"
#include "ctxmri/espirit.hpp"
#include "ctxmri/harness.hpp"
#include "ctxmri/metrics.hpp"
#include "ctxmri/phantom.hpp"
#include "ctxmri/rng.hpp"
#include "ctxmri/score_model.hpp"
#include "ctxmri/signal.hpp"
#include "ctxmri/training.hpp"

using namespace ctxmri;
using json = nlohmann::json;

namespace {

MaskSpec parse_mask_spec(const std::string& s) {
  // "uniform1d:4:0.08" or "poisson2d:8"
  MaskSpec spec;
  std::vector<std::string> parts;
  size_t pos = 0;
  while (pos <= s.size()) {
    const size_t next = s.find(':', pos);
    if (next == std::string::npos) {
      parts.push_back(s.substr(pos));
      break;
    }
    parts.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
  if (parts.empty()) throw ConfigError("empty mask spec");
  if (parts[0] == "uniform1d")
    spec.kind = MaskKind::Uniform1D;
  else if (parts[0] == "poisson2d")
    spec.kind = MaskKind::Poisson2D;
  else
    throw ConfigError("unknown mask kind: '" + parts[0] + "'");
  if (parts.size() > 1) spec.accel = std::stod(parts[1]);
  spec.acs_fraction = parts.size() > 2 ? std::stod(parts[2]) : 0.0;
  return spec;
}

int cmd_gen_data(const std::string& out_dir, int n, std::uint64_t seed, int grid, int coils,
                 int extra) {
  DatasetOptions opts;
  opts.height = grid;
  opts.width = grid;
  opts.num_coils = coils;
  opts.num_extra_ellipses = extra;
  auto records = generate_dataset(n, seed, opts);
  write_dataset(records, out_dir);
  std::printf("wrote %d records to %s\n", n, out_dir.c_str());
  return 0;
}

int cmd_train(const std::string& manifest, const std::string& out, const TrainingConfig& cfg_in) {
  TrainingConfig cfg = cfg_in;
  cfg.checkpoint_path = out;
  TrainResult res = train_from_manifest(manifest, cfg);
  save_checkpoint(*res.model, res.schedule, out);
  std::printf("trained %zu steps; smoothed loss %.5f -> %.5f; checkpoint: %s\n",
              res.history.size(), res.initial_smoothed_loss, res.final_smoothed_loss,
              out.c_str());
  return 0;
}

struct ReconArgs {
  std::string checkpoint, image, maps, prompt, out_dir, mask_kind = "uniform1d", trace;
  double accel = 4.0, acs = 0.08, gamma = 1.0, xi = 5.0, eta = 0.8, noise_sigma = 0.0;
  int cg_steps = 5, steps = 50;
  std::uint64_t seed = 0;
  bool espirit_maps = false;
};

int cmd_reconstruct(const ReconArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const ComplexImage gt = load_cmri(a.image);
  SensitivityMaps maps = load_maps(a.maps);

  SamplingMask mask = a.mask_kind == "uniform1d"
                          ? make_uniform1d(gt.height, gt.width,
                                           static_cast<int>(std::lround(a.accel)), a.acs, a.seed)
                          : make_poisson2d(gt.height, gt.width, a.accel, a.seed);

  ForwardModel physics{maps, mask, a.noise_sigma};
  const MultiCoilKSpace y = measure(physics, gt, seed_combine(a.seed, 0x4015Eull));

  ForwardModel recon_model = physics;
  if (a.espirit_maps) recon_model.maps = estimate_maps(y, CalibrationConfig{});

  ScanMetadata md = parse_prompt(a.prompt);
  SolverConfig solver;
  solver.xi = a.xi;
  solver.cg_steps = a.cg_steps;
  solver.gamma = a.gamma;
  solver.eta = a.eta;
  solver.num_steps = a.steps;
  solver.seed = a.seed;
  if (!a.trace.empty()) solver.trace_path = a.trace;

  const ComplexImage recon = dds_reconstruct(y, recon_model, *ckpt.model, ckpt.schedule, md, solver);

  std::filesystem::create_directories(a.out_dir);
  save_cmri(recon, std::filesystem::path(a.out_dir) / "recon.cmri");

  const auto ref_mag = magnitude(gt);
  const auto test_mag = magnitude(recon);
  const double range = *std::max_element(ref_mag.begin(), ref_mag.end());
  json metrics = {{"psnr", psnr(ref_mag, test_mag, gt.height, gt.width, range)},
                  {"ssim", ssim(ref_mag, test_mag, gt.height, gt.width, range)},
                  {"gamma", a.gamma},
                  {"mask", a.mask_kind},
                  {"accel", a.accel}};
  std::ofstream os(std::filesystem::path(a.out_dir) / "metrics.json");
  os << metrics.dump(2) << "\n";
  std::printf("PSNR %.2f dB  SSIM %.4f  -> %s\n", metrics["psnr"].get<double>(),
              metrics["ssim"].get<double>(), a.out_dir.c_str());
  return 0;
}

SweepResult read_results_csv(const std::filesystem::path& dir) {
  std::ifstream is(dir / "results.csv");
  if (!is) throw ConfigError("no results.csv in " + dir.string());
  SweepResult res;
  res.complete = true;
  res.output_dir = dir;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    CellResult c;
    char mask_buf[128];
    if (std::sscanf(line.c_str(), "%d,%127[^,],%lf,%lf,%lf", &c.record, mask_buf, &c.gamma,
                    &c.psnr, &c.ssim) != 5)
      throw ParseError("bad results.csv line: " + line);
    c.mask_label = mask_buf;
    res.cells.push_back(c);
  }
  return res;
}

int cmd_report(const std::vector<std::string>& results_dirs, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::filesystem::create_directories(std::filesystem::path(out_dir) / "plots");
  std::vector<PlotSeries> all_series;
  for (const std::string& dir : results_dirs) {
    const SweepResult res = read_results_csv(dir);
    const std::string stem = std::filesystem::path(dir).filename().string();
    emit_table(res, std::filesystem::path(out_dir) / (stem + "_table.txt"));
    for (PlotSeries s : plot_series_from(res)) {
      s.label = stem + " " + s.label;
      all_series.push_back(std::move(s));
    }
  }
  emit_plot(all_series, std::filesystem::path(out_dir) / "plots" / "psnr_vs_cfg.svg");
  std::printf("report written to %s\n", out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metadata-conditioned diffusion CS-MRI reconstruction"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic phantom dataset");
  std::string gen_out = "dataset";
  int gen_n = 100, gen_grid = 64, gen_coils = 4, gen_extra = 4;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--n", gen_n, "number of records");
  gen->add_option("--seed", gen_seed, "dataset seed");
  gen->add_option("--grid", gen_grid, "grid size (height = width)");
  gen->add_option("--coils", gen_coils, "simulated coil count");
  gen->add_option("--extra-ellipses", gen_extra, "extra texture structures per phantom");

  // train
  auto* tr = app.add_subcommand("train", "train the conditional diffusion prior");
  std::string tr_manifest, tr_out = "checkpoint.ckpt", tr_loss_csv;
  TrainingConfig tr_cfg;
  tr->add_option("--manifest", tr_manifest, "dataset manifest")->required();
  tr->add_option("--out", tr_out, "checkpoint path");
  tr->add_option("--epochs", tr_cfg.epochs, "training epochs");
  tr->add_option("--batch", tr_cfg.batch_size, "batch size");
  tr->add_option("--lr", tr_cfg.learning_rate, "learning rate");
  tr->add_option("--weight-decay", tr_cfg.weight_decay, "decoupled weight decay");
  tr->add_option("--seed", tr_cfg.seed, "training seed");
  tr->add_option("--base-channels", tr_cfg.base_channels, "U-Net base width");
  tr->add_option("--steps-T", tr_cfg.schedule_steps, "diffusion steps T");
  tr->add_option("--p-uncond", tr_cfg.p_uncond, "full metadata dropout probability");
  tr->add_option("--p-mrparams", tr_cfg.p_mrparams_drop, "MR-parameter dropout probability");
  tr->add_option("--loss-csv", tr_loss_csv, "loss history CSV path");
  tr->add_flag("--verbose", tr_cfg.verbose, "per-epoch loss to stderr");

  // reconstruct
  auto* rc = app.add_subcommand("reconstruct", "reconstruct a single case");
  ReconArgs ra;
  rc->add_option("--checkpoint", ra.checkpoint)->required();
  rc->add_option("--image", ra.image, "ground-truth image (CMRI)")->required();
  rc->add_option("--maps", ra.maps, "sensitivity maps file")->required();
  rc->add_option("--prompt", ra.prompt, "metadata prompt string");
  rc->add_option("--mask-kind", ra.mask_kind, "uniform1d|poisson2d");
  rc->add_option("--accel", ra.accel);
  rc->add_option("--acs", ra.acs, "ACS fraction (uniform1d)");
  rc->add_option("--gamma", ra.gamma, "CFG scale");
  rc->add_option("--xi", ra.xi, "data-consistency weight");
  rc->add_option("--cg-steps", ra.cg_steps);
  rc->add_option("--eta", ra.eta, "DDIM stochasticity");
  rc->add_option("--steps", ra.steps, "DDIM inference steps");
  rc->add_option("--noise-sigma", ra.noise_sigma);
  rc->add_option("--seed", ra.seed);
  rc->add_option("--out", ra.out_dir, "output directory")->required();
  rc->add_option("--trace", ra.trace, "per-step trace CSV");
  rc->add_flag("--espirit-maps", ra.espirit_maps, "estimate maps from the measured ACS");

  // sweep
  auto* sw = app.add_subcommand("sweep", "run a reconstruction experiment grid");
  std::string sw_config, sw_dataset, sw_checkpoint, sw_out, sw_mode, sw_maps_source;
  std::vector<std::string> sw_masks;
  std::vector<double> sw_gammas;
  double sw_noise = -1.0;
  std::int64_t sw_seed = -1;
  int sw_steps = 0, sw_max_records = 0, sw_max_cells = 0;
  sw->add_option("--config", sw_config, "JSON config (flags override)");
  sw->add_option("--dataset", sw_dataset, "dataset manifest");
  sw->add_option("--checkpoint", sw_checkpoint);
  sw->add_option("--out", sw_out, "output directory");
  sw->add_option("--mask", sw_masks, "mask spec kind:accel[:acs], repeatable");
  sw->add_option("--gamma", sw_gammas, "CFG scales, repeatable");
  sw->add_option("--metadata-mode", sw_mode,
                 "Full|NoMRParams|NoContrast|NoSlice|Unconditional|WrongPathology|"
                 "CorrectPathologyOnly");
  sw->add_option("--maps-source", sw_maps_source, "GroundTruth|ESPIRiT-from-ACS");
  sw->add_option("--noise-sigma", sw_noise);
  sw->add_option("--seed", sw_seed);
  sw->add_option("--steps", sw_steps, "DDIM inference steps");
  sw->add_option("--max-records", sw_max_records);
  sw->add_option("--max-cells", sw_max_cells, "stop after this many new cells");

  // report
  auto* rp = app.add_subcommand("report", "emit tables and plots from sweep results");
  std::vector<std::string> rp_results;
  std::string rp_out = "report";
  rp->add_option("--results", rp_results, "sweep output directories")->required();
  rp->add_option("--out", rp_out, "report output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_out, gen_n, gen_seed, gen_grid, gen_coils, gen_extra);
    if (tr->parsed()) {
      if (!tr_loss_csv.empty()) tr_cfg.loss_csv_path = tr_loss_csv;
      return cmd_train(tr_manifest, tr_out, tr_cfg);
    }
    if (rc->parsed()) return cmd_reconstruct(ra);
    if (sw->parsed()) {
      ExperimentConfig cfg;
      if (!sw_config.empty()) cfg = load_experiment_config(sw_config);
      if (!sw_dataset.empty()) cfg.dataset_manifest = sw_dataset;
      if (!sw_checkpoint.empty()) cfg.checkpoint = sw_checkpoint;
      if (!sw_out.empty()) cfg.output_dir = sw_out;
      if (!sw_masks.empty()) {
        cfg.masks.clear();
        for (const std::string& m : sw_masks) cfg.masks.push_back(parse_mask_spec(m));
      }
      if (!sw_gammas.empty()) cfg.gammas = sw_gammas;
      if (!sw_mode.empty()) cfg.metadata_mode = metadata_mode_from(sw_mode);
      if (!sw_maps_source.empty()) cfg.maps_source = maps_source_from(sw_maps_source);
      if (sw_noise >= 0.0) cfg.noise_sigma = sw_noise;
      if (sw_seed >= 0) cfg.seed = static_cast<std::uint64_t>(sw_seed);
      if (sw_steps > 0) cfg.num_steps = sw_steps;
      if (sw_max_records > 0) cfg.max_records = sw_max_records;
      if (sw_max_cells > 0) cfg.max_cells = sw_max_cells;
      const SweepResult res = run_sweep(cfg);
      std::printf("%zu cells done (%s)\n", res.cells.size(),
                  res.complete ? "complete" : "partial");
      return 0;
    }
    if (rp->parsed()) return cmd_report(rp_results, rp_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
