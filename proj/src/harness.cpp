#include "ctxmri/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <tuple>

#include <nlohmann/json.hpp>

#include "ctxmri/dds.hpp"
#include "ctxmri/error.hpp"
#include "ctxmri/espirit.hpp"
#include "ctxmri/parallel.hpp"
#include "ctxmri/phantom.hpp"
#include "ctxmri/rng.hpp"
#include "ctxmri/score_model.hpp"
#include "ctxmri/signal.hpp"

namespace ctxmri {

using json = nlohmann::json;

std::string metadata_mode_name(MetadataMode m) {
  switch (m) {
    case MetadataMode::Full: return "Full";
    case MetadataMode::NoMRParams: return "NoMRParams";
    case MetadataMode::NoContrast: return "NoContrast";
    case MetadataMode::NoSlice: return "NoSlice";
    case MetadataMode::Unconditional: return "Unconditional";
    case MetadataMode::WrongPathology: return "WrongPathology";
    case MetadataMode::CorrectPathologyOnly: return "CorrectPathologyOnly";
  }
  return "?";
}

MetadataMode metadata_mode_from(const std::string& s) {
  for (MetadataMode m : {MetadataMode::Full, MetadataMode::NoMRParams, MetadataMode::NoContrast,
                         MetadataMode::NoSlice, MetadataMode::Unconditional,
                         MetadataMode::WrongPathology, MetadataMode::CorrectPathologyOnly})
    if (metadata_mode_name(m) == s) return m;
  throw ConfigError("unknown metadata mode: '" + s + "'");
}

std::string maps_source_name(MapsSource m) {
  return m == MapsSource::GroundTruth ? "GroundTruth" : "ESPIRiT-from-ACS";
}

MapsSource maps_source_from(const std::string& s) {
  if (s == "GroundTruth") return MapsSource::GroundTruth;
  if (s == "ESPIRiT-from-ACS" || s == "Espirit" || s == "ESPIRiT") return MapsSource::EspiritFromAcs;
  throw ConfigError("unknown maps source: '" + s + "'");
}

std::string MaskSpec::label() const {
  char buf[64];
  if (kind == MaskKind::Uniform1D)
    std::snprintf(buf, sizeof(buf), "uniform1d_x%g_acs%g", accel, acs_fraction);
  else
    std::snprintf(buf, sizeof(buf), "poisson2d_x%g", accel);
  return std::string(buf);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& json_path) {
  std::ifstream is(json_path);
  if (!is) throw ConfigError("cannot open config: " + json_path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  if (j.contains("dataset")) cfg.dataset_manifest = j["dataset"].get<std::string>();
  if (j.contains("checkpoint")) cfg.checkpoint = j["checkpoint"].get<std::string>();
  if (j.contains("masks")) {
    cfg.masks.clear();
    for (const auto& m : j["masks"]) {
      MaskSpec spec;
      const std::string kind = m.at("kind").get<std::string>();
      if (kind == "uniform1d")
        spec.kind = MaskKind::Uniform1D;
      else if (kind == "poisson2d")
        spec.kind = MaskKind::Poisson2D;
      else
        throw ConfigError("unknown mask kind: '" + kind + "'");
      spec.accel = m.at("accel").get<double>();
      spec.acs_fraction = m.value("acs", 0.0);
      cfg.masks.push_back(spec);
    }
  }
  if (j.contains("gammas")) cfg.gammas = j["gammas"].get<std::vector<double>>();
  if (j.contains("metadata_mode"))
    cfg.metadata_mode = metadata_mode_from(j["metadata_mode"].get<std::string>());
  if (j.contains("maps_source")) cfg.maps_source = maps_source_from(j["maps_source"].get<std::string>());
  if (j.contains("noise_sigma")) cfg.noise_sigma = j["noise_sigma"].get<double>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("num_steps")) cfg.num_steps = j["num_steps"].get<int>();
  if (j.contains("cg_steps")) cfg.cg_steps = j["cg_steps"].get<int>();
  if (j.contains("xi")) cfg.xi = j["xi"].get<double>();
  if (j.contains("eta")) cfg.eta = j["eta"].get<double>();
  if (j.contains("max_records")) cfg.max_records = j["max_records"].get<int>();
  if (j.contains("max_cells")) cfg.max_cells = j["max_cells"].get<int>();
  if (cfg.gammas.empty()) throw ConfigError("config: gammas must be nonempty");
  if (cfg.masks.empty()) throw ConfigError("config: at least one mask spec required");
  return cfg;
}

ScanMetadata apply_metadata_mode(const ScanMetadata& md, MetadataMode mode,
                                 std::uint64_t wrong_path_seed) {
  ScanMetadata out = md;
  switch (mode) {
    case MetadataMode::Full:
      break;
    case MetadataMode::NoSlice:
      out.slice_index.reset();
      [[fallthrough]];
    case MetadataMode::NoContrast:
      out.contrast.reset();
      [[fallthrough]];
    case MetadataMode::NoMRParams:
      out.tr_ms.reset();
      out.te_ms.reset();
      out.ti_ms.reset();
      out.flip_angle_deg.reset();
      break;
    case MetadataMode::Unconditional:
      out = ScanMetadata{};
      break;
    case MetadataMode::WrongPathology: {
      Rng rng(wrong_path_seed);
      const auto& vocab = pathology_vocabulary();
      for (std::string& label : out.pathologies) {
        const int cur = pathology_index(label);
        int pick = static_cast<int>(rng.uniform_int(vocab.size() - 1));
        if (pick >= cur) ++pick;  // uniform over the other labels
        label = vocab[pick];
      }
      break;
    }
    case MetadataMode::CorrectPathologyOnly: {
      ScanMetadata only;
      only.pathologies = md.pathologies;
      out = only;
      break;
    }
  }
  return out;
}

namespace {

struct SweepRecord {
  ComplexImage image;
  SensitivityMaps maps;
  ScanMetadata metadata;
};

/// hash(global_seed, record_id, mask_id, gamma): seeds the measurement and
/// the solver. Deliberately independent of the metadata mode so that the
/// Unconditional mode reproduces gamma = 0 Full cells bit-for-bit.
std::uint64_t cell_seed(const ExperimentConfig& cfg, int record, int mask_idx, double gamma) {
  std::uint64_t h = splitmix64(cfg.seed);
  h = seed_combine(h, static_cast<std::uint64_t>(record));
  h = seed_combine(h, static_cast<std::uint64_t>(mask_idx));
  std::uint64_t gbits;
  static_assert(sizeof(gbits) == sizeof(gamma));
  std::memcpy(&gbits, &gamma, sizeof(gbits));
  h = seed_combine(h, gbits);
  return h;
}

/// Content hash identifying a finished cell on disk; includes everything
/// that changes the cell's output.
std::uint64_t cell_key(const ExperimentConfig& cfg, std::uint64_t seed_hash) {
  std::uint64_t h = seed_hash;
  h = seed_combine(h, static_cast<std::uint64_t>(cfg.metadata_mode));
  h = seed_combine(h, static_cast<std::uint64_t>(cfg.maps_source));
  std::uint64_t nbits;
  std::memcpy(&nbits, &cfg.noise_sigma, sizeof(nbits));
  h = seed_combine(h, nbits);
  h = seed_combine(h, static_cast<std::uint64_t>(cfg.num_steps));
  h = seed_combine(h, static_cast<std::uint64_t>(cfg.cg_steps));
  std::uint64_t xbits;
  std::memcpy(&xbits, &cfg.xi, sizeof(xbits));
  h = seed_combine(h, xbits);
  return h;
}

std::filesystem::path cell_path(const std::filesystem::path& dir, std::uint64_t hash) {
  char name[32];
  std::snprintf(name, sizeof(name), "cell_%016llx.json",
                static_cast<unsigned long long>(hash));
  return dir / name;
}

void write_cell_atomic(const std::filesystem::path& path, const json& j) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp);
    os << j.dump(2) << "\n";
    if (!os) throw IoError("cell write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return std::string(buf);
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg) {
  if (!std::filesystem::exists(cfg.checkpoint))
    throw ConfigError("sweep: checkpoint not found: " + cfg.checkpoint.string());
  if (!std::filesystem::exists(cfg.dataset_manifest))
    throw ConfigError("sweep: manifest not found: " + cfg.dataset_manifest.string());
  if (cfg.gammas.empty()) throw ConfigError("sweep: gammas must be nonempty");
  if (cfg.masks.empty()) throw ConfigError("sweep: needs at least one mask");

  const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);

  // load records
  std::vector<SweepRecord> records;
  {
    const auto entries = read_manifest(cfg.dataset_manifest);
    const int limit = cfg.max_records > 0
                          ? std::min<int>(cfg.max_records, static_cast<int>(entries.size()))
                          : static_cast<int>(entries.size());
    records.resize(limit);
    for (int i = 0; i < limit; ++i) {
      records[i].image = load_cmri(entries[i].image_path);
      records[i].maps = load_maps(entries[i].maps_path);
      records[i].metadata = parse_prompt(entries[i].prompt);
    }
  }
  if (records.empty()) throw ConfigError("sweep: dataset is empty");

  // Unconditional mode collapses the gamma axis
  std::vector<double> gammas = cfg.gammas;
  if (cfg.metadata_mode == MetadataMode::Unconditional) gammas = {0.0};

  const std::filesystem::path cells_dir = cfg.output_dir / "cells";
  std::filesystem::create_directories(cells_dir);

  struct Cell {
    int record, mask_idx;
    double gamma;
    std::uint64_t seed_hash;
    std::uint64_t key;
  };
  std::vector<Cell> cells;
  for (int r = 0; r < static_cast<int>(records.size()); ++r)
    for (int m = 0; m < static_cast<int>(cfg.masks.size()); ++m)
      for (double g : gammas) {
        const std::uint64_t sh = cell_seed(cfg, r, m, g);
        cells.push_back({r, m, g, sh, cell_key(cfg, sh)});
      }

  // skip finished cells (resume), honor the interruption limit
  std::vector<Cell> todo;
  for (const Cell& c : cells)
    if (!std::filesystem::exists(cell_path(cells_dir, c.key))) todo.push_back(c);
  const bool interrupted = cfg.max_cells > 0 && static_cast<int>(todo.size()) > cfg.max_cells;
  if (interrupted) todo.resize(cfg.max_cells);

  const int grid_h = records[0].image.height, grid_w = records[0].image.width;
  const int nthreads = std::min(harness_thread_cap(), std::max(1, static_cast<int>(todo.size())));

  std::vector<std::string> errors(todo.size());
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
  for (long ci = 0; ci < static_cast<long>(todo.size()); ++ci) {
    const Cell& cell = todo[ci];
    try {
      const SweepRecord& rec = records[cell.record];
      const MaskSpec& mspec = cfg.masks[cell.mask_idx];
      const std::uint64_t mask_seed =
          seed_combine(cfg.seed, 0x3A5Cull, static_cast<std::uint64_t>(cell.record) * 131 +
                                                cell.mask_idx);
      SamplingMask mask =
          mspec.kind == MaskKind::Uniform1D
              ? make_uniform1d(grid_h, grid_w, static_cast<int>(std::lround(mspec.accel)),
                               mspec.acs_fraction, mask_seed)
              : make_poisson2d(grid_h, grid_w, mspec.accel, mask_seed);

      ForwardModel physics;
      physics.maps = rec.maps;
      physics.mask = mask;
      physics.noise_sigma = cfg.noise_sigma;
      const MultiCoilKSpace y =
          measure(physics, rec.image, seed_combine(cell.seed_hash, 0x4015Eull));

      ForwardModel recon_model = physics;
      if (cfg.maps_source == MapsSource::EspiritFromAcs)
        recon_model.maps = estimate_maps(y, CalibrationConfig{});

      const ScanMetadata md =
          apply_metadata_mode(rec.metadata, cfg.metadata_mode,
                              seed_combine(cfg.seed, 0x1217ull, cell.record));

      SolverConfig solver;
      solver.xi = cfg.xi;
      solver.cg_steps = cfg.cg_steps;
      solver.gamma = cell.gamma;
      solver.eta = cfg.eta;
      solver.num_steps = cfg.num_steps;
      solver.seed = seed_combine(cell.seed_hash, 0x0DD5ull);

      const ComplexImage recon =
          dds_reconstruct(y, recon_model, *ckpt.model, ckpt.schedule, md, solver);

      const std::vector<double> ref_mag = magnitude(rec.image);
      const std::vector<double> test_mag = magnitude(recon);
      const double data_range = *std::max_element(ref_mag.begin(), ref_mag.end());
      const double cell_psnr = psnr(ref_mag, test_mag, grid_h, grid_w, data_range);
      const double cell_ssim = ssim(ref_mag, test_mag, grid_h, grid_w, data_range);

      json j = {{"record", cell.record},
                {"mask_index", cell.mask_idx},
                {"mask", mspec.label()},
                {"gamma", cell.gamma},
                {"psnr", cell_psnr},
                {"ssim", cell_ssim}};
      write_cell_atomic(cell_path(cells_dir, cell.key), j);
    } catch (const std::exception& e) {
      errors[ci] = e.what();
    }
  }
  for (const std::string& err : errors)
    if (!err.empty()) throw Error("sweep cell failed: " + err);

  SweepResult result;
  result.output_dir = cfg.output_dir;
  result.complete = !interrupted;

  for (const Cell& c : cells) {
    const auto path = cell_path(cells_dir, c.key);
    if (!std::filesystem::exists(path)) continue;
    std::ifstream is(path);
    json j;
    is >> j;
    CellResult cr;
    cr.record = j.at("record").get<int>();
    cr.mask_index = j.at("mask_index").get<int>();
    cr.mask_label = j.at("mask").get<std::string>();
    cr.gamma = j.at("gamma").get<double>();
    cr.psnr = j.at("psnr").get<double>();
    cr.ssim = j.at("ssim").get<double>();
    result.cells.push_back(cr);
  }
  std::sort(result.cells.begin(), result.cells.end(), [](const CellResult& a, const CellResult& b) {
    return std::tie(a.record, a.mask_index, a.gamma) < std::tie(b.record, b.mask_index, b.gamma);
  });

  if (result.complete) {
    std::ofstream csv(cfg.output_dir / "results.csv");
    csv << "record,mask,gamma,psnr,ssim\n";
    for (const CellResult& c : result.cells)
      csv << c.record << "," << c.mask_label << "," << fmt_double(c.gamma) << ","
          << fmt_double(c.psnr) << "," << fmt_double(c.ssim) << "\n";
    if (!csv) throw IoError("failed writing results.csv");

    json summary;
    summary["metadata_mode"] = metadata_mode_name(cfg.metadata_mode);
    summary["maps_source"] = maps_source_name(cfg.maps_source);
    summary["noise_sigma"] = cfg.noise_sigma;
    summary["seed"] = cfg.seed;
    json cells_json = json::array();
    for (const auto& [label, gamma, agg] : summarize(result)) {
      cells_json.push_back({{"mask", label},
                            {"gamma", gamma},
                            {"psnr_mean", agg.psnr_mean},
                            {"psnr_std", agg.psnr_std},
                            {"ssim_mean", agg.ssim_mean},
                            {"ssim_std", agg.ssim_std},
                            {"n", agg.count}});
    }
    summary["cells"] = cells_json;
    std::ofstream js(cfg.output_dir / "summary.json");
    js << summary.dump(2) << "\n";
    if (!js) throw IoError("failed writing summary.json");
  }
  return result;
}

std::vector<std::tuple<std::string, double, MetricSummary>> summarize(const SweepResult& result) {
  std::map<std::pair<std::string, double>, std::vector<SliceMetrics>> groups;
  for (const CellResult& c : result.cells) {
    SliceMetrics m;
    m.id = std::to_string(c.record);
    m.psnr = c.psnr;
    m.ssim = c.ssim;
    groups[{c.mask_label, c.gamma}].push_back(m);
  }
  std::vector<std::tuple<std::string, double, MetricSummary>> out;
  for (const auto& [key, slices] : groups) out.emplace_back(key.first, key.second, aggregate(slices));
  return out;
}

void emit_table(const SweepResult& result, const std::filesystem::path& path) {
  if (result.cells.empty()) throw InvalidInputError("emit_table: empty result set");
  const auto agg = summarize(result);

  std::vector<std::string> masks;
  std::vector<double> gammas;
  for (const auto& [mask, gamma, s] : agg) {
    if (std::find(masks.begin(), masks.end(), mask) == masks.end()) masks.push_back(mask);
    if (std::find(gammas.begin(), gammas.end(), gamma) == gammas.end()) gammas.push_back(gamma);
  }
  std::sort(gammas.begin(), gammas.end());

  auto lookup = [&](const std::string& mask, double gamma) -> const MetricSummary* {
    for (const auto& [m, g, s] : agg)
      if (m == mask && g == gamma) return &s;
    return nullptr;
  };

  // strictly-best mean per column; ties flag all
  std::map<std::pair<std::string, int>, double> best;  // (mask, 0=psnr 1=ssim) -> max mean
  for (const std::string& mask : masks)
    for (int metric = 0; metric < 2; ++metric) {
      double mx = -1e300;
      for (double g : gammas)
        if (const MetricSummary* s = lookup(mask, g))
          mx = std::max(mx, metric == 0 ? s->psnr_mean : s->ssim_mean);
      best[{mask, metric}] = mx;
    }

  std::ofstream os(path);
  if (!os) throw IoError("cannot write table: " + path.string());
  os << "gamma";
  for (const std::string& mask : masks) os << " | " << mask << " PSNR | " << mask << " SSIM";
  os << "\n";
  for (double g : gammas) {
    char gbuf[32];
    std::snprintf(gbuf, sizeof(gbuf), "%.1f", g);
    os << gbuf;
    for (const std::string& mask : masks) {
      const MetricSummary* s = lookup(mask, g);
      for (int metric = 0; metric < 2; ++metric) {
        os << " | ";
        if (!s) {
          os << "-";
          continue;
        }
        const double mean = metric == 0 ? s->psnr_mean : s->ssim_mean;
        const double sd = metric == 0 ? s->psnr_std : s->ssim_std;
        os << format_mu_sigma(mean, sd);
        if (mean == best[{mask, metric}]) os << " *";
      }
    }
    os << "\n";
  }
  if (!os) throw IoError("table write failed: " + path.string());
}

std::vector<PlotSeries> plot_series_from(const SweepResult& result) {
  const auto agg = summarize(result);
  std::map<std::string, PlotSeries> by_mask;
  for (const auto& [mask, gamma, s] : agg) {
    PlotSeries& ps = by_mask[mask];
    ps.label = mask;
    ps.points.emplace_back(gamma, s.psnr_mean);
  }
  std::vector<PlotSeries> out;
  for (auto& [mask, ps] : by_mask) {
    std::sort(ps.points.begin(), ps.points.end());
    ps.dashed_baseline = ps.points.size() == 1;
    out.push_back(std::move(ps));
  }
  return out;
}

void emit_plot(const std::vector<PlotSeries>& series, const std::filesystem::path& path) {
  if (series.empty()) throw InvalidInputError("emit_plot: no series");
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const PlotSeries& s : series)
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  const double pad_y = 0.05 * (ymax - ymin);
  ymin -= pad_y;
  ymax += pad_y;

  const int W = 640, H = 480, ML = 60, MR = 20, MT = 20, MB = 45;
  auto px = [&](double x) { return ML + (x - xmin) / (xmax - xmin) * (W - ML - MR); };
  auto py = [&](double y) { return H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB); };
  auto f = [](double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return std::string(buf);
  };

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

  std::ofstream os(path);
  if (!os) throw IoError("cannot write plot: " + path.string());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  // axes
  os << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR << "\" y2=\""
     << H - MB << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\"" << H - MB
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (ML + W - MR) / 2 << "\" y=\"" << H - 10
     << "\" font-size=\"14\" text-anchor=\"middle\">CFG scale</text>\n";
  os << "<text x=\"15\" y=\"" << (MT + H - MB) / 2
     << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
     << (MT + H - MB) / 2 << ")\">PSNR (dB)</text>\n";

  int color_idx = 0;
  int legend_y = MT + 12;
  for (const PlotSeries& s : series) {
    const char* color = kColors[color_idx % 8];
    ++color_idx;
    if (s.dashed_baseline && !s.points.empty()) {
      const double y = py(s.points[0].second);
      os << "<line x1=\"" << ML << "\" y1=\"" << f(y) << "\" x2=\"" << W - MR << "\" y2=\""
         << f(y) << "\" stroke=\"" << color << "\" stroke-dasharray=\"6,4\"/>\n";
    } else {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (size_t i = 0; i < s.points.size(); ++i) {
        if (i) os << " ";
        os << f(px(s.points[i].first)) << "," << f(py(s.points[i].second));
      }
      os << "\"/>\n";
      for (const auto& [x, y] : s.points)
        os << "<circle cx=\"" << f(px(x)) << "\" cy=\"" << f(py(y))
           << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    os << "<text x=\"" << W - MR - 5 << "\" y=\"" << legend_y
       << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << color << "\">" << s.label
       << (s.dashed_baseline ? " (baseline)" : "") << "</text>\n";
    legend_y += 16;
  }
  os << "</svg>\n";
  if (!os) throw IoError("plot write failed: " + path.string());
}

}  // namespace ctxmri
