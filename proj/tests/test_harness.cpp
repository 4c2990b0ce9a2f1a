#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctxmri/error.hpp"
#include "ctxmri/harness.hpp"
#include "ctxmri/phantom.hpp"
#include "ctxmri/score_model.hpp"
#include "ctxmri/training.hpp"

using namespace ctxmri;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct Fixture {
  fs::path root;
  fs::path manifest;
  fs::path checkpoint;

  Fixture() {
    root = fs::temp_directory_path() / "ctxmri_harness_test";
    fs::remove_all(root);
    fs::create_directories(root);

    DatasetOptions opts;
    opts.height = 16;
    opts.width = 16;
    opts.num_coils = 2;
    auto records = generate_dataset(4, 2025, opts);
    write_dataset(records, root / "data");
    manifest = root / "data" / "manifest.jsonl";

    CondUnet net(4, 77);
    DiffusionSchedule sched = make_schedule(50, 1e-4, 0.02, 0.8);
    checkpoint = root / "ckpt.bin";
    save_checkpoint(net, sched, checkpoint);
  }
  ~Fixture() { fs::remove_all(root); }

  ExperimentConfig base_config(const std::string& out_name) const {
    ExperimentConfig cfg;
    cfg.dataset_manifest = manifest;
    cfg.checkpoint = checkpoint;
    cfg.masks = {MaskSpec{MaskKind::Uniform1D, 2.0, 0.25}};
    cfg.gammas = {0.0, 1.0};
    cfg.seed = 31;
    cfg.num_steps = 5;
    cfg.output_dir = root / out_name;
    return cfg;
  }
};

}  // namespace

TEST_CASE("metadata modes transform records as specified") {
  ScanMetadata md;
  md.anatomy = Anatomy::Knee;
  md.slice_index = 12;
  md.contrast = Contrast::PD;
  md.sequence = Sequence::Turbospinecho;
  md.tr_ms = 2500.0;
  md.te_ms = 30.0;
  md.ti_ms = 100.0;
  md.flip_angle_deg = 130.0;
  md.pathologies = {"Meniscus Tear"};

  SUBCASE("Full is the identity") { CHECK(apply_metadata_mode(md, MetadataMode::Full, 1) == md); }
  SUBCASE("NoMRParams clears exactly the MR group") {
    ScanMetadata out = apply_metadata_mode(md, MetadataMode::NoMRParams, 1);
    CHECK(!out.tr_ms);
    CHECK(!out.te_ms);
    CHECK(!out.ti_ms);
    CHECK(!out.flip_angle_deg);
    CHECK(out.contrast == md.contrast);
    CHECK(out.slice_index == md.slice_index);
  }
  SUBCASE("NoContrast also clears contrast") {
    ScanMetadata out = apply_metadata_mode(md, MetadataMode::NoContrast, 1);
    CHECK(!out.contrast);
    CHECK(!out.tr_ms);
    CHECK(out.slice_index == md.slice_index);
  }
  SUBCASE("NoSlice clears slice, contrast and MR parameters") {
    ScanMetadata out = apply_metadata_mode(md, MetadataMode::NoSlice, 1);
    CHECK(!out.slice_index);
    CHECK(!out.contrast);
    CHECK(!out.tr_ms);
    CHECK(out.anatomy == md.anatomy);
    CHECK(out.pathologies == md.pathologies);
  }
  SUBCASE("Unconditional clears everything") {
    CHECK(apply_metadata_mode(md, MetadataMode::Unconditional, 1).empty());
  }
  SUBCASE("WrongPathology swaps to a different label, deterministically") {
    ScanMetadata a = apply_metadata_mode(md, MetadataMode::WrongPathology, 5);
    ScanMetadata b = apply_metadata_mode(md, MetadataMode::WrongPathology, 5);
    CHECK(a == b);
    REQUIRE(a.pathologies.size() == 1);
    CHECK(a.pathologies[0] != md.pathologies[0]);
    CHECK(pathology_known(a.pathologies[0]));
    CHECK(a.tr_ms == md.tr_ms);
  }
  SUBCASE("CorrectPathologyOnly keeps only the pathologies") {
    ScanMetadata out = apply_metadata_mode(md, MetadataMode::CorrectPathologyOnly, 1);
    CHECK(out.pathologies == md.pathologies);
    CHECK(!out.anatomy);
    CHECK(!out.slice_index);
    CHECK(!out.tr_ms);
  }
}

TEST_CASE("sweep end-to-end: determinism, resume, reports") {
  Fixture fx;

  SUBCASE("two identical runs produce byte-identical results.csv") {
    ExperimentConfig c1 = fx.base_config("out1");
    ExperimentConfig c2 = fx.base_config("out2");
    const SweepResult r1 = run_sweep(c1);
    const SweepResult r2 = run_sweep(c2);
    CHECK(r1.complete);
    CHECK(r1.cells.size() == 4 * 1 * 2);
    CHECK(slurp(c1.output_dir / "results.csv") == slurp(c2.output_dir / "results.csv"));
    CHECK(slurp(c1.output_dir / "summary.json") == slurp(c2.output_dir / "summary.json"));
  }

  SUBCASE("interrupt after k cells then resume reproduces the uninterrupted run") {
    ExperimentConfig full_cfg = fx.base_config("full");
    run_sweep(full_cfg);

    ExperimentConfig part_cfg = fx.base_config("partial");
    part_cfg.max_cells = 3;
    const SweepResult part = run_sweep(part_cfg);
    CHECK(!part.complete);
    CHECK(!fs::exists(part_cfg.output_dir / "results.csv"));

    part_cfg.max_cells = 0;
    const SweepResult resumed = run_sweep(part_cfg);
    CHECK(resumed.complete);
    CHECK(slurp(full_cfg.output_dir / "results.csv") ==
          slurp(part_cfg.output_dir / "results.csv"));
  }

  SUBCASE("unconditional mode forces a single gamma-0 column equal to gamma-0 Full") {
    ExperimentConfig c_full = fx.base_config("full2");
    const SweepResult full = run_sweep(c_full);

    ExperimentConfig c_unc = fx.base_config("unc");
    c_unc.metadata_mode = MetadataMode::Unconditional;
    const SweepResult unc = run_sweep(c_unc);
    CHECK(unc.cells.size() == 4);
    for (const CellResult& cu : unc.cells) {
      bool matched = false;
      for (const CellResult& cf : full.cells)
        if (cf.record == cu.record && cf.gamma == 0.0) {
          CHECK(cf.psnr == cu.psnr);
          CHECK(cf.ssim == cu.ssim);
          matched = true;
        }
      CHECK(matched);
    }
  }

  SUBCASE("missing checkpoint is a config error") {
    ExperimentConfig bad = fx.base_config("bad");
    bad.checkpoint = fx.root / "nope.bin";
    CHECK_THROWS_AS(run_sweep(bad), ConfigError);
  }

  SUBCASE("table and plot emission") {
    ExperimentConfig cfg = fx.base_config("report");
    const SweepResult res = run_sweep(cfg);
    const fs::path table = cfg.output_dir / "table.txt";
    emit_table(res, table);
    const std::string text = slurp(table);
    CHECK(text.find("uniform1d_x2_acs0.25 PSNR") != std::string::npos);
    // mu-sigma cells with two decimals and a best flag
    CHECK(text.find(" ± ") != std::string::npos);
    CHECK(text.find(" *") != std::string::npos);

    const fs::path plot = cfg.output_dir / "plot.svg";
    emit_plot(plot_series_from(res), plot);
    const std::string svg = slurp(plot);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("<polyline") != std::string::npos);
    // re-emission is byte-identical
    const fs::path plot2 = cfg.output_dir / "plot2.svg";
    emit_plot(plot_series_from(res), plot2);
    CHECK(slurp(plot) == slurp(plot2));

    // a single-gamma series renders as the dashed baseline
    PlotSeries base;
    base.label = "baseline";
    base.points = {{0.0, 25.0}};
    base.dashed_baseline = true;
    const fs::path plot3 = cfg.output_dir / "plot3.svg";
    emit_plot({plot_series_from(res)[0], base}, plot3);
    CHECK(slurp(plot3).find("stroke-dasharray") != std::string::npos);
  }
}

TEST_CASE("experiment config json loading") {
  const fs::path dir = fs::temp_directory_path() / "ctxmri_cfg_test";
  fs::create_directories(dir);
  const fs::path cfg_path = dir / "cfg.json";
  {
    std::ofstream os(cfg_path);
    os << R"({
      "dataset": "m.jsonl",
      "checkpoint": "c.bin",
      "masks": [{"kind": "uniform1d", "accel": 4, "acs": 0.08},
                {"kind": "poisson2d", "accel": 8}],
      "gammas": [0, 1, 2],
      "metadata_mode": "WrongPathology",
      "maps_source": "ESPIRiT-from-ACS",
      "noise_sigma": 0.01,
      "seed": 7,
      "output_dir": "out",
      "num_steps": 25
    })";
  }
  const ExperimentConfig cfg = load_experiment_config(cfg_path);
  CHECK(cfg.dataset_manifest == "m.jsonl");
  CHECK(cfg.masks.size() == 2);
  CHECK(cfg.masks[0].kind == MaskKind::Uniform1D);
  CHECK(cfg.masks[1].kind == MaskKind::Poisson2D);
  CHECK(cfg.gammas == std::vector<double>{0.0, 1.0, 2.0});
  CHECK(cfg.metadata_mode == MetadataMode::WrongPathology);
  CHECK(cfg.maps_source == MapsSource::EspiritFromAcs);
  CHECK(cfg.noise_sigma == 0.01);
  CHECK(cfg.num_steps == 25);

  std::ofstream(cfg_path) << "{ not json";
  CHECK_THROWS_AS(load_experiment_config(cfg_path), ConfigError);
  fs::remove_all(dir);
}
