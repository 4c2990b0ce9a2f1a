#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ctxmri/image.hpp"
#include "ctxmri/kspace.hpp"
#include "ctxmri/metadata.hpp"

namespace ctxmri {

enum class TissueClass : std::uint8_t {
  Background = 0,
  Fat,
  Muscle,
  Marrow,
  Cartilage,
  Fluid,
  White,
  Gray,
  Lesion,
};

struct TissueProps {
  double rho;
  double t1_ms;
  double t2_ms;
};

TissueProps tissue_props(TissueClass c);

/// Closed-form per-class signal: rho * (1 - exp(-TR/T1)) * exp(-TE/T2),
/// with an inversion factor |1 - 2 exp(-TI/T1)| when TI is present, an
/// excitation factor 1/(1 - cos(FA/2) exp(-TR/T1)) when the flip angle is
/// present, and the fat class zeroed under PDFS/FLAIR. T1POST enhances the
/// lesion class.
double tissue_intensity(TissueClass c, const ScanMetadata& md);

struct PhantomSpec {
  int height = 64;
  int width = 64;
  Anatomy anatomy_template = Anatomy::Knee;
  int num_ellipses = 4;  // extra seed-controlled structures beyond the template
  std::uint64_t rng_seed = 0;
  int num_coils = 4;
};

struct PhantomSample {
  ComplexImage image;  // complex-valued, unnormalized
  SensitivityMaps truth_maps;
  std::vector<std::uint8_t> labels;  // per-pixel TissueClass
};

/// Deterministic per (spec, md). Geometry follows slice/age/sex/pathology,
/// per-class intensities follow (contrast, TR, TE, TI, FA), and the
/// rng_seed only jitters structure placement and the phase map.
PhantomSample generate_phantom(const PhantomSpec& spec, const ScanMetadata& md);

/// Smooth Gaussian-profile coil maps, coil 0 phase-free, normalized so
/// sum_i |S_i|^2 == 1 everywhere.
SensitivityMaps simulate_coil_maps(int num_coils, int height, int width);

/// Smooth strictly-band-limited calibration object: Gaussian-mixture
/// magnitude tapered to zero at the field-of-view border, low-order
/// polynomial phase. Used by the sensitivity-estimation checks.
ComplexImage generate_smooth_phantom(int height, int width, std::uint64_t seed);

struct DatasetOptions {
  int height = 64;
  int width = 64;
  int num_coils = 4;
  int num_extra_ellipses = 4;
};

struct DatasetRecord {
  ComplexImage image;  // normalized by the 99% magnitude quantile
  ScanMetadata metadata;
  SensitivityMaps maps;
  std::vector<std::uint8_t> labels;
  std::uint64_t seed = 0;
};

/// Samples metadata uniformly over the knee/brain table ranges and renders
/// the matching phantoms.
std::vector<DatasetRecord> generate_dataset(int n, std::uint64_t seed,
                                            const DatasetOptions& opts = {});

/// Writes images (CMRI), maps (CMRI blocks) and a JSONL manifest with
/// {image, maps, prompt, seed} per line.
void write_dataset(const std::vector<DatasetRecord>& records, const std::filesystem::path& dir);

struct ManifestEntry {
  std::filesystem::path image_path;
  std::filesystem::path maps_path;
  std::string prompt;
  std::uint64_t seed = 0;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path);

}  // namespace ctxmri
