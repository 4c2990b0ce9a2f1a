#include "ctxmri/phantom.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ctxmri/error.hpp"
#include "ctxmri/rng.hpp"
#include "ctxmri/signal.hpp"

namespace ctxmri {

using json = nlohmann::json;

TissueProps tissue_props(TissueClass c) {
  switch (c) {
    case TissueClass::Fat: return {1.00, 370.0, 130.0};
    case TissueClass::Muscle: return {0.80, 900.0, 50.0};
    case TissueClass::Marrow: return {0.85, 580.0, 100.0};
    case TissueClass::Cartilage: return {0.95, 1060.0, 42.0};
    case TissueClass::Fluid: return {1.00, 3500.0, 1500.0};
    case TissueClass::White: return {0.75, 780.0, 90.0};
    case TissueClass::Gray: return {0.85, 1200.0, 110.0};
    case TissueClass::Lesion: return {1.00, 1400.0, 250.0};
    case TissueClass::Background: return {0.0, 1.0, 1.0};
  }
  return {0.0, 1.0, 1.0};
}

double tissue_intensity(TissueClass c, const ScanMetadata& md) {
  if (c == TissueClass::Background) return 0.0;
  const bool fat_suppressed =
      md.contrast && (*md.contrast == Contrast::PDFS || *md.contrast == Contrast::FLAIR);
  if (fat_suppressed && c == TissueClass::Fat) return 0.0;

  const TissueProps p = tissue_props(c);
  const double tr = md.tr_ms.value_or(3000.0);
  const double te = md.te_ms.value_or(30.0);
  const double e1 = std::exp(-tr / p.t1_ms);
  const double e2 = std::exp(-te / p.t2_ms);
  double intensity = p.rho * (1.0 - e1) * e2;
  if (md.ti_ms) intensity *= std::abs(1.0 - 2.0 * std::exp(-*md.ti_ms / p.t1_ms));
  if (md.flip_angle_deg) {
    const double half = 0.5 * (*md.flip_angle_deg) * M_PI / 180.0;
    intensity /= 1.0 - std::cos(half) * e1;
  }
  if (md.contrast && *md.contrast == Contrast::T1POST && c == TissueClass::Lesion)
    intensity *= 1.6;
  return intensity;
}

namespace {

struct Ellipse {
  double cy, cx;      // center, normalized [-1, 1] coords
  double ay, ax;      // semi-axes
  double theta;       // rotation
  TissueClass tissue;
  double rho_mult = 1.0;
};

bool inside(const Ellipse& e, double y, double x) {
  const double dy = y - e.cy, dx = x - e.cx;
  const double ct = std::cos(e.theta), st = std::sin(e.theta);
  const double ry = dy * ct - dx * st;
  const double rx = dy * st + dx * ct;
  const double qa = rx / e.ax, qb = ry / e.ay;
  return qa * qa + qb * qb <= 1.0;
}

/// Signature lesion for a vocabulary label: deterministic placement on a
/// golden-angle fan around the anatomy's lesion anchor.
Ellipse lesion_signature(int label_idx, Anatomy anatomy) {
  const double golden = 2.399963229728653;  // 2*pi*(1 - 1/phi)
  const double ang = golden * static_cast<double>(label_idx + 1);
  const double rad = 0.22 + 0.05 * static_cast<double>(label_idx % 4);
  const double anchor_y = anatomy == Anatomy::Knee ? 0.06 : 0.0;
  Ellipse e;
  e.cy = anchor_y + rad * 0.62 * std::sin(ang);
  e.cx = rad * 0.85 * std::cos(ang);
  e.ay = 0.055 + 0.012 * static_cast<double>(label_idx % 5);
  e.ax = 0.075 + 0.010 * static_cast<double>(label_idx % 3);
  e.theta = ang;
  e.tissue = TissueClass::Lesion;
  e.rho_mult = 0.75 + 0.09 * static_cast<double>(label_idx % 7);
  return e;
}

std::vector<Ellipse> knee_structures(const ScanMetadata& md, Rng& jitter_rng) {
  const double sl = md.slice_index ? static_cast<double>(*md.slice_index) / 30.0 - 0.5 : 0.0;
  const double age = static_cast<double>(md.age_years.value_or(45));
  const double thinning = 1.0 - 0.6 * age / 100.0;
  const double sex_adj = md.sex ? (*md.sex == Sex::M ? 0.02 : -0.02) : 0.0;
  auto j = [&] { return 0.015 * jitter_rng.normal(); };

  std::vector<Ellipse> out;
  out.push_back({0.0 + j(), 0.0 + j(), 0.96, 0.92, 0.0, TissueClass::Fat});
  out.push_back({0.02 + j(), 0.0 + j(), 0.86, 0.80 + sex_adj, 0.10 * sl, TissueClass::Muscle});
  out.push_back({-0.38 + j(), -0.02 + 0.24 * sl + j(), 0.26, 0.30, 0.0, TissueClass::Marrow});
  out.push_back({0.44 + j(), 0.02 - 0.16 * sl + j(), 0.23, 0.32, 0.0, TissueClass::Marrow});
  out.push_back({0.03 + j(), 0.10 * sl + j(), 0.085 * thinning, 0.46, 0.15 * sl,
                 TissueClass::Cartilage});
  out.push_back({-0.02 + 0.34 * sl + j(), 0.30 + j(), 0.17, 0.09, 0.3, TissueClass::Fluid});
  return out;
}

std::vector<Ellipse> brain_structures(const ScanMetadata& md, Rng& jitter_rng) {
  const double sl = md.slice_index ? static_cast<double>(*md.slice_index) / 25.0 - 0.5 : 0.0;
  const double age = static_cast<double>(md.age_years.value_or(45));
  const double vent_scale = 1.0 + 0.7 * age / 100.0;
  const double white_scale = 1.0 - 0.15 * age / 100.0;
  const double sex_adj = md.sex ? (*md.sex == Sex::M ? 0.02 : -0.02) : 0.0;
  auto j = [&] { return 0.015 * jitter_rng.normal(); };

  bool enlarged = false;
  for (const std::string& p : md.pathologies)
    if (p == "Enlarged Ventricles") enlarged = true;
  const double vent = vent_scale * (enlarged ? 1.5 : 1.0);

  std::vector<Ellipse> out;
  out.push_back({0.0 + j(), 0.0 + j(), 0.95, 0.90, 0.0, TissueClass::Fat});
  out.push_back({0.01 + j(), 0.0 + j(), 0.86, 0.80, 0.0, TissueClass::Gray});
  out.push_back({0.02 + j(), 0.0 + j(), 0.72 * white_scale, (0.66 + sex_adj) * white_scale,
                 0.10 * sl, TissueClass::White});
  out.push_back({-0.05 + j(), -0.14 + 0.20 * sl + j(), 0.22 * vent, 0.09 * vent, -0.2,
                 TissueClass::Fluid});
  out.push_back({-0.05 + j(), 0.14 + 0.20 * sl + j(), 0.22 * vent, 0.09 * vent, 0.2,
                 TissueClass::Fluid});
  return out;
}

}  // namespace

SensitivityMaps simulate_coil_maps(int num_coils, int height, int width) {
  SensitivityMaps maps(num_coils, height, width);
  const double sigma = 0.8;
  for (int r = 0; r < height; ++r) {
    const double y = (2.0 * r - (height - 1)) / height;
    for (int c = 0; c < width; ++c) {
      const double x = (2.0 * c - (width - 1)) / width;
      double sumsq = 0.0;
      std::vector<cxd> vals(num_coils);
      for (int i = 0; i < num_coils; ++i) {
        const double ang = 2.0 * M_PI * (i + 0.5) / num_coils;
        const double cy = 0.9 * std::sin(ang), cx = 0.9 * std::cos(ang);
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        const double mag = std::exp(-d2 / (2.0 * sigma * sigma));
        const double phase = i == 0 ? 0.0 : 0.3 * i * x + 0.2 * i * y + 0.15 * i;
        vals[i] = std::polar(mag, phase);
        sumsq += mag * mag;
      }
      const double inv = 1.0 / std::sqrt(sumsq);
      for (int i = 0; i < num_coils; ++i) maps.maps[i].at(r, c) = vals[i] * inv;
    }
  }
  std::fill(maps.eigenvalue_map.begin(), maps.eigenvalue_map.end(), 1.0);
  return maps;
}

ComplexImage generate_smooth_phantom(int height, int width, std::uint64_t seed) {
  Rng rng(seed);
  const double cy1 = rng.uniform(-0.3, 0.3), cx1 = rng.uniform(-0.3, 0.3);
  const double cy2 = rng.uniform(-0.4, 0.4), cx2 = rng.uniform(-0.4, 0.4);
  double ph[3];
  for (double& v : ph) v = rng.uniform(-0.5, 0.5);
  ComplexImage img(height, width);
  for (int r = 0; r < height; ++r) {
    const double y = (2.0 * r - (height - 1)) / height;
    for (int c = 0; c < width; ++c) {
      const double x = (2.0 * c - (width - 1)) / width;
      const double taper = std::cos(0.5 * M_PI * y) * std::cos(0.5 * M_PI * y) *
                           std::cos(0.5 * M_PI * x) * std::cos(0.5 * M_PI * x);
      const double mag =
          taper * (0.25 + std::exp(-((y - cy1) * (y - cy1) + (x - cx1) * (x - cx1)) / 0.35) +
                   0.6 * std::exp(-((y - cy2) * (y - cy2) + (x - cx2) * (x - cx2)) / 0.2));
      img.at(r, c) = std::polar(mag, ph[0] * x + ph[1] * y + ph[2] * x * y);
    }
  }
  return img;
}

PhantomSample generate_phantom(const PhantomSpec& spec, const ScanMetadata& md) {
  if (md.anatomy && *md.anatomy != spec.anatomy_template)
    throw ConfigError("generate_phantom: metadata anatomy does not match the template");
  const Anatomy anatomy = md.anatomy.value_or(spec.anatomy_template);

  // Independent streams so one metadata field cannot shift unrelated draws.
  Rng jitter_rng(seed_combine(spec.rng_seed, 1));
  Rng phase_rng(seed_combine(spec.rng_seed, 2));
  Rng extra_rng(seed_combine(spec.rng_seed, 3));

  std::vector<Ellipse> structures = anatomy == Anatomy::Knee
                                        ? knee_structures(md, jitter_rng)
                                        : brain_structures(md, jitter_rng);

  // seed-only texture structures, tagged with an existing tissue class
  const TissueClass extra_class =
      anatomy == Anatomy::Knee ? TissueClass::Muscle : TissueClass::White;
  for (int i = 0; i < spec.num_ellipses; ++i) {
    Ellipse e;
    e.cy = extra_rng.uniform(-0.45, 0.45);
    e.cx = extra_rng.uniform(-0.45, 0.45);
    e.ay = extra_rng.uniform(0.04, 0.12);
    e.ax = extra_rng.uniform(0.04, 0.12);
    e.theta = extra_rng.uniform(0.0, M_PI);
    e.tissue = extra_class;
    structures.push_back(e);
  }

  for (const std::string& label : md.pathologies) {
    const int idx = pathology_index(label);
    if (idx < 0) throw ConfigError("generate_phantom: unknown pathology label '" + label + "'");
    Ellipse e = lesion_signature(idx, anatomy);
    Rng lesion_rng(seed_combine(spec.rng_seed, 4, static_cast<std::uint64_t>(idx)));
    e.cy += 0.02 * lesion_rng.normal();
    e.cx += 0.02 * lesion_rng.normal();
    structures.push_back(e);
  }

  // low-order polynomial phase
  double ph[6];
  for (double& v : ph) v = phase_rng.uniform(-0.5, 0.5);

  PhantomSample sample;
  sample.image = ComplexImage(spec.height, spec.width);
  sample.labels.assign(static_cast<size_t>(spec.height) * spec.width,
                       static_cast<std::uint8_t>(TissueClass::Background));

  // per-class intensities for this metadata
  double class_intensity[9];
  for (int c = 0; c < 9; ++c)
    class_intensity[c] = tissue_intensity(static_cast<TissueClass>(c), md);

  for (int r = 0; r < spec.height; ++r) {
    const double y = (2.0 * r - (spec.height - 1)) / spec.height;
    for (int c = 0; c < spec.width; ++c) {
      const double x = (2.0 * c - (spec.width - 1)) / spec.width;
      TissueClass cls = TissueClass::Background;
      double mult = 1.0;
      for (const Ellipse& e : structures)
        if (inside(e, y, x)) {
          cls = e.tissue;
          mult = e.rho_mult;
        }
      sample.labels[static_cast<size_t>(r) * spec.width + c] = static_cast<std::uint8_t>(cls);
      const double mag = class_intensity[static_cast<int>(cls)] * mult;
      if (mag > 0.0) {
        const double phase =
            ph[0] + ph[1] * x + ph[2] * y + ph[3] * x * x + ph[4] * y * y + ph[5] * x * y;
        sample.image.at(r, c) = std::polar(mag, phase);
      }
    }
  }

  sample.truth_maps = simulate_coil_maps(spec.num_coils, spec.height, spec.width);
  return sample;
}

namespace {

ScanMetadata sample_metadata(Rng& rng) {
  ScanMetadata md;
  const bool knee = rng.uniform() < 0.5;
  md.anatomy = knee ? Anatomy::Knee : Anatomy::Brain;
  md.sequence = Sequence::Turbospinecho;
  if (knee) {
    md.slice_index = static_cast<int>(rng.uniform_int(31));
    md.contrast = rng.uniform() < 0.5 ? Contrast::PD : Contrast::PDFS;
    md.tr_ms = std::round(rng.uniform(2000.0, 3930.0));
    // TE regime tracks the contrast so the label stays informative when
    // the numeric parameters are dropped
    md.te_ms = std::round(*md.contrast == Contrast::PD ? rng.uniform(24.0, 29.0)
                                                       : rng.uniform(29.0, 35.0));
    md.ti_ms = 100.0;
    md.flip_angle_deg = std::round(rng.uniform(122.0, 150.0));
  } else {
    md.slice_index = static_cast<int>(rng.uniform_int(26));
    const int pick = static_cast<int>(rng.uniform_int(5));
    md.contrast = std::array<Contrast, 5>{Contrast::T1, Contrast::T1PRE, Contrast::T1POST,
                                          Contrast::T2, Contrast::FLAIR}[pick];
    const bool t1ish = pick <= 2;
    if (t1ish) {
      md.sequence = rng.uniform() < 0.7 ? Sequence::Flash : Sequence::Turbospinecho;
      md.tr_ms = std::round(rng.uniform(247.0, 3000.0));
      md.te_ms = std::round(rng.uniform(2.0, 26.0));
      if (rng.uniform() < 0.5) md.ti_ms = std::round(rng.uniform(100.0, 1000.0));
    } else if (*md.contrast == Contrast::T2) {
      md.tr_ms = std::round(rng.uniform(3000.0, 9000.0));
      md.te_ms = std::round(rng.uniform(60.0, 126.0));
    } else {  // FLAIR
      md.tr_ms = std::round(rng.uniform(8000.0, 15810.0));
      md.te_ms = std::round(rng.uniform(80.0, 126.0));
      md.ti_ms = std::round(rng.uniform(2000.0, 2500.0));
    }
    md.flip_angle_deg = std::round(rng.uniform(69.0, 180.0));
  }
  // pathologies: anatomy's 4 signature labels + the 8 shared ones
  const int npath = rng.uniform() < 0.4 ? 0 : (rng.uniform() < 0.7 ? 1 : 2);
  std::vector<int> pool;
  for (int i = knee ? 0 : 4; i < (knee ? 4 : 8); ++i) pool.push_back(i);
  for (int i = 8; i < 16; ++i) pool.push_back(i);
  for (int k = 0; k < npath; ++k) {
    const size_t at = rng.uniform_int(pool.size());
    md.pathologies.push_back(pathology_vocabulary()[pool[at]]);
    pool.erase(pool.begin() + static_cast<long>(at));
  }
  return md;
}

}  // namespace

std::vector<DatasetRecord> generate_dataset(int n, std::uint64_t seed,
                                            const DatasetOptions& opts) {
  if (n < 1) throw ConfigError("generate_dataset: n must be >= 1");
  std::vector<DatasetRecord> records(n);
  for (int i = 0; i < n; ++i) {
    const std::uint64_t rec_seed = seed_combine(seed, static_cast<std::uint64_t>(i));
    Rng rng(rec_seed);
    ScanMetadata md = sample_metadata(rng);
    validate_metadata(md);

    PhantomSpec spec;
    spec.height = opts.height;
    spec.width = opts.width;
    spec.anatomy_template = *md.anatomy;
    spec.num_ellipses = opts.num_extra_ellipses;
    spec.rng_seed = seed_combine(rec_seed, 0xDA7A);
    spec.num_coils = opts.num_coils;

    PhantomSample sample = generate_phantom(spec, md);
    DatasetRecord& rec = records[i];
    rec.image = normalize_quantile(sample.image, 0.99).image;
    rec.metadata = std::move(md);
    rec.maps = std::move(sample.truth_maps);
    rec.labels = std::move(sample.labels);
    rec.seed = rec_seed;
  }
  return records;
}

void write_dataset(const std::vector<DatasetRecord>& records, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw IoError("cannot write manifest in " + dir.string());
  for (size_t i = 0; i < records.size(); ++i) {
    char img_name[32], maps_name[32];
    std::snprintf(img_name, sizeof(img_name), "img_%05zu.cmri", i);
    std::snprintf(maps_name, sizeof(maps_name), "maps_%05zu.cmri", i);
    save_cmri(records[i].image, dir / img_name);
    save_maps(records[i].maps, dir / maps_name);
    json line = {{"image", img_name},
                 {"maps", maps_name},
                 {"prompt", to_prompt(records[i].metadata)},
                 {"seed", records[i].seed}};
    manifest << line.dump() << "\n";
  }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw IoError("cannot open manifest: " + manifest_path.string());
  const std::filesystem::path dir = manifest_path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    ManifestEntry e;
    e.image_path = dir / j.at("image").get<std::string>();
    e.maps_path = dir / j.at("maps").get<std::string>();
    e.prompt = j.at("prompt").get<std::string>();
    e.seed = j.at("seed").get<std::uint64_t>();
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace ctxmri
