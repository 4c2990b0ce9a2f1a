#include "ctxmri/masks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ctxmri/binio.hpp"
#include "ctxmri/error.hpp"
#include "ctxmri/rng.hpp"

namespace ctxmri {

size_t SamplingMask::count_kept() const {
  size_t n = 0;
  for (std::uint8_t k : kept) n += k;
  return n;
}

double SamplingMask::achieved_accel() const {
  const size_t n = count_kept();
  if (n == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(kept.size()) / static_cast<double>(n);
}

SamplingMask make_uniform1d(int height, int width, int accel, double acs_fraction,
                            std::uint64_t seed) {
  if (height <= 0 || width <= 0) throw ConfigError("uniform1d: grid must be positive");
  if (accel < 1) throw ConfigError("uniform1d: accel must be >= 1");
  if (acs_fraction < 0.0 || acs_fraction >= 1.0)
    throw ConfigError("uniform1d: acs_fraction must be in [0, 1)");
  // round-half-up ACS width
  const int acs_w = static_cast<int>(std::floor(acs_fraction * width + 0.5));
  if (acs_w >= width) throw ConfigError("uniform1d: ACS wider than grid");

  const int acs_start = (width - acs_w) / 2;
  const int offset = static_cast<int>(seed % static_cast<std::uint64_t>(accel));

  SamplingMask mask(height, width);
  mask.kind = MaskKind::Uniform1D;
  mask.accel_nominal = accel;
  mask.acs_fraction = acs_fraction;
  mask.seed = seed;
  mask.acs_start = acs_start;
  mask.acs_width = acs_w;
  std::fill(mask.kept.begin(), mask.kept.end(), 0);

  for (int c = 0; c < width; ++c) {
    const bool in_acs = c >= acs_start && c < acs_start + acs_w;
    const bool on_grid = (c % accel) == offset;
    if (in_acs || on_grid)
      for (int r = 0; r < height; ++r) mask.at(r, c) = 1;
  }
  return mask;
}

double poisson_calibration_radius(int height, int width) {
  return 8.0 * static_cast<double>(std::min(height, width)) / 320.0;
}

namespace {

struct PoissonParams {
  int height, width;
  double scale;    // bisected density scale
  double r_base;   // radius at center, before scaling
  double r_slope;  // linear growth toward the edge
  double r_cal;    // fully sampled calibration disc radius
};

double local_radius(const PoissonParams& p, double y, double x) {
  const double cy = p.height / 2.0, cx = p.width / 2.0;
  const double dmax = std::hypot(cy, cx);
  const double dnorm = std::hypot(y - cy, x - cx) / dmax;
  return p.scale * (p.r_base + p.r_slope * dnorm);
}

/// Bridson dart throwing on the integer grid. Candidates are snapped to
/// pixels before the conflict check, so the emitted mask itself satisfies
/// the midpoint minimum-distance rule.
SamplingMask throw_darts(const PoissonParams& p, std::uint64_t seed) {
  SamplingMask mask(p.height, p.width);
  std::fill(mask.kept.begin(), mask.kept.end(), 0);

  const double r_max = p.scale * (p.r_base + p.r_slope);
  const int scan = std::max(1, static_cast<int>(std::ceil(r_max)));

  std::vector<std::pair<int, int>> points;
  std::vector<size_t> active;
  Rng rng(seed);

  auto occupied = [&](int r, int c) { return mask.at(r, c) != 0; };
  auto conflicts = [&](int r, int c) {
    for (int dr = -scan; dr <= scan; ++dr) {
      const int nr = r + dr;
      if (nr < 0 || nr >= p.height) continue;
      for (int dc = -scan; dc <= scan; ++dc) {
        const int nc = c + dc;
        if (nc < 0 || nc >= p.width || (dr == 0 && dc == 0)) continue;
        if (!occupied(nr, nc)) continue;
        const double d = std::hypot(static_cast<double>(dr), static_cast<double>(dc));
        const double rmid = local_radius(p, (r + nr) / 2.0, (c + nc) / 2.0);
        if (d < rmid) return true;
      }
    }
    return false;
  };
  auto insert = [&](int r, int c) {
    mask.at(r, c) = 1;
    points.emplace_back(r, c);
    active.push_back(points.size() - 1);
  };

  insert(p.height / 2, p.width / 2);

  constexpr int kCandidates = 30;
  while (!active.empty()) {
    const size_t slot = rng.uniform_int(active.size());
    const auto [pr, pc] = points[active[slot]];
    const double r_here = local_radius(p, pr, pc);
    bool placed = false;
    for (int k = 0; k < kCandidates; ++k) {
      const double rad = r_here * (1.0 + rng.uniform());
      const double ang = 2.0 * M_PI * rng.uniform();
      const int cr = static_cast<int>(std::lround(pr + rad * std::sin(ang)));
      const int cc = static_cast<int>(std::lround(pc + rad * std::cos(ang)));
      if (cr < 0 || cr >= p.height || cc < 0 || cc >= p.width) continue;
      if (occupied(cr, cc) || conflicts(cr, cc)) continue;
      insert(cr, cc);
      placed = true;
    }
    if (!placed) {
      active[slot] = active.back();
      active.pop_back();
    }
  }

  // fully sampled calibration disc
  const double cy = p.height / 2.0, cx = p.width / 2.0;
  for (int r = 0; r < p.height; ++r)
    for (int c = 0; c < p.width; ++c)
      if (std::hypot(r - cy, c - cx) <= p.r_cal) mask.at(r, c) = 1;

  return mask;
}

}  // namespace

SamplingMask make_poisson2d(int height, int width, double accel, std::uint64_t seed) {
  if (height <= 0 || width <= 0) throw ConfigError("poisson2d: grid must be positive");
  if (accel <= 1.0) throw ConfigError("poisson2d: accel must be > 1");

  PoissonParams params;
  params.height = height;
  params.width = width;
  params.r_base = 1.0;
  params.r_slope = 3.0;
  params.r_cal = poisson_calibration_radius(height, width);

  const double total = static_cast<double>(height) * width;
  const double target = total / accel;

  double disc_count = 0;
  const double cy = height / 2.0, cx = width / 2.0;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      if (std::hypot(r - cy, c - cx) <= params.r_cal) disc_count += 1.0;
  if (target <= disc_count)
    throw ConfigError("poisson2d: infeasible density, only the calibration region fits");

  // Bisect the density scale; kept count decreases monotonically in scale.
  double lo = 0.05, hi = 16.0;
  SamplingMask best;
  double best_err = std::numeric_limits<double>::infinity();
  double best_scale = 0.0;
  for (int iter = 0; iter < 28; ++iter) {
    params.scale = 0.5 * (lo + hi);
    SamplingMask mask = throw_darts(params, seed);
    const double got = static_cast<double>(mask.count_kept());
    const double err = std::abs(got - target) / target;
    if (err < best_err) {
      best_err = err;
      best = std::move(mask);
      best_scale = params.scale;
    }
    if (err < 0.02) break;
    if (got > target)
      lo = params.scale;
    else
      hi = params.scale;
  }

  if (best_err > 0.15)
    throw ConfigError("poisson2d: could not reach requested acceleration within 15%");

  best.kind = MaskKind::Poisson2D;
  best.accel_nominal = accel;
  best.acs_fraction = 0.0;
  best.seed = seed;
  best.density_scale = best_scale;
  return best;
}

double poisson_local_radius(const SamplingMask& mask, double y, double x) {
  PoissonParams p;
  p.height = mask.height;
  p.width = mask.width;
  p.scale = mask.density_scale;
  p.r_base = 1.0;
  p.r_slope = 3.0;
  p.r_cal = poisson_calibration_radius(mask.height, mask.width);
  return local_radius(p, y, x);
}

namespace {
constexpr char kMaskMagic[4] = {'M', 'S', 'K', '1'};
}

void save_mask(const SamplingMask& mask, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path.string());
  binio::write_magic(os, kMaskMagic);
  binio::write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(mask.kind));
  binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(mask.height));
  binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(mask.width));
  binio::write_pod<double>(os, mask.accel_nominal);
  binio::write_pod<double>(os, mask.acs_fraction);
  binio::write_pod<std::uint64_t>(os, mask.seed);
  // row-major bit stream, MSB first
  std::uint8_t byte = 0;
  int nbits = 0;
  for (std::uint8_t k : mask.kept) {
    byte = static_cast<std::uint8_t>((byte << 1) | (k & 1));
    if (++nbits == 8) {
      binio::write_pod<std::uint8_t>(os, byte);
      byte = 0;
      nbits = 0;
    }
  }
  if (nbits > 0) binio::write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(byte << (8 - nbits)));
  if (!os) throw IoError("write failed: " + path.string());
}

SamplingMask load_mask(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  binio::expect_magic(is, kMaskMagic, "MSK1");
  const auto kind = binio::read_pod<std::uint8_t>(is);
  const auto h = binio::read_pod<std::uint32_t>(is);
  const auto w = binio::read_pod<std::uint32_t>(is);
  SamplingMask mask(static_cast<int>(h), static_cast<int>(w));
  mask.kind = static_cast<MaskKind>(kind);
  mask.accel_nominal = binio::read_pod<double>(is);
  mask.acs_fraction = binio::read_pod<double>(is);
  mask.seed = binio::read_pod<std::uint64_t>(is);
  if (mask.kind == MaskKind::Uniform1D) {
    mask.acs_width = static_cast<int>(std::floor(mask.acs_fraction * mask.width + 0.5));
    mask.acs_start = (mask.width - mask.acs_width) / 2;
  }
  std::uint8_t byte = 0;
  int nbits = 0;
  for (std::uint8_t& k : mask.kept) {
    if (nbits == 0) {
      byte = binio::read_pod<std::uint8_t>(is);
      nbits = 8;
    }
    k = (byte >> 7) & 1;
    byte = static_cast<std::uint8_t>(byte << 1);
    --nbits;
  }
  return mask;
}

}  // namespace ctxmri
