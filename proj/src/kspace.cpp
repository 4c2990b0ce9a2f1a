#include "ctxmri/kspace.hpp"

#include <fstream>

#include "ctxmri/binio.hpp"
#include "ctxmri/error.hpp"

namespace ctxmri {

MultiCoilKSpace apply_mask(const MultiCoilKSpace& ksp, const SamplingMask& mask) {
  if (ksp.height != mask.height || ksp.width != mask.width)
    throw ShapeError("apply_mask: grid shape mismatch");
  MultiCoilKSpace out = ksp;
  out.mask = mask;
  for (ComplexImage& coil : out.coil_data)
    for (size_t i = 0; i < coil.data.size(); ++i)
      if (!mask.kept[i]) coil.data[i] = cxd(0.0, 0.0);
  return out;
}

// One CMRI block per coil followed by one block carrying the eigenvalue map
// in its real channel.
void save_maps(const SensitivityMaps& maps, const std::filesystem::path& path) {
  std::vector<ComplexImage> blocks = maps.maps;
  ComplexImage eig(maps.height, maps.width);
  for (size_t i = 0; i < eig.data.size(); ++i) eig.data[i] = cxd(maps.eigenvalue_map[i], 0.0);
  blocks.push_back(std::move(eig));
  save_cmri_blocks(blocks, path);
}

SensitivityMaps load_maps(const std::filesystem::path& path) {
  std::vector<ComplexImage> blocks = load_cmri_blocks(path);
  if (blocks.size() < 2) throw IoError("maps file must hold at least one coil + eigenvalues");
  SensitivityMaps maps(static_cast<int>(blocks.size()) - 1, blocks[0].height, blocks[0].width);
  for (int i = 0; i < maps.num_coils; ++i) {
    if (!blocks[i].same_shape(blocks[0])) throw IoError("maps file: inconsistent coil shapes");
    maps.maps[i] = std::move(blocks[i]);
  }
  const ComplexImage& eig = blocks.back();
  for (size_t i = 0; i < eig.data.size(); ++i) maps.eigenvalue_map[i] = eig.data[i].real();
  return maps;
}

}  // namespace ctxmri
