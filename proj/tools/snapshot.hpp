#pragma once

#include <string>
#include <vector>

#include "voxsr/volume.hpp"

namespace voxsr::tools {

// Grayscale mid-axial (z = nz / 2) slices placed left to right with a
// 2-pixel black gutter. Intensities in [lo, hi] map linearly onto 0..255;
// rows are flipped so +y points up.
void write_axial_png(const std::vector<const Volume3*>& panels, double lo, double hi, const std::string& path);

}  // namespace voxsr::tools
