#pragma once

#include <array>

#include "voxsr/metrics.hpp"
#include "voxsr/volume.hpp"

namespace voxsr {

struct SeedSpec {
    std::array<double, 3> center_mm{0.0, 0.0, 0.0};  // voxel (0,0,0) centre is the origin
    double radius_mm = 3.0;
};

struct FuncMap {
    Grid3 grid;
    std::vector<float> r;  // Pearson r per voxel, 0 outside mask
    double threshold = 0.5;
    Volume3 mask;

    Volume3 as_volume() const { return Volume3(grid, r); }
};

// Temporal mean thresholded with Otsu's method over all voxels, restricted
// to positive voxels of the largest 6-connected component.
Volume3 automask(const Series4& series);

// Voxels whose centres lie within radius_mm of the seed centre.
std::vector<std::size_t> seed_voxels(const Grid3& grid, const SeedSpec& seed);

FuncMap seed_correlation(const Series4& series, const SeedSpec& seed, const Volume3& mask);

// 1 where r >= r_min inside the mask.
Volume3 threshold_map(const FuncMap& map, double r_min = 0.5);

struct MapComparison {
    double accuracy = 0.0;
    double fdr = 0.0;
    double jaccard = 0.0;
};

MapComparison compare_maps(const Volume3& gt_map, const Volume3& est_map);

// Removes a per-voxel least-squares constant + linear + quadratic trend in
// time (the mean is kept).
Series4 detrend_quadratic(const Series4& series);

}  // namespace voxsr
