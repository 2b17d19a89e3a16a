#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "voxsr/degrade.hpp"
#include "voxsr/volume.hpp"

namespace voxsr {

struct ActivationCluster {
    std::array<double, 3> center_vox{20.0, 16.0, 16.0};
    double radius_vox = 4.0;
    double amplitude = 20.0;  // 0 disables the cluster
    double period_frames = 8.0;
};

struct PhantomSpec {
    Dims3 size{32, 32, 32};
    double spacing_mm = 1.5;
    std::size_t timepoints = 20;
    int n_ellipsoids = 6;
    ActivationCluster activation;
    double noise_sigma = 10.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct PhantomTruth {
    Volume3 head_mask;
    Volume3 activation_mask;
    Volume3 static_field;  // noise- and activation-free intensity
};

struct Phantom {
    Series4 series;
    PhantomTruth truth;
};

// Smooth ellipsoid composite in [0, 1000], an optional sinusoidal cluster
// and i.i.d. Gaussian temporal noise inside the head (clipped at 0).
Phantom generate(const PhantomSpec& spec);

// Frame-wise B, then additive noise of op.noise_variance.
std::pair<Series4, Series4> make_lr_pair(const Series4& hr_series, const DegradationOp& op);

// Run-length encoding of the nonzero voxels of a mask: [[start, length], ...].
std::vector<std::pair<std::size_t, std::size_t>> run_length_encode(const Volume3& mask);
Volume3 run_length_decode(const Grid3& grid, const std::vector<std::pair<std::size_t, std::size_t>>& runs);

std::string truth_to_json(const PhantomSpec& spec, const PhantomTruth& truth);

}  // namespace voxsr
