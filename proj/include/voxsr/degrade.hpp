#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "voxsr/linear_op.hpp"
#include "voxsr/volume.hpp"

namespace voxsr {

// x = B y + n with B = D H: Gaussian blur (H) then center-aligned trilinear
// resampling (D) by 1/factor. Noise is only injected by add_noise.
struct DegradationOp {
    double factor = 2.0;
    std::array<double, 3> blur_sigma_vox{0.5, 0.5, 0.5};
    double noise_variance = 0.0;
    std::uint64_t seed = 0;

    // Default blur 0.5 * (factor - 1) voxels per axis.
    static DegradationOp with_default_blur(double factor, double noise_variance = 0.0, std::uint64_t seed = 0);

    void validate() const;
};

// floor(n / factor) per axis; throws SizeError if any axis drops below 2.
Grid3 downsampled_grid(const Grid3& hr, double factor);

// HR coordinate sampled by LR index i: (i + 0.5) * factor - 0.5.
double lr_to_hr_coord(std::size_t lr_index, double factor);

// Builds B as a separable operator from hr_grid onto lr_dims (or the default
// downsampled grid).
SeparableOp make_degradation(const Grid3& hr_grid, const DegradationOp& op,
                             std::optional<Dims3> lr_dims = std::nullopt);

Volume3 blur(const Volume3& v, const std::array<double, 3>& sigma_vox);
Volume3 downsample(const Volume3& v, const DegradationOp& op);
// Downsample onto an explicit LR shape (used when the HR grid came from
// rounding an upsampled shape).
Volume3 downsample_to(const Volume3& v, const DegradationOp& op, const Grid3& lr_grid);
Volume3 downsample_adjoint(const Volume3& g, const DegradationOp& op, const Grid3& hr_grid);
Volume3 add_noise(const Volume3& v, double variance, std::uint64_t seed);

}  // namespace voxsr
