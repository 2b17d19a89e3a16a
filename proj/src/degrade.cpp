#include "voxsr/degrade.hpp"

#include <cmath>
#include <string>

#include "voxsr/rng.hpp"

namespace voxsr {

DegradationOp DegradationOp::with_default_blur(double factor, double noise_variance, std::uint64_t seed) {
    DegradationOp op;
    op.factor = factor;
    const double s = 0.5 * (factor - 1.0);
    op.blur_sigma_vox = {s, s, s};
    op.noise_variance = noise_variance;
    op.seed = seed;
    return op;
}

void DegradationOp::validate() const {
    if (!(factor >= 1.0 && factor <= 4.0)) {
        throw ArgumentError("degradation factor must lie in [1, 4], got " + std::to_string(factor));
    }
    for (double s : blur_sigma_vox) {
        if (!(s >= 0.0) || !std::isfinite(s)) throw ArgumentError("blur sigma must be finite and >= 0");
    }
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance)) {
        throw ArgumentError("noise variance must be finite and >= 0");
    }
}

double lr_to_hr_coord(std::size_t lr_index, double factor) {
    return (static_cast<double>(lr_index) + 0.5) * factor - 0.5;
}

Grid3 downsampled_grid(const Grid3& hr, double factor) {
    const auto down = [&](std::size_t n) {
        const auto m = static_cast<std::size_t>(std::floor(static_cast<double>(n) / factor + 1e-9));
        if (m < 2) {
            throw SizeError("downsampling " + hr.describe() + " by " + std::to_string(factor) +
                            " leaves an axis with fewer than 2 voxels");
        }
        return m;
    };
    return Grid3(down(hr.nx), down(hr.ny), down(hr.nz), hr.sx * factor, hr.sy * factor, hr.sz * factor);
}

SeparableOp make_degradation(const Grid3& hr_grid, const DegradationOp& op, std::optional<Dims3> lr_dims) {
    op.validate();
    const Dims3 hr = hr_grid.dims();
    const Dims3 lr = lr_dims ? *lr_dims : downsampled_grid(hr_grid, op.factor).dims();
    SeparableOp b;
    for (int a = 0; a < 3; ++a) {
        std::vector<double> coords(lr[a]);
        for (std::size_t i = 0; i < lr[a]; ++i) coords[i] = lr_to_hr_coord(i, op.factor);
        const AxisOp sample = AxisOp::linear(hr[a], coords);
        b.axis[a] = sample.compose(AxisOp::gaussian(hr[a], op.blur_sigma_vox[a]));
    }
    return b;
}

Volume3 blur(const Volume3& v, const std::array<double, 3>& sigma_vox) {
    SeparableOp h;
    const Dims3 d = v.grid().dims();
    for (int a = 0; a < 3; ++a) h.axis[a] = AxisOp::gaussian(d[a], sigma_vox[a]);
    return Volume3(v.grid(), h.apply<float>(v.values()));
}

Volume3 downsample(const Volume3& v, const DegradationOp& op) {
    op.validate();
    return downsample_to(v, op, downsampled_grid(v.grid(), op.factor));
}

Volume3 downsample_to(const Volume3& v, const DegradationOp& op, const Grid3& lr_grid) {
    const SeparableOp b = make_degradation(v.grid(), op, lr_grid.dims());
    return Volume3(lr_grid, b.apply<float>(v.values()));
}

Volume3 downsample_adjoint(const Volume3& g, const DegradationOp& op, const Grid3& hr_grid) {
    const Grid3 expect = downsampled_grid(hr_grid, op.factor);
    if (!g.grid().same_shape(expect)) {
        throw SizeError("adjoint input grid " + g.grid().describe() + " does not match downsampled grid " +
                        expect.describe());
    }
    const SeparableOp b = make_degradation(hr_grid, op);
    return Volume3(hr_grid, b.apply_adjoint<float>(g.values()));
}

Volume3 add_noise(const Volume3& v, double variance, std::uint64_t seed) {
    if (!(variance >= 0.0)) throw ArgumentError("noise variance must be >= 0");
    Volume3 out = v;
    if (variance == 0.0) return out;
    const double sd = std::sqrt(variance);
    auto vals = out.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        vals[i] = static_cast<float>(vals[i] + sd * rng::normal(seed, i));
    }
    return out;
}

}  // namespace voxsr
