#include "voxsr/interp.hpp"

#include <cmath>

namespace voxsr {

InterpMethod parse_interp_method(std::string_view name) {
    if (name == "trilinear") return InterpMethod::trilinear;
    if (name == "nearest") return InterpMethod::nearest;
    if (name == "bspline3") return InterpMethod::bspline3;
    throw ArgumentError("unknown interpolation method '" + std::string(name) + "'");
}

std::string to_string(InterpMethod m) {
    switch (m) {
        case InterpMethod::trilinear: return "trilinear";
        case InterpMethod::nearest: return "nearest";
        case InterpMethod::bspline3: return "bspline3";
    }
    return "?";
}

Grid3 upsampled_grid(const Grid3& lr, double factor) {
    const auto up = [&](std::size_t n) {
        return static_cast<std::size_t>(std::floor(static_cast<double>(n) * factor + 0.5 + 1e-9));
    };
    return Grid3(up(lr.nx), up(lr.ny), up(lr.nz), lr.sx / factor, lr.sy / factor, lr.sz / factor);
}

double hr_to_lr_coord(std::size_t hr_index, double factor) {
    return (static_cast<double>(hr_index) + 0.5) / factor - 0.5;
}

namespace {

std::vector<double> hr_coords(std::size_t n_hr, double factor) {
    std::vector<double> c(n_hr);
    for (std::size_t i = 0; i < n_hr; ++i) c[i] = hr_to_lr_coord(i, factor);
    return c;
}

void check_factor(double factor) {
    if (!(factor > 1.0) || !std::isfinite(factor)) {
        throw ArgumentError("upsampling factor must be > 1, got " + std::to_string(factor));
    }
}

// In-place prefilter of one strided line.
void prefilter_line(double* c, std::size_t n, std::size_t stride) {
    if (n < 2) return;
    const double z = std::sqrt(3.0) - 2.0;
    const double gain = (1.0 - z) * (1.0 - 1.0 / z);
    auto at = [&](std::size_t i) -> double& { return c[i * stride]; };
    for (std::size_t i = 0; i < n; ++i) at(i) *= gain;

    // Exact causal initialisation for whole-sample mirror extension.
    double zn = z;
    const double iz = 1.0 / z;
    double z2n = std::pow(z, static_cast<double>(n - 1));
    double sum = at(0) + z2n * at(n - 1);
    z2n *= z2n * iz;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        sum += (zn + z2n) * at(i);
        zn *= z;
        z2n *= iz;
    }
    at(0) = sum / (1.0 - zn * zn);
    for (std::size_t i = 1; i < n; ++i) at(i) += z * at(i - 1);

    at(n - 1) = (z / (z * z - 1.0)) * (z * at(n - 2) + at(n - 1));
    for (std::size_t i = n - 1; i-- > 0;) at(i) = z * (at(i + 1) - at(i));
}

}  // namespace

std::vector<double> bspline_prefilter(std::span<const float> v, const Dims3& dims) {
    std::vector<double> c(v.begin(), v.end());
    const std::size_t nx = dims[0], ny = dims[1], nz = dims[2];
    for (std::size_t k = 0; k < nz; ++k)
        for (std::size_t j = 0; j < ny; ++j) prefilter_line(c.data() + nx * (j + ny * k), nx, 1);
    for (std::size_t k = 0; k < nz; ++k)
        for (std::size_t i = 0; i < nx; ++i) prefilter_line(c.data() + i + nx * ny * k, ny, nx);
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) prefilter_line(c.data() + i + nx * j, nz, nx * ny);
    return c;
}

SeparableOp make_upsampler(const Grid3& lr, double factor, InterpMethod method) {
    check_factor(factor);
    const Grid3 hr = upsampled_grid(lr, factor);
    const Dims3 lrd = lr.dims(), hrd = hr.dims();
    SeparableOp op;
    for (int a = 0; a < 3; ++a) {
        const auto coords = hr_coords(hrd[a], factor);
        switch (method) {
            case InterpMethod::trilinear: op.axis[a] = AxisOp::linear(lrd[a], coords); break;
            case InterpMethod::nearest: op.axis[a] = AxisOp::nearest(lrd[a], coords); break;
            case InterpMethod::bspline3: op.axis[a] = AxisOp::cubic_bspline(lrd[a], coords); break;
        }
    }
    return op;
}

Volume3 upsample(const Volume3& v, double factor, InterpMethod method) {
    const SeparableOp op = make_upsampler(v.grid(), factor, method);
    const Grid3 hr = upsampled_grid(v.grid(), factor);
    if (method != InterpMethod::bspline3) return Volume3(hr, op.apply<float>(v.values()));
    const auto coeffs = bspline_prefilter(v.values(), v.grid().dims());
    const auto out = op.apply<double>(coeffs);
    return Volume3(hr, std::vector<float>(out.begin(), out.end()));
}

}  // namespace voxsr
