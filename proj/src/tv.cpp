#include "voxsr/tv.hpp"

#include <cmath>
#include <string>

namespace voxsr {

namespace {

void check_dims(const Dims3& d) {
    if (d[0] < 2 || d[1] < 2 || d[2] < 2) {
        throw SizeError("total variation needs at least 2 voxels per axis, got " + std::to_string(d[0]) + "x" +
                        std::to_string(d[1]) + "x" + std::to_string(d[2]));
    }
}

}  // namespace

namespace detail {

template <class T>
double tv_value(std::span<const T> v, const Dims3& dims, double eps) {
    check_dims(dims);
    if (!(eps >= 0.0)) throw ConfigError("tv epsilon must be >= 0");
    const std::size_t nx = dims[0], ny = dims[1], nz = dims[2];
    const std::size_t sy = nx, sz = nx * ny;
    const double root_eps = std::sqrt(eps);
    double total = 0.0;
    for (std::size_t k = 0; k < nz; ++k) {
        for (std::size_t j = 0; j < ny; ++j) {
            const std::size_t row = j * sy + k * sz;
            for (std::size_t i = 0; i < nx; ++i) {
                const std::size_t p = row + i;
                const double c = v[p];
                const double dx = i + 1 < nx ? static_cast<double>(v[p + 1]) - c : 0.0;
                const double dy = j + 1 < ny ? static_cast<double>(v[p + sy]) - c : 0.0;
                const double dz = k + 1 < nz ? static_cast<double>(v[p + sz]) - c : 0.0;
                const double m2 = dx * dx + dy * dy + dz * dz;
                // sqrt(m2 + eps) - sqrt(eps) without cancellation.
                if (m2 > 0.0) total += m2 / (std::sqrt(m2 + eps) + root_eps);
            }
        }
    }
    return total;
}

template <class T>
void tv_gradient_accumulate(std::span<const T> v, const Dims3& dims, double eps, T scale, std::span<T> grad) {
    check_dims(dims);
    if (!(eps > 0.0)) throw ConfigError("tv gradient requires epsilon > 0 (the unsmoothed TV is not differentiable)");
    const std::size_t nx = dims[0], ny = dims[1], nz = dims[2];
    const std::size_t sy = nx, sz = nx * ny;
    const double s = scale;
    for (std::size_t k = 0; k < nz; ++k) {
        for (std::size_t j = 0; j < ny; ++j) {
            const std::size_t row = j * sy + k * sz;
            for (std::size_t i = 0; i < nx; ++i) {
                const std::size_t p = row + i;
                const double c = v[p];
                const bool hx = i + 1 < nx, hy = j + 1 < ny, hz = k + 1 < nz;
                const double dx = hx ? static_cast<double>(v[p + 1]) - c : 0.0;
                const double dy = hy ? static_cast<double>(v[p + sy]) - c : 0.0;
                const double dz = hz ? static_cast<double>(v[p + sz]) - c : 0.0;
                const double inv = s / std::sqrt(dx * dx + dy * dy + dz * dz + eps);
                grad[p] -= static_cast<T>((dx + dy + dz) * inv);
                if (hx) grad[p + 1] += static_cast<T>(dx * inv);
                if (hy) grad[p + sy] += static_cast<T>(dy * inv);
                if (hz) grad[p + sz] += static_cast<T>(dz * inv);
            }
        }
    }
}

template double tv_value<float>(std::span<const float>, const Dims3&, double);
template double tv_value<double>(std::span<const double>, const Dims3&, double);
template void tv_gradient_accumulate<float>(std::span<const float>, const Dims3&, double, float, std::span<float>);
template void tv_gradient_accumulate<double>(std::span<const double>, const Dims3&, double, double, std::span<double>);

}  // namespace detail

double tv_value(const Volume3& v, const TvConfig& cfg) {
    return detail::tv_value<float>(v.values(), v.grid().dims(), cfg.epsilon);
}

Volume3 tv_gradient(const Volume3& v, const TvConfig& cfg) {
    Volume3 g(v.grid(), 0.0f);
    detail::tv_gradient_accumulate<float>(v.values(), v.grid().dims(), cfg.epsilon, 1.0f, g.values());
    return g;
}

}  // namespace voxsr
