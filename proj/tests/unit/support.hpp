#pragma once

// Test-only helpers. Everything here is written independently of the
// library internals so it can serve as an oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "voxsr/volume.hpp"

namespace testing {

inline voxsr::Volume3 random_volume(const voxsr::Grid3& g, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    voxsr::Volume3 v(g, 0.0f);
    for (float& x : v.data()) x = static_cast<float>(d(gen));
    return v;
}

inline double dot(const voxsr::Volume3& a, const voxsr::Volume3& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

inline double norm(const voxsr::Volume3& a) { return std::sqrt(dot(a, a)); }

inline double max_abs_diff(const voxsr::Volume3& a, const voxsr::Volume3& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(static_cast<double>(a[i]) - b[i]));
    return m;
}

// Normalised, truncated 1D Gaussian tap at offset k (half-width ceil(3 sigma)).
inline double gaussian_weight(int k, double sigma) {
    const int h = static_cast<int>(std::ceil(3.0 * sigma));
    double z = 0.0;
    for (int j = -h; j <= h; ++j) z += std::exp(-0.5 * j * j / (sigma * sigma));
    return std::exp(-0.5 * k * k / (sigma * sigma)) / z;
}

// Isotropic TV written out voxel by voxel.
inline double tv_oracle(const std::vector<double>& v, std::size_t nx, std::size_t ny, std::size_t nz, double eps) {
    auto at = [&](std::size_t i, std::size_t j, std::size_t k) { return v[i + nx * (j + ny * k)]; };
    double s = 0.0;
    for (std::size_t k = 0; k < nz; ++k)
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t i = 0; i < nx; ++i) {
                const double dx = i + 1 < nx ? at(i + 1, j, k) - at(i, j, k) : 0.0;
                const double dy = j + 1 < ny ? at(i, j + 1, k) - at(i, j, k) : 0.0;
                const double dz = k + 1 < nz ? at(i, j, k + 1) - at(i, j, k) : 0.0;
                s += std::sqrt(dx * dx + dy * dy + dz * dz + eps) - std::sqrt(eps);
            }
    return s;
}

// Plain 7-deep loop 3x3x3 cross-correlation with zero padding.
// Layout: in[c][z][y][x], w[o][c][dz][dy][dx].
inline std::vector<double> conv_oracle(const std::vector<double>& in, int cin, std::size_t nx, std::size_t ny,
                                       std::size_t nz, const std::vector<double>& w, const std::vector<double>& b,
                                       int cout) {
    const std::size_t nv = nx * ny * nz;
    std::vector<double> out(static_cast<std::size_t>(cout) * nv, 0.0);
    for (int o = 0; o < cout; ++o)
        for (std::size_t z = 0; z < nz; ++z)
            for (std::size_t y = 0; y < ny; ++y)
                for (std::size_t x = 0; x < nx; ++x) {
                    double acc = b[static_cast<std::size_t>(o)];
                    for (int c = 0; c < cin; ++c)
                        for (int dz = -1; dz <= 1; ++dz)
                            for (int dy = -1; dy <= 1; ++dy)
                                for (int dx = -1; dx <= 1; ++dx) {
                                    const long xx = static_cast<long>(x) + dx, yy = static_cast<long>(y) + dy,
                                               zz = static_cast<long>(z) + dz;
                                    if (xx < 0 || yy < 0 || zz < 0 || xx >= static_cast<long>(nx) ||
                                        yy >= static_cast<long>(ny) || zz >= static_cast<long>(nz))
                                        continue;
                                    const std::size_t t = static_cast<std::size_t>((dz + 1) * 9 + (dy + 1) * 3 + (dx + 1));
                                    acc += w[(static_cast<std::size_t>(o) * cin + c) * 27 + t] *
                                           in[static_cast<std::size_t>(c) * nv + xx + nx * (yy + ny * zz)];
                                }
                    out[static_cast<std::size_t>(o) * nv + x + nx * (y + ny * z)] = acc;
                }
    return out;
}

// Per-block finite-difference error: max |g - fd| / max |fd|.
inline double block_error(const std::vector<double>& g, const std::vector<double>& fd) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        num = std::max(num, std::fabs(g[i] - fd[i]));
        den = std::max(den, std::fabs(fd[i]));
    }
    return den > 0.0 ? num / den : num;
}

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("voxsr_test_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace testing
