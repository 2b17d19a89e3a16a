#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxsr/errors.hpp"

namespace voxsr {

using Dims3 = std::array<std::size_t, 3>;

// Voxel counts plus spacing in mm. Linear order is x-fastest:
// voxel (i, j, k) lives at i + nx * (j + ny * k).
struct Grid3 {
    std::size_t nx = 1, ny = 1, nz = 1;
    double sx = 1.0, sy = 1.0, sz = 1.0;

    Grid3() = default;
    Grid3(std::size_t nx_, std::size_t ny_, std::size_t nz_,
          double sx_ = 1.0, double sy_ = 1.0, double sz_ = 1.0);

    std::size_t voxels() const noexcept { return nx * ny * nz; }
    Dims3 dims() const noexcept { return {nx, ny, nz}; }
    std::array<double, 3> spacing() const noexcept { return {sx, sy, sz}; }
    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return i + nx * (j + ny * k);
    }

    bool same_shape(const Grid3& o) const noexcept {
        return nx == o.nx && ny == o.ny && nz == o.nz;
    }
    bool operator==(const Grid3& o) const noexcept = default;

    void validate() const;
    std::string describe() const;
};

// A scalar field on a grid. Volume3 (float) is the public currency; the
// double instantiation backs the 64-bit gradient checks.
template <class T>
class BasicVolume {
public:
    using value_type = T;

    BasicVolume() = default;
    explicit BasicVolume(const Grid3& grid, T fill = T(0))
        : grid_(grid), data_((grid.validate(), grid.voxels()), fill) {}
    BasicVolume(const Grid3& grid, std::vector<T> data) : grid_(grid), data_(std::move(data)) {
        grid_.validate();
        if (data_.size() != grid_.voxels()) {
            throw SizeError("volume data length " + std::to_string(data_.size()) +
                            " does not match grid " + grid_.describe());
        }
    }

    const Grid3& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<const T> values() const noexcept { return data_; }
    std::span<T> values() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }
    std::vector<T>& data() noexcept { return data_; }

    T operator[](std::size_t idx) const { return data_[idx]; }
    T& operator[](std::size_t idx) { return data_[idx]; }
    T at(std::size_t i, std::size_t j, std::size_t k) const { return data_[grid_.index(i, j, k)]; }
    T& at(std::size_t i, std::size_t j, std::size_t k) { return data_[grid_.index(i, j, k)]; }

    template <class U>
    BasicVolume<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return BasicVolume<U>(grid_, std::move(out));
    }

    bool all_finite() const noexcept;

private:
    Grid3 grid_;
    std::vector<T> data_;
};

using Volume3 = BasicVolume<float>;

// An fMRI-like run: t frames on one shared grid.
class Series4 {
public:
    Series4() = default;
    Series4(const Grid3& grid, std::vector<Volume3> frames, std::optional<double> tr_seconds = {});
    explicit Series4(Volume3 single);

    const Grid3& grid() const noexcept { return grid_; }
    std::size_t timepoints() const noexcept { return frames_.size(); }
    const std::vector<Volume3>& frames() const noexcept { return frames_; }
    const Volume3& frame(std::size_t t) const { return frames_.at(t); }
    std::optional<double> tr_seconds() const noexcept { return tr_; }

private:
    Grid3 grid_;
    std::vector<Volume3> frames_;
    std::optional<double> tr_;
};

struct VolumeStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double stddev = 0.0;  // population convention
};

VolumeStats stats(const Volume3& v);

// NIfTI-1 single file (.nii), uncompressed, little-endian.
Series4 read_nifti(const std::string& path);
void write_nifti(const Series4& series, const std::string& path);

// Native raw dump: 16-byte magic, u32 nx ny nz t, f32 sx sy sz, f32 payload.
Series4 read_raw(const std::string& path);
void write_raw(const Series4& series, const std::string& path);

// Dispatches on extension: ".nii" -> NIfTI, anything else -> raw.
Series4 read_series(const std::string& path);
void write_series(const Series4& series, const std::string& path);

extern template class BasicVolume<float>;
extern template class BasicVolume<double>;

}  // namespace voxsr
