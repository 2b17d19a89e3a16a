#pragma once

#include <span>

#include "voxsr/volume.hpp"

namespace voxsr {

struct TvConfig {
    double epsilon = 1e-8;  // added under the square root
};

// Isotropic TV with forward differences (zero at the trailing index of each
// axis). Each voxel contributes sqrt(|d|^2 + eps) - sqrt(eps), so constant
// fields score exactly zero.
double tv_value(const Volume3& v, const TvConfig& cfg = {});
Volume3 tv_gradient(const Volume3& v, const TvConfig& cfg = {});

namespace detail {

template <class T>
double tv_value(std::span<const T> v, const Dims3& dims, double eps);

// grad += scale * dTV/dv
template <class T>
void tv_gradient_accumulate(std::span<const T> v, const Dims3& dims, double eps, T scale, std::span<T> grad);

}  // namespace detail

}  // namespace voxsr
