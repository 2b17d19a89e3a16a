#pragma once

#include <string>
#include <string_view>

#include "voxsr/linear_op.hpp"
#include "voxsr/volume.hpp"

namespace voxsr {

enum class InterpMethod { trilinear, nearest, bspline3 };

InterpMethod parse_interp_method(std::string_view name);
std::string to_string(InterpMethod m);

// round-half-up(n * factor) per axis, spacing divided by factor.
Grid3 upsampled_grid(const Grid3& lr, double factor);

// LR coordinate sampled by HR index i: (i + 0.5) / factor - 0.5.
double hr_to_lr_coord(std::size_t hr_index, double factor);

// Trilinear or nearest upsampling as a separable linear operator.
SeparableOp make_upsampler(const Grid3& lr, double factor, InterpMethod method);

Volume3 upsample(const Volume3& v, double factor, InterpMethod method);

// Cubic B-spline interpolation coefficients (pole sqrt(3) - 2, mirror
// boundary), applied along every axis.
std::vector<double> bspline_prefilter(std::span<const float> v, const Dims3& dims);

}  // namespace voxsr
