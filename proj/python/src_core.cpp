#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>

#include "voxsr/degrade.hpp"
#include "voxsr/funcmap.hpp"
#include "voxsr/interp.hpp"
#include "voxsr/metrics.hpp"
#include "voxsr/phantom.hpp"
#include "voxsr/train.hpp"
#include "voxsr/tv.hpp"
#include "voxsr/volume.hpp"

namespace py = pybind11;
using namespace voxsr;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

// NumPy arrays are indexed [z, y, x]; C order then matches the x-fastest
// voxel layout, so data is copied without reordering.
Volume3 to_volume(const Array& a, double spacing) {
    if (a.ndim() != 3) throw py::value_error("expected a 3D array indexed [z, y, x]");
    const Grid3 g(static_cast<std::size_t>(a.shape(2)), static_cast<std::size_t>(a.shape(1)),
                  static_cast<std::size_t>(a.shape(0)), spacing, spacing, spacing);
    return Volume3(g, std::vector<float>(a.data(), a.data() + a.size()));
}

Array to_array(const Volume3& v) {
    const Grid3& g = v.grid();
    Array out({g.nz, g.ny, g.nx});
    std::memcpy(out.mutable_data(), v.values().data(), v.size() * sizeof(float));
    return out;
}

Series4 to_series(const Array& a, double spacing, double tr) {
    if (a.ndim() != 4) throw py::value_error("expected a 4D array indexed [t, z, y, x]");
    const std::size_t t = static_cast<std::size_t>(a.shape(0));
    const std::size_t n = static_cast<std::size_t>(a.size()) / std::max<std::size_t>(t, 1);
    const Grid3 g(static_cast<std::size_t>(a.shape(3)), static_cast<std::size_t>(a.shape(2)),
                  static_cast<std::size_t>(a.shape(1)), spacing, spacing, spacing);
    std::vector<Volume3> frames;
    for (std::size_t f = 0; f < t; ++f) frames.emplace_back(g, std::vector<float>(a.data() + f * n, a.data() + (f + 1) * n));
    return Series4(g, std::move(frames), tr);
}

Array series_array(const Series4& s) {
    const Grid3& g = s.grid();
    Array out({s.timepoints(), g.nz, g.ny, g.nx});
    for (std::size_t f = 0; f < s.timepoints(); ++f) {
        std::memcpy(out.mutable_data() + f * g.voxels(), s.frame(f).values().data(), g.voxels() * sizeof(float));
    }
    return out;
}

RangePolicy range_of(std::optional<double> r) { return r ? RangePolicy::fixed(*r) : RangePolicy::auto_range(); }

DegradationOp make_op(double factor, std::optional<double> sigma, double noise_var, std::uint64_t seed) {
    auto op = DegradationOp::with_default_blur(factor, noise_var, seed);
    if (sigma) op.blur_sigma_vox = {*sigma, *sigma, *sigma};
    return op;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Self-supervised 3D super-resolution toolkit (C++ core).";

    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<SizeError>(m, "SizeError", PyExc_ValueError);
    py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<AnalysisError>(m, "AnalysisError", PyExc_RuntimeError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

    m.def(
        "degrade",
        [](const Array& hr, double factor, std::optional<double> sigma, double noise_var, std::uint64_t seed) {
            const auto op = make_op(factor, sigma, noise_var, seed);
            return to_array(add_noise(downsample(to_volume(hr, 1.0), op), op.noise_variance, op.seed));
        },
        py::arg("hr"), py::arg("factor"), py::arg("sigma") = py::none(), py::arg("noise_var") = 0.0, py::arg("seed") = 0,
        "Blur, downsample by `factor` and add Gaussian noise of variance `noise_var`.");

    m.def(
        "upsample",
        [](const Array& lr, double factor, const std::string& method) {
            return to_array(upsample(to_volume(lr, 1.0), factor, parse_interp_method(method)));
        },
        py::arg("lr"), py::arg("factor"), py::arg("method") = "trilinear");

    m.def(
        "tv_value", [](const Array& v, double eps) { return tv_value(to_volume(v, 1.0), TvConfig{eps}); }, py::arg("volume"),
        py::arg("eps") = 1e-8);

    m.def(
        "psnr",
        [](const Array& gt, const Array& est, std::optional<double> r) {
            return psnr(to_volume(gt, 1.0), to_volume(est, 1.0), range_of(r));
        },
        py::arg("gt"), py::arg("est"), py::arg("data_range") = py::none());
    m.def(
        "ssim3d",
        [](const Array& gt, const Array& est, std::optional<double> r, int window) {
            SsimParams p;
            p.window = window;
            return ssim3d(to_volume(gt, 1.0), to_volume(est, 1.0), range_of(r), p);
        },
        py::arg("gt"), py::arg("est"), py::arg("data_range") = py::none(), py::arg("window") = 7);
    m.def("jaccard", [](const Array& a, const Array& b) { return jaccard(to_volume(a, 1.0), to_volume(b, 1.0)); });
    m.def("acc_fdr", [](const Array& gt, const Array& est) {
        const AccFdr r = acc_fdr(to_volume(gt, 1.0), to_volume(est, 1.0));
        return py::make_tuple(r.accuracy, r.fdr);
    });

    m.def(
        "phantom",
        [](std::size_t size, std::size_t timepoints, double noise_sigma, std::uint64_t seed, double amplitude) {
            PhantomSpec s;
            s.size = {size, size, size};
            s.timepoints = timepoints;
            s.noise_sigma = noise_sigma;
            s.seed = seed;
            s.activation.amplitude = amplitude;
            const double k = static_cast<double>(size) / 32.0;
            s.activation.center_vox = {20.0 * k, 16.0 * k, 16.0 * k};
            s.activation.radius_vox = 4.0 * k;
            const Phantom p = generate(s);
            py::dict truth;
            truth["head_mask"] = to_array(p.truth.head_mask);
            truth["activation_mask"] = to_array(p.truth.activation_mask);
            truth["static"] = to_array(p.truth.static_field);
            return py::make_tuple(series_array(p.series), truth);
        },
        py::arg("size") = 32, py::arg("timepoints") = 20, py::arg("noise_sigma") = 10.0, py::arg("seed") = 0,
        py::arg("amplitude") = 20.0, "Returns (series[t, z, y, x], truth dict).");

    m.def(
        "automask", [](const Array& series) { return to_array(automask(to_series(series, 1.0, 1.0))); }, py::arg("series"));
    m.def(
        "seed_correlation",
        [](const Array& series, std::array<double, 3> center_vox, double radius_vox, std::optional<Array> mask) {
            const Series4 s = to_series(series, 1.0, 1.0);
            const Volume3 msk = mask ? to_volume(*mask, 1.0) : automask(s);
            return to_array(seed_correlation(s, {center_vox, radius_vox}, msk).as_volume());
        },
        py::arg("series"), py::arg("center_xyz"), py::arg("radius") = 3.0, py::arg("mask") = py::none(),
        "Pearson r map against the mean time course of a seed sphere (unit spacing, centre in x, y, z order).");

    m.def("read_series", [](const std::string& path) { return series_array(read_series(path)); });
    m.def(
        "write_series",
        [](const Array& series, const std::string& path, double spacing, double tr) {
            write_series(to_series(series, spacing, tr), path);
        },
        py::arg("series"), py::arg("path"), py::arg("spacing") = 1.0, py::arg("tr") = 1.0);

    m.def(
        "infer",
        [](const std::string& ckpt_path, const Array& lr) { return to_array(infer(to_volume(lr, 1.0), load_checkpoint(ckpt_path))); },
        py::arg("checkpoint"), py::arg("lr"), "Apply a trained checkpoint to one LR volume.");
}
