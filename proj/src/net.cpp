#include "voxsr/net.hpp"

#include <algorithm>
#include <cblas.h>
#include <cmath>

#include "voxsr/interp.hpp"
#include "voxsr/rng.hpp"

namespace voxsr {

void NetConfig::validate() const {
    if (kernel != 3) throw ConfigError("only kernel size 3 is supported, got " + std::to_string(kernel));
    if (layers < 1) throw ConfigError("network needs at least one dense layer");
    if (channels < 1) throw ConfigError("network needs at least one channel");
    if (!(factor >= 1.25 - 1e-12 && factor <= 2.0 + 1e-12)) {
        throw ConfigError("network factor must lie in [1.25, 2], got " + std::to_string(factor));
    }
    if (!(intensity_scale > 0.0) || !std::isfinite(intensity_scale)) {
        throw ConfigError("intensity scale must be positive and finite");
    }
}

Grid3 output_grid(const Grid3& lr, const NetConfig& cfg) { return upsampled_grid(lr, cfg.factor); }

template <class T>
std::size_t BasicNetworkParams<T>::count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

template <class T>
BasicNetworkParams<T> BasicNetworkParams<T>::zeros_like() const {
    BasicNetworkParams out;
    for (const auto& l : layers) {
        out.layers.push_back({l.in_ch, l.out_ch, std::vector<T>(l.weight.size(), T(0)), std::vector<T>(l.bias.size(), T(0))});
    }
    return out;
}

template <class T>
bool BasicNetworkParams<T>::all_finite() const {
    const auto finite = [](T v) { return std::isfinite(v); };
    return std::all_of(layers.begin(), layers.end(), [&](const ConvLayer<T>& l) {
        return std::all_of(l.weight.begin(), l.weight.end(), finite) && std::all_of(l.bias.begin(), l.bias.end(), finite);
    });
}

template <class T>
void BasicNetworkParams<T>::check_against(const NetConfig& cfg) const {
    cfg.validate();
    const std::size_t expect_layers = static_cast<std::size_t>(cfg.layers) + 2;
    if (layers.size() != expect_layers) {
        throw SizeError("params hold " + std::to_string(layers.size()) + " conv layers, config needs " +
                        std::to_string(expect_layers));
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        int in = 0, out = cfg.channels;
        if (l == 0) in = 1;
        else if (l + 1 == layers.size()) in = (cfg.layers + 1) * cfg.channels, out = 1;
        else in = static_cast<int>(l) * cfg.channels;
        const auto& L = layers[l];
        if (L.in_ch != in || L.out_ch != out || L.weight.size() != static_cast<std::size_t>(in) * out * 27 ||
            L.bias.size() != static_cast<std::size_t>(out)) {
            throw SizeError("conv layer " + std::to_string(l) + " has shape " + std::to_string(L.out_ch) + "x" +
                            std::to_string(L.in_ch) + ", expected " + std::to_string(out) + "x" + std::to_string(in));
        }
    }
}

template struct BasicNetworkParams<float>;
template struct BasicNetworkParams<double>;

namespace {

void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda, const float* b, int ldb,
          float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda,
                b, ldb, beta, c, ldc);
}

void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda, const double* b, int ldb,
          double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda,
                b, ldb, beta, c, ldc);
}

// Spatial grid with a one-voxel zero halo, flattened. Every tap of a 3x3x3
// stencil is then a constant offset, so a conv layer is 27 GEMMs over the
// column range [q0, q0 + ncols) that covers all interior voxels.
struct PadGeom {
    std::size_t wx = 0, wy = 0, wz = 0, np = 0, q0 = 0, ncols = 0;
    std::array<long, 27> off{};
    std::vector<unsigned char> interior;

    explicit PadGeom(const Dims3& d) : wx(d[0] + 2), wy(d[1] + 2), wz(d[2] + 2) {
        np = wx * wy * wz;
        q0 = 1 + wx + wx * wy;
        ncols = np - 2 * q0;
        int t = 0;
        for (long dz = -1; dz <= 1; ++dz)
            for (long dy = -1; dy <= 1; ++dy)
                for (long dx = -1; dx <= 1; ++dx)
                    off[t++] = dz * static_cast<long>(wx * wy) + dy * static_cast<long>(wx) + dx;
        interior.assign(np, 0);
        for (std::size_t k = 1; k + 1 < wz; ++k)
            for (std::size_t j = 1; j + 1 < wy; ++j)
                for (std::size_t i = 1; i + 1 < wx; ++i) interior[i + wx * (j + wy * k)] = 1;
    }

    std::size_t padded(std::size_t i, std::size_t j, std::size_t k) const {
        return (i + 1) + wx * ((j + 1) + wy * (k + 1));
    }

    template <class F>
    void for_each_voxel(const Dims3& d, F&& f) const {
        std::size_t v = 0;
        for (std::size_t k = 0; k < d[2]; ++k)
            for (std::size_t j = 0; j < d[1]; ++j) {
                std::size_t q = padded(0, j, k);
                for (std::size_t i = 0; i < d[0]; ++i, ++v, ++q) f(v, q);
            }
    }
};

// weight[o][i][t] -> tapped[t][o][i]
template <class T>
std::vector<T> tap_major(const std::vector<T>& w, int out, int in) {
    std::vector<T> r(w.size());
    for (int o = 0; o < out; ++o)
        for (int i = 0; i < in; ++i)
            for (int t = 0; t < 27; ++t)
                r[(static_cast<std::size_t>(t) * out + o) * in + i] = w[(static_cast<std::size_t>(o) * in + i) * 27 + t];
    return r;
}

template <class T>
void conv_forward(const PadGeom& g, T* feat, std::size_t in_row, int in_ch, std::size_t out_row, const ConvLayer<T>& L,
                  bool relu) {
    const auto wt = tap_major(L.weight, L.out_ch, in_ch);
    const int n = static_cast<int>(g.ncols), ld = static_cast<int>(g.np);
    T* out = feat + out_row * g.np;
    for (int o = 0; o < L.out_ch; ++o) std::fill_n(out + o * g.np + g.q0, g.ncols, L.bias[o]);
    const T* in = feat + in_row * g.np;
    for (int t = 0; t < 27; ++t) {
        gemm(false, false, L.out_ch, n, in_ch, T(1), wt.data() + static_cast<std::size_t>(t) * L.out_ch * in_ch, in_ch,
             in + static_cast<long>(g.q0) + g.off[t], ld, T(1), out + g.q0, ld);
    }
    for (int o = 0; o < L.out_ch; ++o) {
        T* row = out + o * g.np;
        for (std::size_t q = g.q0; q < g.q0 + g.ncols; ++q) {
            const T v = g.interior[q] ? row[q] : T(0);
            row[q] = relu ? std::max(v, T(0)) : v;
        }
    }
}

// dfeat rows [out_row, out_row + out_ch) hold d(output); they are turned into
// d(pre-activation) in place. Gradients w.r.t. the input rows accumulate.
template <class T>
void conv_backward(const PadGeom& g, const T* feat, T* dfeat, std::size_t in_row, int in_ch, std::size_t out_row,
                   const ConvLayer<T>& L, bool relu, ConvLayer<T>& dL) {
    const auto wt = tap_major(L.weight, L.out_ch, in_ch);
    const int n = static_cast<int>(g.ncols), ld = static_cast<int>(g.np);
    T* dz = dfeat + out_row * g.np;
    const T* out = feat + out_row * g.np;
    for (int o = 0; o < L.out_ch; ++o) {
        T* row = dz + o * g.np;
        const T* act = out + o * g.np;
        double bsum = 0.0;
        for (std::size_t q = g.q0; q < g.q0 + g.ncols; ++q) {
            const bool pass = relu ? act[q] > T(0) : g.interior[q] != 0;
            row[q] = pass ? row[q] : T(0);
            bsum += row[q];
        }
        dL.bias[o] += static_cast<T>(bsum);
    }
    const T* in = feat + in_row * g.np;
    T* din = dfeat + in_row * g.np;
    std::vector<T> dwt(static_cast<std::size_t>(L.out_ch) * in_ch);
    for (int t = 0; t < 27; ++t) {
        gemm(false, true, L.out_ch, in_ch, n, T(1), dz + g.q0, ld, in + static_cast<long>(g.q0) + g.off[t], ld, T(0),
             dwt.data(), in_ch);
        for (int o = 0; o < L.out_ch; ++o)
            for (int i = 0; i < in_ch; ++i)
                dL.weight[(static_cast<std::size_t>(o) * in_ch + i) * 27 + t] += dwt[static_cast<std::size_t>(o) * in_ch + i];
        gemm(true, false, in_ch, n, L.out_ch, T(1), wt.data() + static_cast<std::size_t>(t) * L.out_ch * in_ch, in_ch,
             dz + g.q0, ld, T(1), din + static_cast<long>(g.q0) + g.off[t], ld);
    }
}

}  // namespace

template <class T>
struct NetKernels {
    static std::size_t rows(const NetConfig& cfg) {
        return 2 + static_cast<std::size_t>(cfg.layers + 1) * static_cast<std::size_t>(cfg.channels);
    }

    static std::size_t in_row(std::size_t layer) { return layer == 0 ? 0 : 1; }
    static std::size_t out_row(const NetConfig& cfg, std::size_t layer) {
        return 1 + layer * static_cast<std::size_t>(cfg.channels);
    }

    static BasicVolume<T> forward(const Volume3& x_lr, const BasicNetworkParams<T>& params, const NetConfig& cfg,
                                  Tape<T>* tape) {
        params.check_against(cfg);
        const Volume3 u = upsample(x_lr, cfg.factor, InterpMethod::trilinear);
        const Grid3 hr = u.grid();
        const Dims3 d = hr.dims();
        const PadGeom g(d);
        std::vector<T> feat(rows(cfg) * g.np, T(0));
        const T inv_scale = static_cast<T>(1.0 / cfg.intensity_scale);
        g.for_each_voxel(d, [&](std::size_t v, std::size_t q) { feat[q] = static_cast<T>(u[v]) * inv_scale; });

        const std::size_t nl = params.layers.size();
        for (std::size_t l = 0; l < nl; ++l) {
            const auto& L = params.layers[l];
            conv_forward(g, feat.data(), in_row(l), L.in_ch, out_row(cfg, l), L, l + 1 < nl);
        }

        BasicVolume<T> y(hr, T(0));
        const T* res = feat.data() + out_row(cfg, nl - 1) * g.np;
        const T scale = static_cast<T>(cfg.intensity_scale);
        g.for_each_voxel(d, [&](std::size_t v, std::size_t q) {
            y[v] = (cfg.global_residual ? static_cast<T>(u[v]) : T(0)) + scale * res[q];
        });

        if (tape) {
            tape->cfg_ = cfg;
            tape->lr_grid_ = x_lr.grid();
            tape->hr_grid_ = hr;
            tape->params_ = &params;
            tape->features_ = std::move(feat);
            tape->recorded_ = true;
            tape->consumed_ = false;
        }
        return y;
    }

    static Gradients<T> backward(Tape<T>& tape, const BasicVolume<T>& d_output) {
        if (!tape.recorded_) throw StateError("backward called with a tape that was never recorded");
        if (tape.consumed_) throw StateError("tape already consumed by a previous backward call");
        tape.consumed_ = true;
        if (!d_output.grid().same_shape(tape.hr_grid_)) {
            throw SizeError("d_output grid " + d_output.grid().describe() + " does not match forward output " +
                            tape.hr_grid_.describe());
        }
        const NetConfig& cfg = tape.cfg_;
        const auto& params = *tape.params_;
        const Dims3 d = tape.hr_grid_.dims();
        const PadGeom g(d);
        std::vector<T> dfeat(tape.features_.size(), T(0));
        const std::size_t nl = params.layers.size();
        const T scale = static_cast<T>(cfg.intensity_scale);
        T* dres = dfeat.data() + out_row(cfg, nl - 1) * g.np;
        g.for_each_voxel(d, [&](std::size_t v, std::size_t q) { dres[q] = scale * d_output[v]; });

        Gradients<T> grads{params.zeros_like(), {}};
        for (std::size_t l = nl; l-- > 0;) {
            const auto& L = params.layers[l];
            conv_backward(g, tape.features_.data(), dfeat.data(), in_row(l), L.in_ch, out_row(cfg, l), L, l + 1 < nl,
                          grads.params.layers[l]);
        }

        std::vector<T> du(tape.hr_grid_.voxels());
        const T inv_scale = static_cast<T>(1.0 / cfg.intensity_scale);
        g.for_each_voxel(d, [&](std::size_t v, std::size_t q) {
            du[v] = (cfg.global_residual ? d_output[v] : T(0)) + dfeat[q] * inv_scale;
        });
        const SeparableOp up = make_upsampler(tape.lr_grid_, cfg.factor, InterpMethod::trilinear);
        grads.input = BasicVolume<T>(tape.lr_grid_, up.apply_adjoint<T>(du));
        tape.features_.clear();
        tape.features_.shrink_to_fit();
        return grads;
    }

    static FeatureBlock<T> conv3(const FeatureBlock<T>& input, int out_ch, const std::vector<T>& weight,
                                 const std::vector<T>& bias) {
        if (input.channels < 1 || out_ch < 1) throw SizeError("conv3 needs at least one input and output channel");
        if (input.data.size() != static_cast<std::size_t>(input.channels) * input.voxels()) {
            throw SizeError("conv3 input block data does not match its shape");
        }
        if (weight.size() != static_cast<std::size_t>(out_ch) * input.channels * 27 ||
            bias.size() != static_cast<std::size_t>(out_ch)) {
            throw SizeError("conv3 weight/bias shape does not match " + std::to_string(out_ch) + "x" +
                            std::to_string(input.channels) + "x3x3x3");
        }
        const PadGeom g(input.dims);
        std::vector<T> feat(static_cast<std::size_t>(input.channels + out_ch) * g.np, T(0));
        for (int c = 0; c < input.channels; ++c) {
            T* row = feat.data() + static_cast<std::size_t>(c) * g.np;
            const T* src = input.data.data() + static_cast<std::size_t>(c) * input.voxels();
            g.for_each_voxel(input.dims, [&](std::size_t v, std::size_t q) { row[q] = src[v]; });
        }
        const ConvLayer<T> L{input.channels, out_ch, weight, bias};
        conv_forward(g, feat.data(), 0, input.channels, static_cast<std::size_t>(input.channels), L, false);
        FeatureBlock<T> out(out_ch, input.dims);
        for (int c = 0; c < out_ch; ++c) {
            const T* row = feat.data() + static_cast<std::size_t>(input.channels + c) * g.np;
            T* dst = out.data.data() + static_cast<std::size_t>(c) * out.voxels();
            g.for_each_voxel(input.dims, [&](std::size_t v, std::size_t q) { dst[v] = row[q]; });
        }
        return out;
    }
};

template <class T>
FeatureBlock<T> conv3(const FeatureBlock<T>& input, int out_ch, const std::vector<T>& weight, const std::vector<T>& bias) {
    return NetKernels<T>::conv3(input, out_ch, weight, bias);
}

template <class T>
BasicVolume<T> forward(const Volume3& x_lr, const BasicNetworkParams<T>& params, const NetConfig& cfg, Tape<T>* tape) {
    return NetKernels<T>::forward(x_lr, params, cfg, tape);
}

template <class T>
Gradients<T> backward(Tape<T>& tape, const BasicVolume<T>& d_output) {
    return NetKernels<T>::backward(tape, d_output);
}

template FeatureBlock<float> conv3(const FeatureBlock<float>&, int, const std::vector<float>&, const std::vector<float>&);
template FeatureBlock<double> conv3(const FeatureBlock<double>&, int, const std::vector<double>&,
                                    const std::vector<double>&);
template BasicVolume<float> forward(const Volume3&, const BasicNetworkParams<float>&, const NetConfig&, Tape<float>*);
template BasicVolume<double> forward(const Volume3&, const BasicNetworkParams<double>&, const NetConfig&, Tape<double>*);
template Gradients<float> backward(Tape<float>&, const BasicVolume<float>&);
template Gradients<double> backward(Tape<double>&, const BasicVolume<double>&);

NetworkParams init_params(const NetConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    NetworkParams p;
    const int total = cfg.layers + 2;
    for (int l = 0; l < total; ++l) {
        int in = 0, out = cfg.channels;
        if (l == 0) in = 1;
        else if (l + 1 == total) in = (cfg.layers + 1) * cfg.channels, out = 1;
        else in = l * cfg.channels;
        ConvLayer<float> L{in, out, std::vector<float>(static_cast<std::size_t>(in) * out * 27, 0.0f),
                           std::vector<float>(static_cast<std::size_t>(out), 0.0f)};
        if (l + 1 < total) {
            const double sd = std::sqrt(2.0 / (27.0 * in));
            const std::uint64_t stream = rng::derive(seed, static_cast<std::uint64_t>(l));
            for (std::size_t i = 0; i < L.weight.size(); ++i) L.weight[i] = static_cast<float>(sd * rng::normal(stream, i));
        }
        p.layers.push_back(std::move(L));
    }
    return p;
}

}  // namespace voxsr
