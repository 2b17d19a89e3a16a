#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voxsr/volume.hpp"

namespace voxsr {

// Trilinear front-end, stem conv, `layers` densely connected 3x3x3 conv +
// ReLU layers, and a 1-channel projection. Layer l (1-based) sees the stem
// and the outputs of layers 1..l-1 concatenated; the projection sees all of
// them. Output = upsample(x) + intensity_scale * projection when
// global_residual is set.
struct NetConfig {
    int layers = 10;
    int channels = 24;
    int kernel = 3;
    double factor = 2.0;
    bool global_residual = true;
    // The conv stack sees upsample(x) / intensity_scale.
    double intensity_scale = 1.0;

    void validate() const;
    bool operator==(const NetConfig&) const = default;
};

template <class T>
struct ConvLayer {
    int in_ch = 0;
    int out_ch = 0;
    std::vector<T> weight;  // out_ch x in_ch x 3 x 3 x 3
    std::vector<T> bias;    // out_ch
    bool operator==(const ConvLayer&) const = default;
};

template <class T>
struct BasicNetworkParams {
    // [0] stem, [1..layers] dense layers, [layers + 1] projection.
    std::vector<ConvLayer<T>> layers;

    std::size_t count() const;
    BasicNetworkParams zeros_like() const;
    template <class U>
    BasicNetworkParams<U> cast() const {
        BasicNetworkParams<U> out;
        out.layers.reserve(layers.size());
        for (const auto& l : layers) {
            out.layers.push_back({l.in_ch, l.out_ch, std::vector<U>(l.weight.begin(), l.weight.end()),
                                  std::vector<U>(l.bias.begin(), l.bias.end())});
        }
        return out;
    }
    bool all_finite() const;
    void check_against(const NetConfig& cfg) const;
    bool operator==(const BasicNetworkParams&) const = default;
};

using NetworkParams = BasicNetworkParams<float>;

// Channel axis outermost, then x-fastest spatial order.
template <class T>
struct FeatureBlock {
    int channels = 0;
    Dims3 dims{0, 0, 0};
    std::vector<T> data;

    FeatureBlock() = default;
    FeatureBlock(int c, const Dims3& d) : channels(c), dims(d), data(static_cast<std::size_t>(c) * d[0] * d[1] * d[2]) {}
    std::size_t voxels() const { return dims[0] * dims[1] * dims[2]; }
};

// 3x3x3 cross-correlation, zero padding 1, stride 1.
template <class T>
FeatureBlock<T> conv3(const FeatureBlock<T>& input, int out_ch, const std::vector<T>& weight,
                      const std::vector<T>& bias);

// Activations recorded by forward for one backward call.
template <class T>
class Tape {
public:
    Tape() = default;
    Tape(Tape&&) noexcept = default;
    Tape& operator=(Tape&&) noexcept = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool consumed() const noexcept { return consumed_; }
    bool recorded() const noexcept { return recorded_; }

private:
    template <class U>
    friend struct NetKernels;

    NetConfig cfg_;
    Grid3 lr_grid_;
    Grid3 hr_grid_;
    const BasicNetworkParams<T>* params_ = nullptr;
    std::vector<T> features_;
    bool recorded_ = false;
    bool consumed_ = false;
};

template <class T>
struct Gradients {
    BasicNetworkParams<T> params;
    BasicVolume<T> input;
};

// Weights/biases are consumed in the T precision; the LR input is always
// float (as stored on disk) and upsampled before conversion.
template <class T>
BasicVolume<T> forward(const Volume3& x_lr, const BasicNetworkParams<T>& params, const NetConfig& cfg,
                       Tape<T>* tape = nullptr);

// Gradients of <d_output, forward(x)>. The params passed to forward must
// still be alive.
template <class T>
Gradients<T> backward(Tape<T>& tape, const BasicVolume<T>& d_output);

NetworkParams init_params(const NetConfig& cfg, std::uint64_t seed);

// Output grid for an LR input grid under cfg.factor.
Grid3 output_grid(const Grid3& lr, const NetConfig& cfg);

}  // namespace voxsr
