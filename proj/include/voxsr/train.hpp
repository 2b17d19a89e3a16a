#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "voxsr/degrade.hpp"
#include "voxsr/net.hpp"
#include "voxsr/volume.hpp"

namespace voxsr {

struct TrainConfig {
    double alpha = 0.01;  // TV weight; 0 gives the plain deep-image-prior loss
    double factor = 2.0;
    double lr0 = 1e-3;
    int plateau_patience = 5;
    double plateau_threshold = 1e-3;  // relative improvement that resets patience
    double lr_halving_floor = 1e-5;
    int epochs = 200;
    int batch = 1;  // volumes whose gradients are averaged per Adam step
    std::uint64_t seed = 0;
    double tv_epsilon = 1e-8;
    // When set, fit() replaces NetConfig::intensity_scale with the largest
    // absolute LR intensity in the dataset.
    bool auto_intensity_scale = true;

    void validate() const;
};

template <class T>
struct LossResult {
    double total = 0.0;
    double fidelity = 0.0;
    double tv_term = 0.0;  // unweighted TV of the estimate
    BasicNetworkParams<T> d_params;
};

// L = ||x - B f(x)||^2 + alpha * TV(f(x)), summed over voxels.
template <class T>
LossResult<T> loss(const Volume3& x_lr, const BasicNetworkParams<T>& params, const NetConfig& net_cfg,
                   const DegradationOp& op, double alpha, double tv_eps);

struct AdamState {
    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double eps = 1e-8;

    std::vector<std::vector<float>> m;  // per tensor: weight then bias of each layer
    std::vector<std::vector<float>> v;
    long step = 0;

    static AdamState for_params(const NetworkParams& p);
};

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, double lr);

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    double fidelity = 0.0;
    double tv = 0.0;
    double lr = 0.0;
    bool operator==(const EpochRecord&) const = default;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    double wall_seconds = 0.0;

    // epoch,loss,fidelity,tv,lr with round-trip precision; excludes wall time
    // so identical runs serialise identically.
    std::string to_csv() const;
    std::string to_json() const;
};

struct FitResult {
    NetConfig net_cfg;
    NetworkParams params;
    TrainReport report;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Each epoch visits every frame of every series once in a seeded random
// order. The epoch loss is the mean of the per-step losses (evaluated
// before each update); the returned params are those at the end of the
// epoch with the lowest epoch loss.
FitResult fit(const std::vector<Series4>& dataset, NetConfig net_cfg, const TrainConfig& train_cfg,
              const DegradationOp& op, const EpochCallback& on_epoch = {});

struct Checkpoint {
    NetConfig net_cfg;
    NetworkParams params;
};

// Binary layout: "VOXSRCKPT", u32 version, config, u32 tensor count, then per
// tensor u32 rank, u32 dims, f32 payload (little-endian).
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Volume3 infer(const Volume3& x_lr, const Checkpoint& ckpt);

}  // namespace voxsr
