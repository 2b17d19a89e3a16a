#include "voxsr/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"

#include "voxsr/rng.hpp"

namespace voxsr {

void PhantomSpec::validate() const {
    for (std::size_t n : size) {
        if (n < 8) throw ArgumentError("phantom size must be >= 8 per axis");
    }
    if (!(spacing_mm > 0.0)) throw ArgumentError("phantom spacing must be > 0");
    if (timepoints < 1) throw ArgumentError("phantom needs at least one timepoint");
    if (n_ellipsoids < 0) throw ArgumentError("phantom ellipsoid count must be >= 0");
    if (!(noise_sigma >= 0.0)) throw ArgumentError("phantom noise sigma must be >= 0");
    if (activation.amplitude != 0.0) {
        if (!(activation.radius_vox > 0.0)) throw ArgumentError("activation radius must be > 0");
        if (!(activation.period_frames > 0.0)) throw ArgumentError("activation period must be > 0");
        if (!(std::fabs(activation.amplitude) <= 200.0)) throw ArgumentError("activation amplitude must be <= 200");
    }
}

namespace {

struct Ellipsoid {
    std::array<double, 3> center;
    std::array<double, 3> semi;  // voxels
    double intensity;

    double radius(double i, double j, double k) const {
        const double a = (i - center[0]) / semi[0], b = (j - center[1]) / semi[1], c = (k - center[2]) / semi[2];
        return std::sqrt(a * a + b * b + c * c);
    }
    // Soft indicator with a ~1 voxel tanh edge.
    double soft(double i, double j, double k) const {
        const double r = radius(i, j, k);
        const double scale = std::min({semi[0], semi[1], semi[2]});
        const double x = (r - 1.0) * scale / 0.75;
        return x > 4.0 ? 0.0 : 0.5 * (1.0 - std::tanh(x));
    }
};

constexpr double kHeadIntensity = 450.0;
constexpr double kPeak = 1000.0;

}  // namespace

Phantom generate(const PhantomSpec& spec) {
    spec.validate();
    const Grid3 grid(spec.size[0], spec.size[1], spec.size[2], spec.spacing_mm, spec.spacing_mm, spec.spacing_mm);
    const std::array<double, 3> n{static_cast<double>(grid.nx), static_cast<double>(grid.ny), static_cast<double>(grid.nz)};
    const Ellipsoid head{{0.5 * (n[0] - 1), 0.5 * (n[1] - 1), 0.5 * (n[2] - 1)}, {0.40 * n[0], 0.44 * n[1], 0.38 * n[2]},
                         kHeadIntensity};

    const std::uint64_t blob_seed = rng::derive(spec.seed, 1);
    std::uint64_t ctr = 0;
    const auto uni = [&](double lo, double hi) { return lo + (hi - lo) * rng::uniform(blob_seed, ctr++); };
    std::vector<Ellipsoid> blobs;
    for (int b = 0; b < spec.n_ellipsoids; ++b) {
        // Centre inside the inner 55% of the head ellipsoid.
        std::array<double, 3> dir{uni(-1, 1), uni(-1, 1), uni(-1, 1)};
        const double len = std::max(1e-9, std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]));
        const double rad = 0.55 * std::cbrt(uni(0, 1));
        Ellipsoid e{};
        for (int a = 0; a < 3; ++a) {
            e.center[a] = head.center[a] + head.semi[a] * rad * dir[a] / len;
            e.semi[a] = uni(0.08, 0.20) * n[a];
        }
        e.intensity = (b % 2 == 0) ? uni(150.0, 350.0) : -uni(50.0, 150.0);
        blobs.push_back(e);
    }

    const double amp = spec.activation.amplitude;
    PhantomTruth truth{Volume3(grid, 0.0f), Volume3(grid, 0.0f), Volume3(grid, 0.0f)};
    for (std::size_t k = 0; k < grid.nz; ++k)
        for (std::size_t j = 0; j < grid.ny; ++j)
            for (std::size_t i = 0; i < grid.nx; ++i) {
                const double x = static_cast<double>(i), y = static_cast<double>(j), z = static_cast<double>(k);
                const double h = head.soft(x, y, z);
                double v = kHeadIntensity * h;
                for (const auto& e : blobs) v += e.intensity * e.soft(x, y, z) * h;
                v = std::clamp(v, 0.0, kPeak - std::fabs(amp));
                const std::size_t idx = grid.index(i, j, k);
                truth.static_field[idx] = static_cast<float>(v);
                truth.head_mask[idx] = head.radius(x, y, z) <= 1.0 ? 1.0f : 0.0f;
                if (amp != 0.0) {
                    const auto& c = spec.activation.center_vox;
                    const double d2 = (x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1]) + (z - c[2]) * (z - c[2]);
                    if (d2 <= spec.activation.radius_vox * spec.activation.radius_vox) truth.activation_mask[idx] = 1.0f;
                }
            }
    for (std::size_t v = 0; v < grid.voxels(); ++v) {
        if (truth.activation_mask[v] != 0.0f && truth.head_mask[v] == 0.0f) {
            throw ArgumentError("activation cluster extends outside the head ellipsoid");
        }
    }

    const std::uint64_t noise_seed = rng::derive(spec.seed, 2);
    std::vector<Volume3> frames;
    frames.reserve(spec.timepoints);
    for (std::size_t f = 0; f < spec.timepoints; ++f) {
        Volume3 frame = truth.static_field;
        const double act = amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(f) / spec.activation.period_frames);
        for (std::size_t v = 0; v < grid.voxels(); ++v) {
            double val = frame[v];
            if (truth.activation_mask[v] != 0.0f) val += act;
            if (spec.noise_sigma > 0.0 && truth.head_mask[v] != 0.0f) {
                val += spec.noise_sigma * rng::normal(noise_seed, f * grid.voxels() + v);
            }
            frame[v] = static_cast<float>(std::max(0.0, val));
        }
        frames.push_back(std::move(frame));
    }
    return {Series4(grid, std::move(frames), 3.0), std::move(truth)};
}

std::pair<Series4, Series4> make_lr_pair(const Series4& hr_series, const DegradationOp& op) {
    op.validate();
    const Grid3 lr = downsampled_grid(hr_series.grid(), op.factor);
    const SeparableOp b = make_degradation(hr_series.grid(), op);
    std::vector<Volume3> frames;
    frames.reserve(hr_series.timepoints());
    for (std::size_t f = 0; f < hr_series.timepoints(); ++f) {
        Volume3 x(lr, b.apply<float>(hr_series.frame(f).values()));
        frames.push_back(add_noise(x, op.noise_variance, rng::derive(op.seed, f)));
    }
    return {Series4(lr, std::move(frames), hr_series.tr_seconds()), hr_series};
}

std::vector<std::pair<std::size_t, std::size_t>> run_length_encode(const Volume3& mask) {
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    std::size_t i = 0;
    const std::size_t n = mask.size();
    while (i < n) {
        if (mask[i] == 0.0f) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < n && mask[i] != 0.0f) ++i;
        runs.emplace_back(start, i - start);
    }
    return runs;
}

Volume3 run_length_decode(const Grid3& grid, const std::vector<std::pair<std::size_t, std::size_t>>& runs) {
    Volume3 m(grid, 0.0f);
    for (const auto& [start, len] : runs) {
        if (start + len > m.size()) throw FormatError("run-length entry exceeds grid");
        std::fill_n(m.data().begin() + static_cast<long>(start), len, 1.0f);
    }
    return m;
}

std::string truth_to_json(const PhantomSpec& spec, const PhantomTruth& truth) {
    nlohmann::json j;
    j["size"] = {spec.size[0], spec.size[1], spec.size[2]};
    j["spacing_mm"] = spec.spacing_mm;
    j["timepoints"] = spec.timepoints;
    j["n_ellipsoids"] = spec.n_ellipsoids;
    j["noise_sigma"] = spec.noise_sigma;
    j["seed"] = spec.seed;
    j["activation"] = {{"center_vox", spec.activation.center_vox},
                       {"radius_vox", spec.activation.radius_vox},
                       {"amplitude", spec.activation.amplitude},
                       {"period_frames", spec.activation.period_frames}};
    j["head_mask_rle"] = run_length_encode(truth.head_mask);
    j["activation_mask_rle"] = run_length_encode(truth.activation_mask);
    return j.dump(2);
}

}  // namespace voxsr
