#include "voxsr/funcmap.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace voxsr {

namespace {

Volume3 temporal_mean(const Series4& series) {
    const Grid3& g = series.grid();
    std::vector<double> acc(g.voxels(), 0.0);
    for (const auto& f : series.frames())
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f[i];
    Volume3 mean(g, 0.0f);
    const double inv = 1.0 / static_cast<double>(series.timepoints());
    for (std::size_t i = 0; i < acc.size(); ++i) mean[i] = static_cast<float>(acc[i] * inv);
    return mean;
}

}  // namespace

Volume3 automask(const Series4& series) {
    const Volume3 mean = temporal_mean(series);
    const Grid3& g = mean.grid();
    std::vector<double> sorted(mean.values().begin(), mean.values().end());
    std::sort(sorted.begin(), sorted.end());
    if (!(sorted.back() > 0.0)) throw AnalysisError("automask: series has no positive voxels, mask would be empty");

    // Otsu: split the sorted intensities where the between-class variance
    // w0 * w1 * (mu0 - mu1)^2 peaks. Voxels strictly above the split value
    // form the candidate foreground.
    const std::size_t n = sorted.size();
    double total = 0.0;
    for (double v : sorted) total += v;
    double thr = 0.0, best = -1.0, below = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        below += sorted[k - 1];
        if (sorted[k] == sorted[k - 1]) continue;
        const double w0 = static_cast<double>(k), w1 = static_cast<double>(n - k);
        const double d = below / w0 - (total - below) / w1;
        const double score = w0 * w1 * d * d;
        if (score > best) {
            best = score;
            thr = sorted[k - 1];
        }
    }
    // A single intensity level leaves nothing to split.
    const bool flat = best < 0.0;

    std::vector<unsigned char> cand(g.voxels(), 0);
    for (std::size_t i = 0; i < cand.size(); ++i) cand[i] = mean[i] > 0.0f && (flat || mean[i] > thr);

    // Largest 6-connected component; ties resolved by lowest starting index.
    std::vector<int> label(g.voxels(), -1);
    int best_label = -1;
    std::size_t best_size = 0;
    int next = 0;
    std::deque<std::size_t> queue;
    for (std::size_t s = 0; s < cand.size(); ++s) {
        if (!cand[s] || label[s] >= 0) continue;
        const int lab = next++;
        std::size_t size = 0;
        label[s] = lab;
        queue.push_back(s);
        while (!queue.empty()) {
            const std::size_t p = queue.front();
            queue.pop_front();
            ++size;
            const std::size_t i = p % g.nx, j = (p / g.nx) % g.ny, k = p / (g.nx * g.ny);
            const auto visit = [&](std::size_t q) {
                if (cand[q] && label[q] < 0) {
                    label[q] = lab;
                    queue.push_back(q);
                }
            };
            if (i > 0) visit(p - 1);
            if (i + 1 < g.nx) visit(p + 1);
            if (j > 0) visit(p - g.nx);
            if (j + 1 < g.ny) visit(p + g.nx);
            if (k > 0) visit(p - g.nx * g.ny);
            if (k + 1 < g.nz) visit(p + g.nx * g.ny);
        }
        if (size > best_size) {
            best_size = size;
            best_label = lab;
        }
    }
    if (best_label < 0) throw AnalysisError("automask: no voxel reaches the clip threshold");
    Volume3 mask(g, 0.0f);
    for (std::size_t i = 0; i < label.size(); ++i) mask[i] = label[i] == best_label ? 1.0f : 0.0f;
    return mask;
}

std::vector<std::size_t> seed_voxels(const Grid3& g, const SeedSpec& seed) {
    if (!(seed.radius_mm > 0.0)) throw ArgumentError("seed radius must be > 0");
    std::vector<std::size_t> out;
    const double r2 = seed.radius_mm * seed.radius_mm;
    for (std::size_t k = 0; k < g.nz; ++k)
        for (std::size_t j = 0; j < g.ny; ++j)
            for (std::size_t i = 0; i < g.nx; ++i) {
                const double dx = static_cast<double>(i) * g.sx - seed.center_mm[0];
                const double dy = static_cast<double>(j) * g.sy - seed.center_mm[1];
                const double dz = static_cast<double>(k) * g.sz - seed.center_mm[2];
                if (dx * dx + dy * dy + dz * dz <= r2) out.push_back(g.index(i, j, k));
            }
    return out;
}

FuncMap seed_correlation(const Series4& series, const SeedSpec& seed, const Volume3& mask) {
    const Grid3& g = series.grid();
    if (!mask.grid().same_shape(g)) throw SizeError("seed_correlation: mask grid does not match series grid");
    const std::size_t t = series.timepoints();
    if (t < 3) throw ArgumentError("seed_correlation needs at least 3 timepoints, got " + std::to_string(t));
    const auto sv = seed_voxels(g, seed);
    if (sv.empty()) throw ArgumentError("seed sphere contains no voxel centre");
    if (std::none_of(sv.begin(), sv.end(), [&](std::size_t v) { return mask[v] != 0.0f; })) {
        throw ArgumentError("seed sphere does not intersect the analysis mask");
    }

    std::vector<double> s(t, 0.0);
    for (std::size_t f = 0; f < t; ++f) {
        double acc = 0.0;
        for (std::size_t v : sv) acc += series.frame(f)[v];
        s[f] = acc / static_cast<double>(sv.size());
    }
    double smean = 0.0;
    for (double x : s) smean += x;
    smean /= static_cast<double>(t);
    double sss = 0.0, scale = 0.0;
    for (double& x : s) {
        scale = std::max(scale, std::fabs(x));
        x -= smean;
        sss += x * x;
    }
    if (!(sss > 1e-24 * static_cast<double>(t) * std::max(1.0, scale * scale))) {
        throw AnalysisError("seed time course has zero variance");
    }
    const double snorm = std::sqrt(sss);

    FuncMap map;
    map.grid = g;
    map.mask = mask;
    map.r.assign(g.voxels(), 0.0f);
    std::vector<double> x(t);
    for (std::size_t v = 0; v < g.voxels(); ++v) {
        if (mask[v] == 0.0f) continue;
        double mean = 0.0, peak = 0.0;
        for (std::size_t f = 0; f < t; ++f) {
            x[f] = series.frame(f)[v];
            mean += x[f];
            peak = std::max(peak, std::fabs(x[f]));
        }
        mean /= static_cast<double>(t);
        double sxx = 0.0, sxs = 0.0;
        for (std::size_t f = 0; f < t; ++f) {
            const double c = x[f] - mean;
            sxx += c * c;
            sxs += c * s[f];
        }
        if (!(sxx > 1e-24 * static_cast<double>(t) * std::max(1.0, peak * peak))) continue;
        map.r[v] = static_cast<float>(std::clamp(sxs / (std::sqrt(sxx) * snorm), -1.0, 1.0));
    }
    return map;
}

Volume3 threshold_map(const FuncMap& map, double r_min) {
    Volume3 out(map.grid, 0.0f);
    for (std::size_t v = 0; v < out.size(); ++v) {
        out[v] = (map.mask[v] != 0.0f && static_cast<double>(map.r[v]) >= r_min) ? 1.0f : 0.0f;
    }
    return out;
}

MapComparison compare_maps(const Volume3& gt_map, const Volume3& est_map) {
    if (!gt_map.grid().same_shape(est_map.grid())) {
        throw SizeError("compare_maps: grid mismatch " + gt_map.grid().describe() + " vs " + est_map.grid().describe());
    }
    const AccFdr af = acc_fdr(gt_map, est_map);
    return {af.accuracy, af.fdr, jaccard(gt_map, est_map)};
}

Series4 detrend_quadratic(const Series4& series) {
    const std::size_t t = series.timepoints();
    if (t < 3) throw ArgumentError("detrend needs at least 3 timepoints");
    // Orthonormal linear and quadratic bases orthogonal to the constant.
    std::vector<double> p1(t), p2(t);
    const double tm = 0.5 * static_cast<double>(t - 1);
    for (std::size_t f = 0; f < t; ++f) p1[f] = static_cast<double>(f) - tm;
    for (std::size_t f = 0; f < t; ++f) p2[f] = p1[f] * p1[f];
    const auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t f = 0; f < t; ++f) s += a[f] * b[f];
        return s;
    };
    double m2 = 0.0;
    for (double v : p2) m2 += v;
    m2 /= static_cast<double>(t);
    for (double& v : p2) v -= m2;
    const double c12 = dot(p2, p1) / dot(p1, p1);
    for (std::size_t f = 0; f < t; ++f) p2[f] -= c12 * p1[f];
    const double n1 = std::sqrt(dot(p1, p1)), n2 = std::sqrt(dot(p2, p2));
    for (double& v : p1) v /= n1;
    for (double& v : p2) v /= n2;

    const Grid3& g = series.grid();
    std::vector<std::vector<float>> out(t, std::vector<float>(g.voxels()));
    for (std::size_t v = 0; v < g.voxels(); ++v) {
        double a1 = 0.0, a2 = 0.0;
        for (std::size_t f = 0; f < t; ++f) {
            a1 += series.frame(f)[v] * p1[f];
            a2 += series.frame(f)[v] * p2[f];
        }
        for (std::size_t f = 0; f < t; ++f) {
            out[f][v] = static_cast<float>(series.frame(f)[v] - a1 * p1[f] - a2 * p2[f]);
        }
    }
    std::vector<Volume3> frames;
    for (auto& d : out) frames.emplace_back(g, std::move(d));
    return Series4(g, std::move(frames), series.tr_seconds());
}

}  // namespace voxsr
