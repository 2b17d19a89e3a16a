#include "voxsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace voxsr {

namespace {

void require_same_grid(const Volume3& a, const Volume3& b, const char* what) {
    if (!a.grid().same_shape(b.grid())) {
        throw SizeError(std::string(what) + ": grid mismatch " + a.grid().describe() + " vs " + b.grid().describe());
    }
}

void require_binary(const Volume3& v, const char* what) {
    for (float x : v.values()) {
        if (x != 0.0f && x != 1.0f) throw ArgumentError(std::string(what) + ": map is not binary (value " + std::to_string(x) + ")");
    }
}

// Inclusive-prefix 3D summed-area table with a zero leading plane per axis.
class BoxSums {
public:
    template <class F>
    BoxSums(const Dims3& d, F&& value) : nx_(d[0] + 1), ny_(d[1] + 1), nz_(d[2] + 1), s_(nx_ * ny_ * nz_, 0.0) {
        for (std::size_t k = 1; k < nz_; ++k)
            for (std::size_t j = 1; j < ny_; ++j)
                for (std::size_t i = 1; i < nx_; ++i) {
                    const std::size_t v = (i - 1) + d[0] * ((j - 1) + d[1] * (k - 1));
                    s_[idx(i, j, k)] = value(v) + s_[idx(i - 1, j, k)] + s_[idx(i, j - 1, k)] + s_[idx(i, j, k - 1)] -
                                       s_[idx(i - 1, j - 1, k)] - s_[idx(i - 1, j, k - 1)] - s_[idx(i, j - 1, k - 1)] +
                                       s_[idx(i - 1, j - 1, k - 1)];
                }
    }

    // Sum over [i, i+w) x [j, j+w) x [k, k+w).
    double box(std::size_t i, std::size_t j, std::size_t k, std::size_t w) const {
        const std::size_t i1 = i + w, j1 = j + w, k1 = k + w;
        return s_[idx(i1, j1, k1)] - s_[idx(i, j1, k1)] - s_[idx(i1, j, k1)] - s_[idx(i1, j1, k)] + s_[idx(i, j, k1)] +
               s_[idx(i, j1, k)] + s_[idx(i1, j, k)] - s_[idx(i, j, k)];
    }

private:
    std::size_t idx(std::size_t i, std::size_t j, std::size_t k) const { return i + nx_ * (j + ny_ * k); }
    std::size_t nx_, ny_, nz_;
    std::vector<double> s_;
};

}  // namespace

double RangePolicy::resolve(const Volume3& gt) const {
    if (kind == Kind::explicit_value) return value;
    const auto s = stats(gt);
    return kind == Kind::gt_max ? s.max : s.max - s.min;
}

std::string RangePolicy::describe() const {
    switch (kind) {
        case Kind::gt_max_minus_min: return "gt_max_minus_min";
        case Kind::gt_max: return "gt_max";
        case Kind::explicit_value: {
            std::ostringstream os;
            os << value;
            return os.str();
        }
    }
    return "?";
}

double psnr(const Volume3& gt, const Volume3& est, const RangePolicy& range, const Volume3* mask) {
    require_same_grid(gt, est, "psnr");
    if (mask) require_same_grid(gt, *mask, "psnr mask");
    double se = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (mask && (*mask)[i] == 0.0f) continue;
        const double d = static_cast<double>(gt[i]) - est[i];
        se += d * d;
        ++n;
    }
    if (n == 0) throw ArgumentError("psnr: mask selects no voxels");
    if (se == 0.0) return kPsnrCapDb;
    const double r = range.resolve(gt);
    if (!(r > 0.0)) throw ArgumentError("psnr: data range must be positive (got " + std::to_string(r) + ")");
    const double mse = se / static_cast<double>(n);
    return std::min(kPsnrCapDb, 10.0 * std::log10(r * r / mse));
}

double ssim3d(const Volume3& gt, const Volume3& est, const RangePolicy& range, const SsimParams& p, const Volume3* mask) {
    require_same_grid(gt, est, "ssim3d");
    if (mask) require_same_grid(gt, *mask, "ssim3d mask");
    const Dims3 d = gt.grid().dims();
    if (p.window < 1) throw ArgumentError("ssim3d: window must be >= 1");
    const auto w = static_cast<std::size_t>(p.window);
    if (d[0] < w || d[1] < w || d[2] < w) {
        throw SizeError("ssim3d: volume " + gt.grid().describe() + " is smaller than the " + std::to_string(w) + "^3 window");
    }
    if (std::equal(gt.data().begin(), gt.data().end(), est.data().begin())) return 1.0;
    const double r = range.resolve(gt);
    if (!(r > 0.0)) throw ArgumentError("ssim3d: data range must be positive (got " + std::to_string(r) + ")");
    const double c1 = (p.k1 * r) * (p.k1 * r), c2 = (p.k2 * r) * (p.k2 * r);

    const BoxSums sx(d, [&](std::size_t v) { return static_cast<double>(gt[v]); });
    const BoxSums sy(d, [&](std::size_t v) { return static_cast<double>(est[v]); });
    const BoxSums sxx(d, [&](std::size_t v) { return static_cast<double>(gt[v]) * gt[v]; });
    const BoxSums syy(d, [&](std::size_t v) { return static_cast<double>(est[v]) * est[v]; });
    const BoxSums sxy(d, [&](std::size_t v) { return static_cast<double>(gt[v]) * est[v]; });

    const double inv = 1.0 / static_cast<double>(w * w * w);
    const std::size_t half = w / 2;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k + w <= d[2]; ++k)
        for (std::size_t j = 0; j + w <= d[1]; ++j)
            for (std::size_t i = 0; i + w <= d[0]; ++i) {
                if (mask && mask->at(i + half, j + half, k + half) == 0.0f) continue;
                const double mx = sx.box(i, j, k, w) * inv, my = sy.box(i, j, k, w) * inv;
                const double vx = std::max(0.0, sxx.box(i, j, k, w) * inv - mx * mx);
                const double vy = std::max(0.0, syy.box(i, j, k, w) * inv - my * my);
                const double cxy = sxy.box(i, j, k, w) * inv - mx * my;
                total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++count;
            }
    if (count == 0) throw ArgumentError("ssim3d: mask selects no full windows");
    return total / static_cast<double>(count);
}

QualityReport evaluate_quality(const Volume3& gt, const Volume3& est, const RangePolicy& range, const Volume3* mask) {
    QualityReport q;
    q.data_range = range.resolve(gt);
    q.psnr_db = psnr(gt, est, range, mask);
    q.ssim = ssim3d(gt, est, range, {}, mask);
    return q;
}

Confusion confusion(const Volume3& gt_map, const Volume3& est_map) {
    require_same_grid(gt_map, est_map, "confusion");
    require_binary(gt_map, "confusion (gt)");
    require_binary(est_map, "confusion (est)");
    Confusion c;
    for (std::size_t i = 0; i < gt_map.size(); ++i) {
        const bool g = gt_map[i] != 0.0f, e = est_map[i] != 0.0f;
        if (g && e) ++c.tp;
        else if (!g && e) ++c.fp;
        else if (g && !e) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double jaccard(const Volume3& a, const Volume3& b) {
    const Confusion c = confusion(a, b);
    const std::size_t uni = c.tp + c.fp + c.fn;
    return uni == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(uni);
}

AccFdr acc_fdr(const Volume3& gt_map, const Volume3& est_map) {
    const Confusion c = confusion(gt_map, est_map);
    AccFdr r;
    r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    r.fdr = (c.fp + c.tp) == 0 ? 0.0 : static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tp);
    return r;
}

}  // namespace voxsr
