#pragma once

#include <optional>
#include <string>

#include "voxsr/volume.hpp"

namespace voxsr {

// Peak value R used by PSNR and by the SSIM stabilising constants.
struct RangePolicy {
    enum class Kind { gt_max_minus_min, gt_max, explicit_value };
    Kind kind = Kind::gt_max_minus_min;
    double value = 0.0;

    static RangePolicy auto_range() { return {}; }
    static RangePolicy gt_max() { return {Kind::gt_max, 0.0}; }
    static RangePolicy fixed(double r) { return {Kind::explicit_value, r}; }

    double resolve(const Volume3& gt) const;
    std::string describe() const;
};

inline constexpr double kPsnrCapDb = 200.0;

struct QualityReport {
    double psnr_db = 0.0;
    double ssim = 0.0;
    double data_range = 0.0;
};

// 10 log10(R^2 / MSE); identical inputs return kPsnrCapDb. With a mask only
// voxels where mask != 0 count.
double psnr(const Volume3& gt, const Volume3& est, const RangePolicy& range = {},
            const Volume3* mask = nullptr);

struct SsimParams {
    int window = 7;
    double k1 = 0.01;
    double k2 = 0.03;
};

// Mean SSIM over every full window x window x window block (uniform weights,
// population moments). With a mask only windows centred on mask voxels count.
double ssim3d(const Volume3& gt, const Volume3& est, const RangePolicy& range = {}, const SsimParams& params = {},
              const Volume3* mask = nullptr);

QualityReport evaluate_quality(const Volume3& gt, const Volume3& est, const RangePolicy& range = {},
                               const Volume3* mask = nullptr);

// |a and b| / |a or b|; 1 when both masks are empty. Inputs must be 0/1.
double jaccard(const Volume3& a, const Volume3& b);

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t total() const { return tp + fp + tn + fn; }
};

Confusion confusion(const Volume3& gt_map, const Volume3& est_map);

struct AccFdr {
    double accuracy = 0.0;
    double fdr = 0.0;  // FP / (FP + TP), 0 without positives
};

AccFdr acc_fdr(const Volume3& gt_map, const Volume3& est_map);

}  // namespace voxsr
