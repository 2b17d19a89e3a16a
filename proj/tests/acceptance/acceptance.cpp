// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset; criteria 6, 7 and 9 reuse the criterion 5
// training and run it first when needed.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>

#include "../unit/support.hpp"
#include "voxsr/degrade.hpp"
#include "voxsr/funcmap.hpp"
#include "voxsr/interp.hpp"
#include "voxsr/metrics.hpp"
#include "voxsr/net.hpp"
#include "voxsr/phantom.hpp"
#include "voxsr/train.hpp"
#include "voxsr/tv.hpp"

using namespace voxsr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---------------------------------------------------------------------------

Outcome adjoint_check() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(101);
    const Grid3 hr(12, 12, 12);
    double worst = 0.0;
    for (double f : {1.25, 1.5, 1.75, 2.0}) {
        const auto op = DegradationOp::with_default_blur(f);
        const SeparableOp b = make_degradation(hr, op);
        const Grid3 lr = downsampled_grid(hr, f);
        for (int trial = 0; trial < 100; ++trial) {
            const Volume3 y = testing::random_volume(hr, gen), g = testing::random_volume(lr, gen);
            const Volume3 by(lr, b.apply<float>(y.values()));
            const Volume3 btg(hr, b.apply_adjoint<float>(g.values()));
            const double gap = std::fabs(testing::dot(by, g) - testing::dot(y, btg)) / (testing::norm(by) * testing::norm(g));
            worst = std::max(worst, gap);
        }
    }
    const double t = seconds_since(t0);
    return {worst < 1e-5 && t < 10.0, fmt("operator adjoint: max normalised gap %.3g (< 1e-5), %.2f s (< 10 s)", worst, t)};
}

Outcome tv_gradient_check() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(202);
    const Dims3 d{6, 6, 6};
    const double eps = 1e-6, h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::vector<double> v(216);
        for (double& x : v) x = u(gen);
        std::vector<double> g(216, 0.0);
        detail::tv_gradient_accumulate<double>(v, d, eps, 1.0, g);
        std::vector<double> fd(216);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double keep = v[i];
            v[i] = keep + h;
            const double up = detail::tv_value<double>(v, d, eps);
            v[i] = keep - h;
            const double dn = detail::tv_value<double>(v, d, eps);
            v[i] = keep;
            fd[i] = (up - dn) / (2 * h);
        }
        worst = std::max(worst, testing::block_error(g, fd));
    }
    const double t = seconds_since(t0);
    return {worst < 1e-4 && t < 10.0, fmt("TV gradient vs central differences: max rel err %.3g (< 1e-4), %.2f s (< 10 s)", worst, t)};
}

Outcome net_gradient_check() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(303);
    NetConfig c;
    c.layers = 2;
    c.channels = 4;
    c.factor = 1.5;
    auto p = init_params(c, 1).cast<double>();
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& L : p.layers) {
        const double sd = std::sqrt(2.0 / (27.0 * L.in_ch));
        for (double& w : L.weight) w = sd * n(gen);
        for (double& b : L.bias) b = 0.1 * n(gen);
    }
    const Volume3 x = testing::random_volume(Grid3(6, 6, 6), gen);
    BasicVolume<double> r(output_grid(x.grid(), c));
    for (double& v : r.data()) v = n(gen);
    const auto probe = [&] {
        const auto y = forward<double>(x, p, c);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
        return s;
    };
    Tape<double> tape;
    forward<double>(x, p, c, &tape);
    const auto g = backward<double>(tape, r);
    const double h = 1e-6;
    double worst = 0.0;
    int blocks = 0;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        for (int which = 0; which < 2; ++which) {
            auto& tensor = which == 0 ? p.layers[l].weight : p.layers[l].bias;
            const auto& grad = which == 0 ? g.params.layers[l].weight : g.params.layers[l].bias;
            std::vector<double> fd(tensor.size()), an(grad.begin(), grad.end());
            for (std::size_t i = 0; i < tensor.size(); ++i) {
                const double keep = tensor[i];
                tensor[i] = keep + h;
                const double up = probe();
                tensor[i] = keep - h;
                const double dn = probe();
                tensor[i] = keep;
                fd[i] = (up - dn) / (2 * h);
            }
            worst = std::max(worst, testing::block_error(an, fd));
            ++blocks;
        }
    }
    const double t = seconds_since(t0);
    return {worst < 1e-3 && t < 60.0,
            fmt("network gradients, %d blocks in double mode: max rel err %.3g (< 1e-3), %.2f s (< 60 s)", blocks, worst, t)};
}

Outcome conv_oracle_check() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(404);
    std::uniform_int_distribution<int> ch(1, 5), dim(1, 7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int cin = ch(gen), cout = ch(gen);
        const Dims3 d{static_cast<std::size_t>(dim(gen)), static_cast<std::size_t>(dim(gen)), static_cast<std::size_t>(dim(gen))};
        FeatureBlock<float> in(cin, d);
        for (float& v : in.data) v = static_cast<float>(u(gen));
        std::vector<float> w(static_cast<std::size_t>(cout * cin * 27)), b(static_cast<std::size_t>(cout));
        for (float& v : w) v = static_cast<float>(u(gen));
        for (float& v : b) v = static_cast<float>(u(gen));
        const auto out = conv3<float>(in, cout, w, b);
        const auto ref = testing::conv_oracle(std::vector<double>(in.data.begin(), in.data.end()), cin, d[0], d[1], d[2],
                                              std::vector<double>(w.begin(), w.end()),
                                              std::vector<double>(b.begin(), b.end()), cout);
        for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::fabs(out.data[i] - ref[i]));
    }
    const double t = seconds_since(t0);
    return {worst < 1e-5 && t < 30.0, fmt("conv3 vs nested-loop oracle on 50 blocks: max abs err %.3g (< 1e-5), %.2f s (< 30 s)", worst, t)};
}

// ---------------------------------------------------------------------------
// Desk-scale training shared by criteria 5, 6, 7 and 9.

struct Quality {
    double psnr = 0.0, ssim = 0.0, tv = 0.0;
};

Series4 map_frames(const Series4& in, const std::function<Volume3(const Volume3&)>& fn) {
    std::vector<Volume3> out;
    for (const auto& f : in.frames()) out.push_back(fn(f));
    const Grid3 g = out.front().grid();
    return Series4(g, std::move(out), in.tr_seconds());
}

Quality score(const Series4& gt, const Series4& est) {
    Quality q;
    for (std::size_t t = 0; t < gt.timepoints(); ++t) {
        const auto r = evaluate_quality(gt.frame(t), est.frame(t));
        q.psnr += r.psnr_db;
        q.ssim += r.ssim;
        q.tv += tv_value(est.frame(t));
    }
    const double n = static_cast<double>(gt.timepoints());
    return {q.psnr / n, q.ssim / n, q.tv / n};
}

struct DeskTask {
    Series4 lr, hr;
    DegradationOp op;
};

DeskTask make_desk_task() {
    PhantomSpec ps;
    ps.seed = 1;
    const Phantom ph = generate(ps);
    const auto st = stats(ph.series.frame(0));
    const double lambda = 0.01 * (st.max - st.min);
    const auto op = DegradationOp::with_default_blur(2.0, lambda * lambda, 7);
    auto [lr, hr] = make_lr_pair(ph.series, op);
    return {std::move(lr), std::move(hr), op};
}

FitResult train_desk(const DeskTask& task, double alpha) {
    NetConfig nc;
    nc.layers = 4;
    nc.channels = 8;
    TrainConfig tc;
    tc.factor = 2.0;
    tc.alpha = alpha;
    tc.epochs = 15;
    tc.seed = 3;
    return fit({task.lr}, nc, tc, task.op);
}

struct Shared {
    std::optional<DeskTask> task;
    std::optional<FitResult> proposed;
    double proposed_seconds = 0.0;

    const DeskTask& desk() {
        if (!task) task = make_desk_task();
        return *task;
    }
    const FitResult& trained() {
        if (!proposed) {
            const auto t0 = Clock::now();
            proposed = train_desk(desk(), 0.01);
            proposed_seconds = seconds_since(t0);
        }
        return *proposed;
    }
};

Outcome end_to_end(Shared& s) {
    const auto t0 = Clock::now();
    const auto& res = s.trained();
    const auto& task = s.desk();
    const Checkpoint ck{res.net_cfg, res.params};
    const Quality sr = score(task.hr, map_frames(task.lr, [&](const Volume3& v) { return infer(v, ck); }));
    const Quality tri = score(task.hr, map_frames(task.lr, [](const Volume3& v) { return upsample(v, 2.0, InterpMethod::trilinear); }));
    const double t = seconds_since(t0);
    const bool ok = sr.psnr >= tri.psnr + 0.5 && sr.ssim >= tri.ssim && t <= 1800.0;
    return {ok, fmt("desk-scale x2: proposed PSNR %.3f dB / SSIM %.4f vs trilinear %.3f dB / %.4f (need +0.5 dB, >= SSIM), "
                    "best epoch %d of %zu, %.0f s (<= 1800 s)",
                    sr.psnr, sr.ssim, tri.psnr, tri.ssim, res.report.best_epoch, res.report.epochs.size(), t)};
}

Outcome tv_benefit(Shared& s) {
    const auto t0 = Clock::now();
    const auto& task = s.desk();
    const auto& with_tv = s.trained();
    const FitResult dip = train_desk(task, 0.0);
    const Checkpoint ck_tv{with_tv.net_cfg, with_tv.params}, ck_dip{dip.net_cfg, dip.params};
    const Quality q_tv = score(task.hr, map_frames(task.lr, [&](const Volume3& v) { return infer(v, ck_tv); }));
    const Quality q_dip = score(task.hr, map_frames(task.lr, [&](const Volume3& v) { return infer(v, ck_dip); }));
    const bool ok = q_tv.psnr >= q_dip.psnr - 0.1 && q_tv.tv < q_dip.tv;
    return {ok, fmt("TV benefit: alpha 0.01 PSNR %.3f dB vs alpha 0 %.3f dB (need >= -0.1 dB); mean TV %.1f vs %.1f (need lower), %.0f s",
                    q_tv.psnr, q_dip.psnr, q_tv.tv, q_dip.tv, seconds_since(t0))};
}

Outcome functional(Shared& s) {
    const auto& res = s.trained();
    const auto t0 = Clock::now();
    const Checkpoint ck{res.net_cfg, res.params};
    PhantomSpec fs;
    fs.seed = 1;
    fs.timepoints = 100;
    fs.activation.amplitude = 20.0;
    fs.activation.radius_vox = 4.0;
    fs.noise_sigma = 10.0;
    const Phantom ph = generate(fs);
    const auto op = DegradationOp::with_default_blur(2.0, 100.0, 11);
    const auto [lr, hr] = make_lr_pair(ph.series, op);
    const Series4 sr = map_frames(lr, [&](const Volume3& v) { return infer(v, ck); });

    const Volume3 m_hr = automask(hr), m_sr = automask(sr);
    const Grid3& g = hr.grid();
    const auto& c = fs.activation.center_vox;
    const SeedSpec seed{{c[0] * g.sx, c[1] * g.sy, c[2] * g.sz}, 3.0};
    const Volume3 map_hr = threshold_map(seed_correlation(hr, seed, m_hr), 0.5);
    const Volume3 map_sr = threshold_map(seed_correlation(sr, seed, m_sr), 0.5);
    const MapComparison cmp = compare_maps(map_hr, map_sr);
    const double mask_j = jaccard(m_hr, m_sr);
    const double t = seconds_since(t0);
    const bool ok = cmp.accuracy >= 0.95 && cmp.fdr <= 0.05 && mask_j >= 0.95 && t < 300.0;
    return {ok, fmt("functional maps: accuracy %.4f (>= 0.95), FDR %.4f (<= 0.05), automask Jaccard %.4f (>= 0.95), map Jaccard %.4f, "
                    "%.0f s (< 300 s)",
                    cmp.accuracy, cmp.fdr, mask_j, cmp.jaccard, t)};
}

Outcome metric_identities() {
    const auto t0 = Clock::now();
    std::vector<std::string> failed;
    std::size_t checks = 0;
    const auto expect = [&](bool cond, const char* what) {
        ++checks;
        if (!cond) failed.emplace_back(what);
    };
    std::mt19937_64 gen(808);
    const Grid3 g(9, 9, 9);
    const Volume3 a = testing::random_volume(g, gen, 0.0, 100.0);
    expect(psnr(a, a) == kPsnrCapDb, "psnr cap");
    expect(psnr(Volume3(g, 10.0f), Volume3(g, 11.0f), RangePolicy::fixed(100.0)) == 40.0, "psnr 40 dB");
    expect(ssim3d(a, a) == 1.0, "ssim self");
    {
        const double c = 40.0, d = 7.0, R = 100.0, c1 = (0.01 * R) * (0.01 * R);
        const double want = (2 * c * (c + d) + c1) / (c * c + (c + d) * (c + d) + c1);
        expect(std::fabs(ssim3d(Volume3(g, float(c)), Volume3(g, float(c + d)), RangePolicy::fixed(R)) - want) < 1e-9,
               "ssim constant shift");
    }
    const Grid3 q(4, 4, 4);
    Volume3 blk(q, 0.0f), shifted(q, 0.0f), other(q, 0.0f);
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t i = 0; i < 2; ++i) {
                blk.at(i, j, k) = 1.0f;
                shifted.at(i + 1, j, k) = 1.0f;
                other.at(i + 2, j + 2, k + 2) = 1.0f;
            }
    expect(jaccard(blk, blk) == 1.0, "jaccard identity");
    expect(jaccard(blk, other) == 0.0, "jaccard disjoint");
    expect(std::fabs(jaccard(blk, shifted) - 1.0 / 3.0) < 1e-12, "jaccard shifted block");
    expect(jaccard(Volume3(q, 0.0f), Volume3(q, 0.0f)) == 1.0, "jaccard both empty");
    const AccFdr self = acc_fdr(blk, blk);
    expect(self.accuracy == 1.0 && self.fdr == 0.0, "acc_fdr identity");
    const AccFdr zero_gt = acc_fdr(Volume3(q, 0.0f), blk);
    expect(zero_gt.accuracy == 56.0 / 64.0 && zero_gt.fdr == 1.0, "acc_fdr empty gt");
    expect(confusion(blk, shifted).total() == 64, "confusion total");
    Volume3 bad = blk;
    bad[0] = 0.5f;
    bool threw = false;
    try {
        jaccard(bad, blk);
    } catch (const ArgumentError&) {
        threw = true;
    }
    expect(threw, "non-binary rejected");
    const double t = seconds_since(t0);
    std::string detail = fmt("metric identities: %zu of %zu failed, %.2f s (< 5 s)", failed.size(), checks, t);
    for (const auto& f : failed) detail += " [" + f + "]";
    return {failed.empty() && t < 5.0, detail};
}

Outcome determinism(Shared& s) {
    const auto& first = s.trained();
    const FitResult again = train_desk(s.desk(), 0.01);
    const std::string a = first.report.to_csv(), b = again.report.to_csv();
    const bool params_equal = first.params == again.params;
    return {a == b && params_equal,
            fmt("determinism: report CSV %s (%zu bytes), parameters %s", a == b ? "byte-identical" : "DIFFERS", a.size(),
                params_equal ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) {
        const int c = std::atoi(argv[i]);
        if (c < 1 || c > 9) {
            std::fprintf(stderr, "usage: %s [criterion 1-9 ...]\n", argv[0]);
            return 2;
        }
        wanted.insert(c);
    }
    if (wanted.empty())
        for (int c = 1; c <= 9; ++c) wanted.insert(c);

    Shared shared;
    const std::map<int, std::function<Outcome()>> criteria{
        {1, adjoint_check},
        {2, tv_gradient_check},
        {3, net_gradient_check},
        {4, conv_oracle_check},
        {5, [&] { return end_to_end(shared); }},
        {6, [&] { return tv_benefit(shared); }},
        {7, [&] { return functional(shared); }},
        {8, metric_identities},
        {9, [&] { return determinism(shared); }},
    };
    int failures = 0;
    for (int c : wanted) {
        Outcome o;
        try {
            o = criteria.at(c)();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("criterion %d %s  %s\n", c, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
