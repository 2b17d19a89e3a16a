// voxsr command-line front end. Exit codes: 0 success, 2 usage, 3 numerical
// failure, 4 I/O.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "snapshot.hpp"
#include "voxsr/degrade.hpp"
#include "voxsr/funcmap.hpp"
#include "voxsr/interp.hpp"
#include "voxsr/metrics.hpp"
#include "voxsr/phantom.hpp"
#include "voxsr/train.hpp"
#include "voxsr/volume.hpp"

#ifndef VOXSR_VERSION
#define VOXSR_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace voxsr::tools {
namespace {

enum Exit : int { kOk = 0, kUsage = 2, kNumeric = 3, kIo = 4 };

struct UsageError : Error {
    using Error::Error;
};

constexpr double kFactors[] = {1.25, 1.5, 1.75, 2.0};

double checked_factor(double f) {
    for (double k : kFactors)
        if (std::fabs(f - k) < 1e-9) return k;
    std::ostringstream os;
    os << "factor " << f << " is not one of 1.25, 1.5, 1.75, 2";
    throw UsageError(os.str());
}

// "<dir>/<stem><suffix>" for an output path, so sidecars sit beside it.
std::string sibling(const std::string& out, const std::string& suffix) {
    const fs::path p(out);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
}

void ensure_parent(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (parent.empty()) return;
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory '" + parent.string() + "': " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
    ensure_parent(path);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw IoError("failed writing '" + path + "'");
}

ordered_json grid_json(const Grid3& g) {
    return {{"dims", {g.nx, g.ny, g.nz}}, {"spacing_mm", {g.sx, g.sy, g.sz}}};
}

ordered_json op_json(const DegradationOp& op) {
    return {{"factor", op.factor},
            {"blur_sigma_vox", op.blur_sigma_vox},
            {"noise_variance", op.noise_variance},
            {"seed", op.seed}};
}

ordered_json net_json(const NetConfig& c) {
    return {{"layers", c.layers},   {"channels", c.channels},
            {"kernel", c.kernel},   {"factor", c.factor},
            {"global_residual", c.global_residual}, {"intensity_scale", c.intensity_scale}};
}

// One manifest per run, written beside the primary output on success and
// on failure alike.
class Manifest {
public:
    Manifest(std::string command, int argc, char** argv) : t0_(std::chrono::steady_clock::now()) {
        doc_["command"] = std::move(command);
        doc_["tool_version"] = VOXSR_VERSION;
        std::vector<std::string> args(argv, argv + argc);
        doc_["argv"] = args;
        doc_["params"] = ordered_json::object();
        doc_["seeds"] = ordered_json::object();
        doc_["inputs"] = ordered_json::array();
        doc_["outputs"] = ordered_json::array();
    }

    void set_path(std::string p) { path_ = std::move(p); }
    const std::string& path() const { return path_; }
    ordered_json& params() { return doc_["params"]; }
    ordered_json& seeds() { return doc_["seeds"]; }
    ordered_json& extra() { return doc_; }
    void input(const std::string& p) { doc_["inputs"].push_back(p); }
    void output(const std::string& p) { doc_["outputs"].push_back(p); }

    void finish(int code, const std::string& message) {
        if (path_.empty()) return;
        doc_["status"] = code == kOk ? "ok" : "error";
        doc_["exit_code"] = code;
        if (!message.empty()) doc_["message"] = message;
        doc_["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        write_text(path_, doc_.dump(2) + "\n");
    }

private:
    ordered_json doc_;
    std::string path_;
    std::chrono::steady_clock::time_point t0_;
};

Series4 load(const std::string& path, Manifest& m) {
    if (!fs::exists(path)) throw IoError("input '" + path + "' does not exist");
    m.input(path);
    return read_series(path);
}

void save(const Series4& s, const std::string& path, Manifest& m) {
    ensure_parent(path);
    write_series(s, path);
    m.output(path);
}

void snapshot(const std::vector<const Volume3*>& panels, double lo, double hi, const std::string& path, Manifest& m) {
    ensure_parent(path);
    write_axial_png(panels, lo, hi, path);
    m.output(path);
}

std::array<double, 3> parse_triplet(const std::string& s, const char* what) {
    std::array<double, 3> v{};
    std::stringstream ss(s);
    std::string tok;
    int n = 0;
    while (std::getline(ss, tok, ',')) {
        if (n == 3) throw UsageError(std::string(what) + " expects three comma-separated numbers, got '" + s + "'");
        try {
            std::size_t used = 0;
            v[n] = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw UsageError(std::string(what) + ": '" + tok + "' is not a number");
        }
        ++n;
    }
    if (n != 3) throw UsageError(std::string(what) + " expects three comma-separated numbers, got '" + s + "'");
    return v;
}

// ---------------------------------------------------------------------------
// phantom

struct PhantomArgs {
    std::size_t size = 32;
    std::size_t timepoints = 20;
    double noise_sigma = 10.0;
    double spacing = 1.5;
    int ellipsoids = 6;
    double amp = 20.0;
    std::optional<double> radius;  // size / 8 voxels when unset
    double period = 8.0;
    std::string center;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_phantom(const PhantomArgs& a, Manifest& m) {
    PhantomSpec spec;
    spec.size = {a.size, a.size, a.size};
    spec.timepoints = a.timepoints;
    spec.noise_sigma = a.noise_sigma;
    spec.spacing_mm = a.spacing;
    spec.n_ellipsoids = a.ellipsoids;
    spec.activation.amplitude = a.amp;
    spec.activation.radius_vox = a.radius.value_or(static_cast<double>(a.size) / 8.0);
    spec.activation.period_frames = a.period;
    if (!a.center.empty()) {
        spec.activation.center_vox = parse_triplet(a.center, "--activation-center");
    } else {
        // Off-centre along +x by an eighth of the grid; (20, 16, 16) at 32^3.
        const double c = 0.5 * (static_cast<double>(a.size) - 1.0);
        spec.activation.center_vox = {std::round(c + 0.125 * static_cast<double>(a.size)), std::round(c), std::round(c)};
    }
    spec.seed = a.seed;
    try {
        spec.validate();
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    }

    auto& p = m.params();
    p["size"] = spec.size;
    p["timepoints"] = spec.timepoints;
    p["spacing_mm"] = spec.spacing_mm;
    p["n_ellipsoids"] = spec.n_ellipsoids;
    p["noise_sigma"] = spec.noise_sigma;
    p["activation"] = {{"center_vox", spec.activation.center_vox},
                       {"radius_vox", spec.activation.radius_vox},
                       {"amplitude", spec.activation.amplitude},
                       {"period_frames", spec.activation.period_frames}};
    m.seeds()["seed"] = spec.seed;

    const Phantom ph = generate(spec);
    save(ph.series, a.out, m);
    const std::string truth = sibling(a.out, ".truth.json");
    write_text(truth, truth_to_json(spec, ph.truth) + "\n");
    m.output(truth);
    const auto st = stats(ph.truth.static_field);
    snapshot({&ph.series.frame(0)}, st.min, st.max, sibling(a.out, ".png"), m);
    return kOk;
}

// ---------------------------------------------------------------------------
// degrade

struct DegradeArgs {
    double factor = 2.0;
    std::optional<double> sigma;
    double noise_var = 0.0;
    std::uint64_t seed = 0;
    std::string in, out;
};

DegradationOp make_op(double factor, const std::optional<double>& sigma, double noise_var, std::uint64_t seed) {
    DegradationOp op = DegradationOp::with_default_blur(factor, noise_var, seed);
    if (sigma) {
        if (!(*sigma >= 0.0)) throw UsageError("--sigma must be >= 0");
        op.blur_sigma_vox = {*sigma, *sigma, *sigma};
    }
    if (!(noise_var >= 0.0)) throw UsageError("--noise-var must be >= 0");
    return op;
}

int cmd_degrade(const DegradeArgs& a, Manifest& m) {
    const DegradationOp op = make_op(checked_factor(a.factor), a.sigma, a.noise_var, a.seed);
    m.params()["op"] = op_json(op);
    m.seeds()["seed"] = a.seed;
    const Series4 hr = load(a.in, m);
    m.params()["hr_grid"] = grid_json(hr.grid());
    const auto [lr, unused] = make_lr_pair(hr, op);
    m.params()["lr_grid"] = grid_json(lr.grid());
    save(lr, a.out, m);
    const auto st = stats(lr.frame(0));
    snapshot({&lr.frame(0)}, st.min, st.max, sibling(a.out, ".png"), m);
    return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::vector<std::string> in;
    double factor = 2.0;
    double alpha = 0.01;
    std::string sweep;
    int epochs = 200;
    double lr = 1e-3;
    int patience = 5;
    double lr_floor = 1e-5;
    int batch = 1;
    std::optional<double> sigma;
    double tv_eps = 1e-8;
    int layers = 10;
    int channels = 24;
    bool no_global_residual = false;
    std::uint64_t seed = 0;
    std::string out;
    bool quiet = false;
};

std::vector<double> parse_sweep(const std::string& spec) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(tok);
    if (parts.size() != 3) throw UsageError("--sweep-alpha expects lo:hi:n, got '" + spec + "'");
    double lo = 0, hi = 0;
    long n = 0;
    try {
        lo = std::stod(parts[0]);
        hi = std::stod(parts[1]);
        n = std::stol(parts[2]);
    } catch (const std::exception&) {
        throw UsageError("--sweep-alpha expects lo:hi:n, got '" + spec + "'");
    }
    if (n < 1 || !(lo >= 0.0) || !(hi >= lo)) throw UsageError("--sweep-alpha needs n >= 1 and 0 <= lo <= hi");
    std::vector<double> out;
    for (long i = 0; i < n; ++i) out.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    return out;
}

std::string alpha_tag(double a) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", a);
    return buf;
}

int cmd_train(const TrainArgs& a, Manifest& m) {
    if (a.in.empty()) throw UsageError("train needs at least one --in series");
    const double factor = checked_factor(a.factor);
    const DegradationOp op = make_op(factor, a.sigma, 0.0, 0);

    NetConfig net;
    net.layers = a.layers;
    net.channels = a.channels;
    net.factor = factor;
    net.global_residual = !a.no_global_residual;

    TrainConfig tc;
    tc.factor = factor;
    tc.lr0 = a.lr;
    tc.epochs = a.epochs;
    tc.plateau_patience = a.patience;
    tc.lr_halving_floor = a.lr_floor;
    tc.batch = a.batch;
    tc.seed = a.seed;
    tc.tv_epsilon = a.tv_eps;

    std::vector<Series4> data;
    for (const auto& p : a.in) data.push_back(load(p, m));

    const std::vector<double> alphas = a.sweep.empty() ? std::vector<double>{a.alpha} : parse_sweep(a.sweep);
    auto& p = m.params();
    p["op"] = op_json(op);
    p["net"] = net_json(net);
    p["alphas"] = alphas;
    p["epochs"] = tc.epochs;
    p["lr0"] = tc.lr0;
    p["plateau_patience"] = tc.plateau_patience;
    p["plateau_threshold"] = tc.plateau_threshold;
    p["lr_halving_floor"] = tc.lr_halving_floor;
    p["batch"] = tc.batch;
    p["tv_epsilon"] = tc.tv_epsilon;
    m.seeds()["seed"] = tc.seed;
    m.seeds()["init_stream"] = 1;
    m.seeds()["shuffle_streams"] = "1000 + epoch";

    ordered_json runs = ordered_json::array();
    for (double alpha : alphas) {
        tc.alpha = alpha;
        try {
            tc.validate();
            net.validate();
        } catch (const ConfigError& e) {
            throw UsageError(e.what());
        }
        const std::string ckpt_path = a.sweep.empty() ? a.out : sibling(a.out, "_alpha" + alpha_tag(alpha) + ".ckpt");
        const auto on_epoch = [&](const EpochRecord& r) {
            if (!a.quiet) {
                std::fprintf(stderr, "[alpha %g] epoch %d loss %.6g fidelity %.6g tv %.6g lr %g\n", alpha, r.epoch, r.loss,
                             r.fidelity, r.tv, r.lr);
            }
        };
        const FitResult res = fit(data, net, tc, op, on_epoch);

        ensure_parent(ckpt_path);
        save_checkpoint({res.net_cfg, res.params}, ckpt_path);
        m.output(ckpt_path);
        ordered_json side;
        side["net"] = net_json(res.net_cfg);
        side["factor"] = res.net_cfg.factor;
        side["alpha"] = alpha;
        side["seed"] = tc.seed;
        side["epochs"] = static_cast<int>(res.report.epochs.size());
        side["best_epoch"] = res.report.best_epoch;
        side["blur_sigma_vox"] = op.blur_sigma_vox;
        const std::string side_path = ckpt_path + ".json";
        write_text(side_path, side.dump(2) + "\n");
        m.output(side_path);

        const std::string stem = sibling(ckpt_path, ".report");
        write_text(stem + ".csv", res.report.to_csv());
        write_text(stem + ".json", res.report.to_json() + "\n");
        m.output(stem + ".csv");
        m.output(stem + ".json");
        runs.push_back({{"alpha", alpha},
                        {"checkpoint", ckpt_path},
                        {"best_epoch", res.report.best_epoch},
                        {"best_loss", res.report.best_epoch >= 0 ? res.report.epochs[res.report.best_epoch].loss : 0.0},
                        {"train_seconds", res.report.wall_seconds}});
    }
    m.extra()["runs"] = runs;
    return kOk;
}

// ---------------------------------------------------------------------------
// sr

struct SrArgs {
    std::string in, out, ckpt, method, like;
    std::optional<double> factor;
};

int cmd_sr(const SrArgs& a, Manifest& m) {
    if (a.ckpt.empty() == a.method.empty()) throw UsageError("sr needs exactly one of --ckpt or --method");
    const Series4 lr = load(a.in, m);
    std::optional<Checkpoint> ck;
    InterpMethod method = InterpMethod::trilinear;
    double factor = 0.0;
    if (!a.ckpt.empty()) {
        if (!fs::exists(a.ckpt)) throw IoError("checkpoint '" + a.ckpt + "' does not exist");
        m.input(a.ckpt);
        ck = load_checkpoint(a.ckpt);
        factor = ck->net_cfg.factor;
        if (a.factor && std::fabs(*a.factor - factor) > 1e-9) {
            std::ostringstream os;
            os << "checkpoint was trained for factor " << factor << " but --factor " << *a.factor << " was requested";
            throw UsageError(os.str());
        }
        m.params()["net"] = net_json(ck->net_cfg);
    } else {
        try {
            method = parse_interp_method(a.method);
        } catch (const ArgumentError& e) {
            throw UsageError(e.what());
        }
        if (!a.factor) throw UsageError("--method needs --factor");
        factor = checked_factor(*a.factor);
        m.params()["method"] = to_string(method);
    }
    m.params()["factor"] = factor;

    const Grid3 out_grid = upsampled_grid(lr.grid(), factor);
    if (!a.like.empty()) {
        const Series4 ref = load(a.like, m);
        if (!ref.grid().same_shape(out_grid)) {
            throw UsageError("output grid " + out_grid.describe() + " for factor " + std::to_string(factor) +
                             " does not match --like grid " + ref.grid().describe());
        }
    }
    std::vector<Volume3> frames;
    frames.reserve(lr.timepoints());
    for (const auto& f : lr.frames()) frames.push_back(ck ? infer(f, *ck) : upsample(f, factor, method));
    for (const auto& f : frames)
        if (!f.all_finite()) throw DivergenceError("super-resolved output is not finite", -1);
    const Grid3 hr_grid = frames.front().grid();
    const Series4 hr(hr_grid, std::move(frames), lr.tr_seconds());
    m.params()["out_grid"] = grid_json(hr.grid());
    save(hr, a.out, m);
    const auto st = stats(hr.frame(0));
    snapshot({&hr.frame(0)}, st.min, st.max, sibling(a.out, ".png"), m);
    return kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string gt, est, mask, range = "auto", out, label = "unnamed";
    std::optional<double> factor;
    bool crop = false;
};

Volume3 crop_to(const Volume3& v, const Dims3& d) {
    Grid3 g = v.grid();
    g.nx = d[0];
    g.ny = d[1];
    g.nz = d[2];
    Volume3 out(g, 0.0f);
    for (std::size_t k = 0; k < d[2]; ++k)
        for (std::size_t j = 0; j < d[1]; ++j)
            for (std::size_t i = 0; i < d[0]; ++i) out.at(i, j, k) = v.at(i, j, k);
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    const double mu = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(v.size()));
}

int cmd_eval(const EvalArgs& a, Manifest& m) {
    RangePolicy range;
    if (a.range != "auto") {
        try {
            std::size_t used = 0;
            const double r = std::stod(a.range, &used);
            if (used != a.range.size() || !(r > 0.0)) throw std::invalid_argument(a.range);
            range = RangePolicy::fixed(r);
        } catch (const std::exception&) {
            throw UsageError("--range must be 'auto' or a positive number, got '" + a.range + "'");
        }
    }
    const Series4 gt = load(a.gt, m);
    const Series4 est = load(a.est, m);
    if (gt.timepoints() != est.timepoints()) {
        throw UsageError("gt has " + std::to_string(gt.timepoints()) + " frames but est has " +
                         std::to_string(est.timepoints()));
    }
    Dims3 common = gt.grid().dims();
    if (!gt.grid().same_shape(est.grid())) {
        if (!a.crop) {
            throw UsageError("grid mismatch: gt " + gt.grid().describe() + " vs est " + est.grid().describe() +
                             " (use --crop to compare the common region)");
        }
        for (int ax = 0; ax < 3; ++ax) common[ax] = std::min(gt.grid().dims()[ax], est.grid().dims()[ax]);
    }
    std::optional<Volume3> mask;
    if (!a.mask.empty()) {
        const Series4 ms = load(a.mask, m);
        mask = ms.grid().dims() == common ? ms.frame(0) : crop_to(ms.frame(0), common);
        if (!mask->grid().same_shape(Grid3(common[0], common[1], common[2]))) throw UsageError("mask grid does not match");
    }

    std::vector<double> ps, ss, ranges;
    std::ostringstream frames_csv;
    frames_csv << "method,factor,frame,psnr_db,ssim,data_range\n";
    const std::string factor_s = a.factor ? alpha_tag(*a.factor) : "";
    for (std::size_t t = 0; t < gt.timepoints(); ++t) {
        const Volume3 g = crop_to(gt.frame(t), common), e = crop_to(est.frame(t), common);
        const QualityReport q = evaluate_quality(g, e, range, mask ? &*mask : nullptr);
        ps.push_back(q.psnr_db);
        ss.push_back(q.ssim);
        ranges.push_back(q.data_range);
        char line[256];
        std::snprintf(line, sizeof line, "%s,%s,%zu,%.17g,%.17g,%.17g\n", a.label.c_str(), factor_s.c_str(), t, q.psnr_db,
                      q.ssim, q.data_range);
        frames_csv << line;
    }

    m.params()["range_policy"] = range.describe();
    m.params()["data_range_per_frame"] = ranges;
    m.params()["crop_dims"] = common;
    m.params()["masked"] = mask.has_value();
    m.params()["label"] = a.label;
    if (a.factor) m.params()["factor"] = *a.factor;

    char row[512];
    std::snprintf(row, sizeof row, "%s,%s,%zu,%.17g,%.17g,%.17g,%.17g,%s\n", a.label.c_str(), factor_s.c_str(),
                  gt.timepoints(), mean_of(ps), sd_of(ps), mean_of(ss), sd_of(ss), range.describe().c_str());
    write_text(a.out + ".csv", std::string("method,factor,frames,psnr_mean,psnr_sd,ssim_mean,ssim_sd,range\n") + row);
    write_text(a.out + "_frames.csv", frames_csv.str());
    ordered_json j;
    j["method"] = a.label;
    j["factor"] = a.factor ? ordered_json(*a.factor) : ordered_json(nullptr);
    j["frames"] = gt.timepoints();
    j["psnr_db"] = {{"mean", mean_of(ps)}, {"sd", sd_of(ps)}, {"per_frame", ps}};
    j["ssim"] = {{"mean", mean_of(ss)}, {"sd", sd_of(ss)}, {"per_frame", ss}};
    j["range_policy"] = range.describe();
    j["data_range_per_frame"] = ranges;
    write_text(a.out + ".json", j.dump(2) + "\n");
    m.output(a.out + ".csv");
    m.output(a.out + "_frames.csv");
    m.output(a.out + ".json");

    const Volume3 g0 = crop_to(gt.frame(0), common), e0 = crop_to(est.frame(0), common);
    const auto st = stats(g0);
    snapshot({&g0, &e0}, st.min, st.max, a.out + ".png", m);
    std::printf("%s: PSNR %.3f +- %.3f dB, SSIM %.5f +- %.5f over %zu frames\n", a.label.c_str(), mean_of(ps), sd_of(ps),
                mean_of(ss), sd_of(ss), gt.timepoints());
    return kOk;
}

// ---------------------------------------------------------------------------
// funcmap

struct FuncmapArgs {
    std::string in, seed, mask, compare, out;
    double radius = 3.0;
    double thresh = 0.5;
    bool detrend = false;
};

int cmd_funcmap(const FuncmapArgs& a, Manifest& m) {
    const std::array<double, 3> c = parse_triplet(a.seed, "--seed");
    if (!(a.radius > 0.0)) throw UsageError("--radius must be > 0");
    Series4 s = load(a.in, m);
    const Grid3& g = s.grid();
    const std::array<double, 3> ext{(g.nx - 1) * g.sx, (g.ny - 1) * g.sy, (g.nz - 1) * g.sz};
    for (int ax = 0; ax < 3; ++ax) {
        if (!(c[ax] >= 0.0 && c[ax] <= ext[ax])) {
            std::ostringstream os;
            os << "seed (" << c[0] << ", " << c[1] << ", " << c[2] << ") mm lies outside the grid extent (" << ext[0]
               << ", " << ext[1] << ", " << ext[2] << ") mm";
            throw UsageError(os.str());
        }
    }
    if (a.detrend) s = detrend_quadratic(s);

    Volume3 mask;
    if (a.mask.empty()) {
        mask = automask(s);
    } else {
        const Series4 ms = load(a.mask, m);
        if (!ms.grid().same_shape(g)) throw UsageError("mask grid " + ms.grid().describe() + " vs series " + g.describe());
        mask = ms.frame(0);
        for (float& v : mask.data()) v = v != 0.0f ? 1.0f : 0.0f;
    }
    SeedSpec seed{c, a.radius};
    FuncMap map;
    try {
        map = seed_correlation(s, seed, mask);
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    }
    map.threshold = a.thresh;
    const Volume3 bin = threshold_map(map, a.thresh);

    auto& p = m.params();
    p["seed_mm"] = c;
    p["radius_mm"] = a.radius;
    p["threshold"] = a.thresh;
    p["detrend"] = a.detrend;
    p["mask"] = a.mask.empty() ? "automask" : a.mask;
    p["mask_voxels"] = static_cast<std::size_t>(std::count(mask.values().begin(), mask.values().end(), 1.0f));
    p["map_voxels"] = static_cast<std::size_t>(std::count(bin.values().begin(), bin.values().end(), 1.0f));

    save(Series4(map.as_volume()), a.out + "_r.nii", m);
    save(Series4(bin), a.out + "_bin.nii", m);
    save(Series4(mask), a.out + "_mask.nii", m);
    const Volume3 rv = map.as_volume();
    snapshot({&rv, &bin}, -1.0, 1.0, a.out + ".png", m);

    if (!a.compare.empty()) {
        const Series4 other = load(a.compare, m);
        if (!other.grid().same_shape(g)) {
            throw UsageError("--compare grid " + other.grid().describe() + " vs series " + g.describe());
        }
        const Volume3& ref = other.frame(0);
        MapComparison cmp;
        try {
            cmp = compare_maps(ref, bin);
        } catch (const ArgumentError& e) {
            throw UsageError(std::string("--compare map: ") + e.what());
        }
        ordered_json j{{"reference", a.compare}, {"accuracy", cmp.accuracy}, {"fdr", cmp.fdr}, {"jaccard", cmp.jaccard}};
        write_text(a.out + "_compare.json", j.dump(2) + "\n");
        char row[256];
        std::snprintf(row, sizeof row, "accuracy,fdr,jaccard\n%.17g,%.17g,%.17g\n", cmp.accuracy, cmp.fdr, cmp.jaccard);
        write_text(a.out + "_compare.csv", row);
        m.output(a.out + "_compare.json");
        m.output(a.out + "_compare.csv");
        std::printf("accuracy %.6f fdr %.6f jaccard %.6f\n", cmp.accuracy, cmp.fdr, cmp.jaccard);
    }
    return kOk;
}

}  // namespace
}  // namespace voxsr::tools

int main(int argc, char** argv) {
    using namespace voxsr;
    using namespace voxsr::tools;

    CLI::App app{"voxsr: self-supervised volumetric super-resolution"};
    app.set_version_flag("--version", VOXSR_VERSION);
    app.require_subcommand(1);

    PhantomArgs pa;
    auto* ph = app.add_subcommand("phantom", "generate a synthetic 4D phantom with ground truth");
    ph->add_option("--size", pa.size, "grid edge length (voxels)")->check(CLI::Range(std::size_t{8}, std::size_t{512}));
    ph->add_option("--timepoints", pa.timepoints, "number of frames")->check(CLI::PositiveNumber);
    ph->add_option("--noise-sigma", pa.noise_sigma, "temporal noise sigma inside the head")->check(CLI::NonNegativeNumber);
    ph->add_option("--spacing", pa.spacing, "isotropic voxel spacing (mm)")->check(CLI::PositiveNumber);
    ph->add_option("--ellipsoids", pa.ellipsoids, "number of structural blobs")->check(CLI::NonNegativeNumber);
    ph->add_option("--activation-amp", pa.amp, "activation sinusoid amplitude (0 disables)");
    ph->add_option("--activation-radius", pa.radius, "activation cluster radius in voxels (default size/8)");
    ph->add_option("--activation-period", pa.period, "activation period (frames)");
    ph->add_option("--activation-center", pa.center, "activation centre i,j,k (voxels)");
    ph->add_option("--seed", pa.seed, "RNG seed");
    ph->add_option("--out", pa.out, "output series (.nii)")->required();

    DegradeArgs da;
    auto* dg = app.add_subcommand("degrade", "blur, resample and optionally add noise to an HR series");
    dg->add_option("--factor", da.factor, "down factor in {1.25, 1.5, 1.75, 2}");
    dg->add_option("--sigma", da.sigma, "blur sigma in HR voxels (default 0.5 * (factor - 1))");
    dg->add_option("--noise-var", da.noise_var, "noise variance added to the LR frames");
    dg->add_option("--seed", da.seed, "noise seed");
    dg->add_option("--in", da.in, "HR input series")->required();
    dg->add_option("--out", da.out, "LR output series (.nii)")->required();

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "self-supervised training on LR series");
    tr->add_option("--in", ta.in, "LR input series (repeatable)")->required();
    tr->add_option("--factor", ta.factor, "upsampling factor in {1.25, 1.5, 1.75, 2}");
    auto* alpha_opt = tr->add_option("--alpha", ta.alpha, "TV weight (0 selects DIP mode)");
    tr->add_option("--sweep-alpha", ta.sweep, "lo:hi:n grid of alphas, one checkpoint each")->excludes(alpha_opt);
    tr->add_option("--epochs", ta.epochs, "number of epochs")->check(CLI::NonNegativeNumber);
    tr->add_option("--lr", ta.lr, "initial Adam step size")->check(CLI::PositiveNumber);
    tr->add_option("--patience", ta.patience, "plateau patience (epochs)")->check(CLI::PositiveNumber);
    tr->add_option("--lr-floor", ta.lr_floor, "learning-rate floor")->check(CLI::PositiveNumber);
    tr->add_option("--batch", ta.batch, "frames per Adam step")->check(CLI::PositiveNumber);
    tr->add_option("--sigma", ta.sigma, "blur sigma of the degradation model (default 0.5 * (factor - 1))");
    tr->add_option("--tv-eps", ta.tv_eps, "TV smoothing epsilon");
    tr->add_option("--layers", ta.layers, "dense layers")->check(CLI::PositiveNumber);
    tr->add_option("--channels", ta.channels, "channels per layer")->check(CLI::PositiveNumber);
    tr->add_flag("--no-global-residual", ta.no_global_residual, "drop the trilinear skip connection");
    tr->add_option("--seed", ta.seed, "seed for init and shuffling");
    tr->add_option("--out", ta.out, "checkpoint path")->required();
    tr->add_flag("--quiet", ta.quiet, "no per-epoch log");

    SrArgs sa;
    auto* sr = app.add_subcommand("sr", "super-resolve an LR series with a checkpoint or a baseline");
    sr->add_option("--in", sa.in, "LR input series")->required();
    auto* ck_opt = sr->add_option("--ckpt", sa.ckpt, "trained checkpoint");
    auto* m_opt = sr->add_option("--method", sa.method, "baseline: trilinear | nearest | bspline3");
    ck_opt->excludes(m_opt);
    sr->add_option("--factor", sa.factor, "factor (required with --method)");
    sr->add_option("--like", sa.like, "reference series whose grid the output must match");
    sr->add_option("--out", sa.out, "HR output series (.nii)")->required();

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "PSNR / SSIM of an estimate against ground truth");
    ev->add_option("--gt", ea.gt, "ground-truth series")->required();
    ev->add_option("--est", ea.est, "estimated series")->required();
    ev->add_option("--mask", ea.mask, "optional binary mask volume");
    ev->add_option("--range", ea.range, "'auto' (gt max - min) or an explicit peak value");
    ev->add_option("--label", ea.label, "method label for the report");
    ev->add_option("--factor", ea.factor, "factor label for the report");
    ev->add_flag("--crop", ea.crop, "compare the common origin-aligned region when grids differ");
    ev->add_option("--out", ea.out, "report prefix")->required();

    FuncmapArgs fa;
    auto* fm = app.add_subcommand("funcmap", "seed-based correlation map");
    fm->add_option("--in", fa.in, "4D series")->required();
    fm->add_option("--seed", fa.seed, "seed centre x,y,z in mm (voxel 0 at the origin)")->required();
    fm->add_option("--radius", fa.radius, "seed radius (mm)");
    fm->add_option("--thresh", fa.thresh, "r threshold");
    fm->add_option("--mask", fa.mask, "analysis mask (default: automask)");
    fm->add_option("--compare", fa.compare, "reference binary map for accuracy / FDR / Jaccard");
    fm->add_flag("--detrend", fa.detrend, "remove a quadratic trend per voxel first");
    fm->add_option("--out", fa.out, "output prefix")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    Manifest manifest(sub->get_name(), argc, argv);
    if (sub == ph) manifest.set_path(sibling(pa.out, ".manifest.json"));
    else if (sub == dg) manifest.set_path(sibling(da.out, ".manifest.json"));
    else if (sub == tr) manifest.set_path(sibling(ta.out, ".manifest.json"));
    else if (sub == sr) manifest.set_path(sibling(sa.out, ".manifest.json"));
    else if (sub == ev) manifest.set_path(ea.out + ".manifest.json");
    else if (sub == fm) manifest.set_path(fa.out + ".manifest.json");

    int code = kOk;
    std::string message;
    try {
        if (sub == ph) code = cmd_phantom(pa, manifest);
        else if (sub == dg) code = cmd_degrade(da, manifest);
        else if (sub == tr) code = cmd_train(ta, manifest);
        else if (sub == sr) code = cmd_sr(sa, manifest);
        else if (sub == ev) code = cmd_eval(ea, manifest);
        else if (sub == fm) code = cmd_funcmap(fa, manifest);
    } catch (const UsageError& e) {
        code = kUsage;
        message = e.what();
    } catch (const DivergenceError& e) {
        code = kNumeric;
        message = e.what();
    } catch (const AnalysisError& e) {
        code = kNumeric;
        message = e.what();
    } catch (const IoError& e) {
        code = kIo;
        message = e.what();
    } catch (const FormatError& e) {
        code = kIo;
        message = e.what();
    } catch (const ArgumentError& e) {
        code = kUsage;
        message = e.what();
    } catch (const ConfigError& e) {
        code = kUsage;
        message = e.what();
    } catch (const SizeError& e) {
        code = kUsage;
        message = e.what();
    } catch (const std::exception& e) {
        code = kNumeric;
        message = e.what();
    }
    if (!message.empty()) std::fprintf(stderr, "voxsr %s: error: %s\n", sub->get_name().c_str(), message.c_str());
    try {
        manifest.finish(code, message);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "voxsr: could not write manifest: %s\n", e.what());
        if (code == kOk) code = kIo;
    }
    return code;
}
