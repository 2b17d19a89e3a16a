#include "voxsr/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "voxsr/rng.hpp"
#include "voxsr/tv.hpp"

namespace voxsr {

void TrainConfig::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
    if (!(lr0 > 0.0)) throw ConfigError("initial learning rate must be > 0");
    if (plateau_patience < 1) throw ConfigError("plateau patience must be >= 1");
    if (!(lr_halving_floor > 0.0)) throw ConfigError("learning-rate floor must be > 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (!(plateau_threshold >= 0.0)) throw ConfigError("plateau threshold must be >= 0");
    if (alpha > 0.0 && !(tv_epsilon > 0.0)) throw ConfigError("tv epsilon must be > 0 when alpha > 0");
}

template <class T>
LossResult<T> loss(const Volume3& x_lr, const BasicNetworkParams<T>& params, const NetConfig& net_cfg,
                   const DegradationOp& op, double alpha, double tv_eps) {
    if (std::fabs(op.factor - net_cfg.factor) > 1e-12) {
        throw ConfigError("degradation factor " + std::to_string(op.factor) + " differs from network factor " +
                          std::to_string(net_cfg.factor));
    }
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    Tape<T> tape;
    const BasicVolume<T> est = forward<T>(x_lr, params, net_cfg, &tape);
    const SeparableOp b = make_degradation(est.grid(), op, x_lr.grid().dims());
    const std::vector<T> proj = b.apply<T>(est.values());

    LossResult<T> r;
    std::vector<T> resid(proj.size());
    double fid = 0.0;
    for (std::size_t i = 0; i < proj.size(); ++i) {
        const T e = static_cast<T>(x_lr[i]) - proj[i];
        fid += static_cast<double>(e) * static_cast<double>(e);
        resid[i] = T(-2) * e;
    }
    r.fidelity = fid;
    r.tv_term = detail::tv_value<T>(est.values(), est.grid().dims(), tv_eps);
    r.total = alpha == 0.0 ? r.fidelity : r.fidelity + alpha * r.tv_term;

    BasicVolume<T> d_est(est.grid(), b.apply_adjoint<T>(resid));
    if (alpha > 0.0) {
        detail::tv_gradient_accumulate<T>(est.values(), est.grid().dims(), tv_eps, static_cast<T>(alpha), d_est.values());
    }
    r.d_params = std::move(backward<T>(tape, d_est).params);
    return r;
}

template LossResult<float> loss(const Volume3&, const BasicNetworkParams<float>&, const NetConfig&,
                                const DegradationOp&, double, double);
template LossResult<double> loss(const Volume3&, const BasicNetworkParams<double>&, const NetConfig&,
                                 const DegradationOp&, double, double);

AdamState AdamState::for_params(const NetworkParams& p) {
    AdamState s;
    for (const auto& l : p.layers) {
        s.m.emplace_back(l.weight.size(), 0.0f);
        s.m.emplace_back(l.bias.size(), 0.0f);
        s.v.emplace_back(l.weight.size(), 0.0f);
        s.v.emplace_back(l.bias.size(), 0.0f);
    }
    return s;
}

namespace {

void adam_tensor(std::vector<float>& p, const std::vector<float>& g, std::vector<float>& m, std::vector<float>& v,
                 double lr, double c1, double c2) {
    if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
        throw SizeError("adam: tensor shape mismatch");
    }
    constexpr double b1 = AdamState::beta1, b2 = AdamState::beta2;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i];
        const double mi = b1 * m[i] + (1.0 - b1) * gi;
        const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        const double mhat = mi / c1, vhat = vi / c2;
        p[i] = static_cast<float>(p[i] - lr * mhat / (std::sqrt(vhat) + AdamState::eps));
    }
}

}  // namespace

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, double lr) {
    if (params.layers.size() != grads.layers.size() || state.m.size() != 2 * params.layers.size() ||
        state.v.size() != state.m.size()) {
        throw SizeError("adam: parameter, gradient and state layouts differ");
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(AdamState::beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(AdamState::beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        adam_tensor(params.layers[l].weight, grads.layers[l].weight, state.m[2 * l], state.v[2 * l], lr, c1, c2);
        adam_tensor(params.layers[l].bias, grads.layers[l].bias, state.m[2 * l + 1], state.v[2 * l + 1], lr, c1, c2);
    }
}

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

void accumulate(NetworkParams& acc, const NetworkParams& g, float w) {
    for (std::size_t l = 0; l < acc.layers.size(); ++l) {
        auto& a = acc.layers[l];
        const auto& b = g.layers[l];
        for (std::size_t i = 0; i < a.weight.size(); ++i) a.weight[i] += w * b.weight[i];
        for (std::size_t i = 0; i < a.bias.size(); ++i) a.bias[i] += w * b.bias[i];
    }
}

}  // namespace

std::string TrainReport::to_csv() const {
    std::ostringstream os;
    os << "epoch,loss,fidelity,tv,lr\n";
    for (const auto& e : epochs) {
        os << e.epoch << ',' << fmt_double(e.loss) << ',' << fmt_double(e.fidelity) << ',' << fmt_double(e.tv) << ','
           << fmt_double(e.lr) << '\n';
    }
    return os.str();
}

std::string TrainReport::to_json() const {
    nlohmann::json j;
    j["best_epoch"] = best_epoch;
    j["wall_seconds"] = wall_seconds;
    auto& arr = j["epochs"] = nlohmann::json::array();
    for (const auto& e : epochs) {
        arr.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"fidelity", e.fidelity}, {"tv", e.tv}, {"lr", e.lr}});
    }
    return j.dump(2);
}

FitResult fit(const std::vector<Series4>& dataset, NetConfig net_cfg, const TrainConfig& cfg, const DegradationOp& op,
              const EpochCallback& on_epoch) {
    cfg.validate();
    if (dataset.empty()) throw ArgumentError("training dataset is empty");
    const Grid3 lr_grid = dataset.front().grid();
    for (const auto& s : dataset) {
        if (!s.grid().same_shape(lr_grid)) {
            throw ArgumentError("all training series must share one LR grid; got " + s.grid().describe() + " and " +
                                lr_grid.describe());
        }
    }
    if (std::fabs(op.factor - cfg.factor) > 1e-12) throw ConfigError("degradation factor differs from training factor");
    net_cfg.factor = cfg.factor;
    if (cfg.auto_intensity_scale) {
        double peak = 0.0;
        for (const auto& s : dataset)
            for (const auto& f : s.frames())
                for (float v : f.values()) peak = std::max(peak, static_cast<double>(std::fabs(v)));
        net_cfg.intensity_scale = peak > 0.0 ? peak : 1.0;
    }
    net_cfg.validate();

    struct FrameRef {
        std::size_t series, frame;
    };
    std::vector<FrameRef> frames;
    for (std::size_t s = 0; s < dataset.size(); ++s)
        for (std::size_t t = 0; t < dataset[s].timepoints(); ++t) frames.push_back({s, t});

    const auto t_start = std::chrono::steady_clock::now();
    FitResult out;
    out.net_cfg = net_cfg;
    NetworkParams params = init_params(net_cfg, rng::derive(cfg.seed, 1));
    AdamState adam = AdamState::for_params(params);
    out.params = params;

    double lr = cfg.lr0;
    double plateau_ref = std::numeric_limits<double>::infinity();
    int stale = 0;
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(frames.size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        const std::uint64_t perm_seed = rng::derive(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = rng::below(perm_seed, i, i);
            std::swap(order[i - 1], order[j]);
        }

        double sum_total = 0.0, sum_fid = 0.0, sum_tv = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            NetworkParams grad = params.zeros_like();
            const float w = 1.0f / static_cast<float>(stop - start);
            for (std::size_t s = start; s < stop; ++s) {
                const FrameRef& ref = frames[order[s]];
                const auto r = loss<float>(dataset[ref.series].frame(ref.frame), params, net_cfg, op, cfg.alpha,
                                           cfg.tv_epsilon);
                if (!std::isfinite(r.total)) {
                    throw DivergenceError("training loss became non-finite in epoch " + std::to_string(epoch), epoch);
                }
                sum_total += r.total;
                sum_fid += r.fidelity;
                sum_tv += r.tv_term;
                accumulate(grad, r.d_params, w);
            }
            adam_step(params, grad, adam, lr);
        }
        if (!params.all_finite()) {
            throw DivergenceError("network parameters became non-finite in epoch " + std::to_string(epoch), epoch);
        }

        const double n = static_cast<double>(order.size());
        const EpochRecord rec{epoch, sum_total / n, sum_fid / n, sum_tv / n, lr};
        out.report.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (rec.loss < best) {
            best = rec.loss;
            out.params = params;
            out.report.best_epoch = epoch;
        }
        if (rec.loss < plateau_ref * (1.0 - cfg.plateau_threshold)) {
            plateau_ref = rec.loss;
            stale = 0;
        } else if (++stale >= cfg.plateau_patience) {
            if (lr * 0.5 >= cfg.lr_halving_floor) lr *= 0.5;
            stale = 0;
        }
    }
    out.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
}

// ---------------------------------------------------------------------------
// checkpoint

namespace {

constexpr char kCkptMagic[9] = {'V', 'O', 'X', 'S', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

class Writer {
public:
    template <class T>
    void put(T v) {
        const auto* p = reinterpret_cast<const unsigned char*>(&v);
        buf.insert(buf.end(), p, p + sizeof(T));
    }
    void put_floats(const std::vector<float>& v) {
        const auto* p = reinterpret_cast<const unsigned char*>(v.data());
        buf.insert(buf.end(), p, p + v.size() * sizeof(float));
    }
    std::vector<unsigned char> buf;
};

class Reader {
public:
    Reader(std::vector<unsigned char> b, std::string path) : buf_(std::move(b)), path_(std::move(path)) {}
    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::vector<float> get_floats(std::size_t n) {
        need(n * sizeof(float));
        std::vector<float> v(n);
        std::memcpy(v.data(), buf_.data() + pos_, n * sizeof(float));
        pos_ += n * sizeof(float);
        return v;
    }
    const unsigned char* raw(std::size_t n) {
        need(n);
        const auto* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }
    bool at_end() const { return pos_ == buf_.size(); }

private:
    void need(std::size_t n) {
        if (pos_ + n > buf_.size()) throw FormatError("checkpoint '" + path_ + "' is truncated");
    }
    std::vector<unsigned char> buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

void put_tensor(Writer& w, const std::vector<std::uint32_t>& dims, const std::vector<float>& data) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) w.put<std::uint32_t>(d);
    w.put_floats(data);
}

std::vector<float> get_tensor(Reader& r, const std::vector<std::uint32_t>& expect, const std::string& path) {
    const auto rank = r.get<std::uint32_t>();
    if (rank != expect.size()) throw FormatError("checkpoint '" + path + "': unexpected tensor rank");
    std::size_t n = 1;
    for (std::uint32_t d : expect) {
        if (r.get<std::uint32_t>() != d) throw FormatError("checkpoint '" + path + "': tensor shape mismatch");
        n *= d;
    }
    return r.get_floats(n);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    ckpt.params.check_against(ckpt.net_cfg);
    Writer w;
    for (char c : kCkptMagic) w.put<char>(c);
    w.put<std::uint32_t>(kCkptVersion);
    const NetConfig& c = ckpt.net_cfg;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.layers));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.channels));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.kernel));
    w.put<double>(c.factor);
    w.put<std::uint8_t>(c.global_residual ? 1 : 0);
    w.put<double>(c.intensity_scale);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(2 * ckpt.params.layers.size()));
    for (const auto& L : ckpt.params.layers) {
        put_tensor(w, {static_cast<std::uint32_t>(L.out_ch), static_cast<std::uint32_t>(L.in_ch), 3, 3, 3}, L.weight);
        put_tensor(w, {static_cast<std::uint32_t>(L.out_ch)}, L.bias);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(w.buf.data()), static_cast<std::streamsize>(w.buf.size()));
    if (!out) throw IoError("write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(std::move(buf), path);
    if (std::memcmp(r.raw(sizeof(kCkptMagic)), kCkptMagic, sizeof(kCkptMagic)) != 0) {
        throw FormatError("'" + path + "' is not a checkpoint (bad magic)");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kCkptVersion) throw FormatError("checkpoint '" + path + "': unsupported version " + std::to_string(version));
    Checkpoint ck;
    NetConfig& c = ck.net_cfg;
    c.layers = static_cast<int>(r.get<std::uint32_t>());
    c.channels = static_cast<int>(r.get<std::uint32_t>());
    c.kernel = static_cast<int>(r.get<std::uint32_t>());
    c.factor = r.get<double>();
    c.global_residual = r.get<std::uint8_t>() != 0;
    c.intensity_scale = r.get<double>();
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw FormatError("checkpoint '" + path + "': " + e.what());
    }
    const auto tensors = r.get<std::uint32_t>();
    const std::size_t nl = static_cast<std::size_t>(c.layers) + 2;
    if (tensors != 2 * nl) throw FormatError("checkpoint '" + path + "': tensor count does not match config");
    for (std::size_t l = 0; l < nl; ++l) {
        int in_ch = 0, out_ch = c.channels;
        if (l == 0) in_ch = 1;
        else if (l + 1 == nl) in_ch = (c.layers + 1) * c.channels, out_ch = 1;
        else in_ch = static_cast<int>(l) * c.channels;
        ConvLayer<float> L{in_ch, out_ch, {}, {}};
        L.weight = get_tensor(r, {static_cast<std::uint32_t>(out_ch), static_cast<std::uint32_t>(in_ch), 3, 3, 3}, path);
        L.bias = get_tensor(r, {static_cast<std::uint32_t>(out_ch)}, path);
        ck.params.layers.push_back(std::move(L));
    }
    if (!r.at_end()) throw FormatError("checkpoint '" + path + "': trailing bytes");
    if (!ck.params.all_finite()) throw FormatError("checkpoint '" + path + "': non-finite parameters");
    return ck;
}

Volume3 infer(const Volume3& x_lr, const Checkpoint& ckpt) {
    return forward<float>(x_lr, ckpt.params, ckpt.net_cfg, nullptr);
}

}  // namespace voxsr
