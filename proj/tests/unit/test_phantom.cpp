#include "doctest.h"
#include "support.hpp"
#include "json.hpp"
#include "voxsr/phantom.hpp"

using namespace voxsr;

namespace {

PhantomSpec small_spec() {
    PhantomSpec s;
    s.timepoints = 12;
    s.seed = 4;
    return s;
}

double mean_of(const Volume3& v) {
    double s = 0.0;
    for (float x : v.values()) s += x;
    return s / static_cast<double>(v.size());
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
    ma /= a.size();
    mb /= b.size();
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_SUITE("phantom") {

TEST_CASE("noise-free, activation-free frames are identical and bounded") {
    PhantomSpec s = small_spec();
    s.noise_sigma = 0.0;
    s.activation.amplitude = 0.0;
    const Phantom p = generate(s);
    REQUIRE(p.series.timepoints() == 12);
    for (std::size_t t = 1; t < 12; ++t) CHECK(p.series.frame(t).data() == p.series.frame(0).data());
    for (float v : p.series.frame(0).values()) {
        REQUIRE(v >= 0.0f);
        REQUIRE(v <= 1000.0f);
    }
    CHECK(p.series.frame(0).data() == p.truth.static_field.data());
    // Corners lie outside the head and stay exactly zero.
    CHECK(p.series.frame(0).at(0, 0, 0) == 0.0f);
    CHECK(p.series.frame(0).at(31, 31, 31) == 0.0f);
}

TEST_CASE("generation is deterministic in the seed") {
    const Phantom a = generate(small_spec());
    const Phantom b = generate(small_spec());
    for (std::size_t t = 0; t < a.series.timepoints(); ++t) CHECK(a.series.frame(t).data() == b.series.frame(t).data());
    PhantomSpec other = small_spec();
    other.seed = 5;
    CHECK(generate(other).series.frame(0).data() != a.series.frame(0).data());
}

TEST_CASE("activation voxels share one time course") {
    PhantomSpec s = small_spec();
    s.noise_sigma = 0.0;
    s.timepoints = 16;
    const Phantom p = generate(s);
    std::vector<std::size_t> act;
    for (std::size_t v = 0; v < p.truth.activation_mask.size(); ++v)
        if (p.truth.activation_mask[v] != 0.0f) act.push_back(v);
    // A radius-4 ball holds 257 voxel centres.
    REQUIRE(act.size() == 257);
    const auto course = [&](std::size_t v) {
        std::vector<double> c;
        for (const auto& f : p.series.frames()) c.push_back(f[v]);
        return c;
    };
    const auto ref = course(act.front());
    for (std::size_t v : act) REQUIRE(pearson(ref, course(v)) == doctest::Approx(1.0).epsilon(1e-6));
    // Outside the cluster nothing moves.
    const auto still = course(p.series.grid().index(16, 16, 16));
    if (p.truth.activation_mask[p.series.grid().index(16, 16, 16)] == 0.0f) {
        for (double x : still) CHECK(x == still.front());
    }
}

TEST_CASE("noise stays inside the head") {
    PhantomSpec s = small_spec();
    s.noise_sigma = 10.0;
    const Phantom p = generate(s);
    for (std::size_t v = 0; v < p.truth.head_mask.size(); ++v) {
        if (p.truth.head_mask[v] == 0.0f) REQUIRE(p.series.frame(3)[v] == p.truth.static_field[v]);
    }
}

TEST_CASE("LR pair has halved grid, doubled spacing and matching mean") {
    PhantomSpec s = small_spec();
    s.noise_sigma = 0.0;
    s.activation.amplitude = 0.0;
    const Phantom p = generate(s);
    const auto [lr, hr] = make_lr_pair(p.series, DegradationOp::with_default_blur(2.0));
    CHECK(lr.grid().dims() == Dims3{16, 16, 16});
    CHECK(lr.grid().sx == doctest::Approx(3.0));
    CHECK(lr.timepoints() == hr.timepoints());
    CHECK(mean_of(lr.frame(0)) == doctest::Approx(mean_of(hr.frame(0))).epsilon(0.01));
}

TEST_CASE("LR noise is seeded per frame") {
    const Phantom p = generate(small_spec());
    const auto op = DegradationOp::with_default_blur(2.0, 4.0, 9);
    const auto a = make_lr_pair(p.series, op).first;
    const auto b = make_lr_pair(p.series, op).first;
    CHECK(a.frame(2).data() == b.frame(2).data());
}

TEST_CASE("run-length masks round trip") {
    const Phantom p = generate(small_spec());
    const auto runs = run_length_encode(p.truth.head_mask);
    CHECK(run_length_decode(p.series.grid(), runs).data() == p.truth.head_mask.data());
    CHECK(run_length_encode(Volume3(Grid3(3, 3, 3), 0.0f)).empty());
    CHECK_THROWS_AS(run_length_decode(Grid3(2, 2, 2), {{6, 3}}), FormatError);

    const auto j = nlohmann::json::parse(truth_to_json(small_spec(), p.truth));
    CHECK(j["size"][0] == 32);
    CHECK(j["activation"]["radius_vox"] == 4.0);
    CHECK(j["head_mask_rle"].size() == runs.size());
}

TEST_CASE("spec validation") {
    PhantomSpec s = small_spec();
    s.size = {7, 32, 32};
    CHECK_THROWS_AS(generate(s), ArgumentError);
    s = small_spec();
    s.timepoints = 0;
    CHECK_THROWS_AS(generate(s), ArgumentError);
    s = small_spec();
    s.activation.center_vox = {2.0, 2.0, 2.0};
    CHECK_THROWS_AS(generate(s), ArgumentError);
}

}
