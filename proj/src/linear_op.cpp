#include "voxsr/linear_op.hpp"

#include <algorithm>
#include <cmath>

namespace voxsr {

namespace {

class RowBuilder {
public:
    RowBuilder(std::size_t n_in, std::size_t n_out) {
        op_.n_in = n_in;
        op_.n_out = n_out;
        op_.row_start.reserve(n_out + 1);
        op_.row_start.push_back(0);
    }
    void tap(std::size_t col, double w) {
        if (w == 0.0) return;
        op_.col.push_back(col);
        op_.weight.push_back(w);
    }
    void end_row() { op_.row_start.push_back(op_.col.size()); }
    AxisOp finish() { return std::move(op_); }

private:
    AxisOp op_;
};

double clamp_coord(double c, std::size_t n) {
    return std::clamp(c, 0.0, static_cast<double>(n - 1));
}

std::size_t mirror(long k, std::size_t n) {
    if (n == 1) return 0;
    const long period = 2 * static_cast<long>(n) - 2;
    k = std::labs(k) % period;
    if (k >= static_cast<long>(n)) k = period - k;
    return static_cast<std::size_t>(k);
}

}  // namespace

AxisOp AxisOp::identity(std::size_t n) {
    RowBuilder b(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        b.tap(i, 1.0);
        b.end_row();
    }
    return b.finish();
}

AxisOp AxisOp::gaussian(std::size_t n, double sigma) {
    if (!(sigma >= 0.0)) throw ArgumentError("blur sigma must be >= 0");
    if (sigma == 0.0) return identity(n);
    const long half = static_cast<long>(std::ceil(3.0 * sigma));
    RowBuilder b(n, n);
    std::vector<double> w;
    for (long i = 0; i < static_cast<long>(n); ++i) {
        const long lo = std::max(0L, i - half), hi = std::min(static_cast<long>(n) - 1, i + half);
        w.clear();
        double sum = 0.0;
        for (long j = lo; j <= hi; ++j) {
            const double d = static_cast<double>(j - i);
            w.push_back(std::exp(-d * d / (2.0 * sigma * sigma)));
            sum += w.back();
        }
        for (long j = lo; j <= hi; ++j) b.tap(static_cast<std::size_t>(j), w[static_cast<std::size_t>(j - lo)] / sum);
        b.end_row();
    }
    return b.finish();
}

AxisOp AxisOp::linear(std::size_t n_in, std::span<const double> coords) {
    RowBuilder b(n_in, coords.size());
    for (double c0 : coords) {
        const double c = clamp_coord(c0, n_in);
        const auto i0 = static_cast<std::size_t>(std::floor(c));
        if (i0 + 1 >= n_in) {
            b.tap(n_in - 1, 1.0);
        } else {
            const double t = c - static_cast<double>(i0);
            b.tap(i0, 1.0 - t);
            b.tap(i0 + 1, t);
        }
        b.end_row();
    }
    return b.finish();
}

AxisOp AxisOp::nearest(std::size_t n_in, std::span<const double> coords) {
    RowBuilder b(n_in, coords.size());
    for (double c0 : coords) {
        const double c = clamp_coord(c0, n_in);
        const auto i = std::min(static_cast<std::size_t>(std::floor(c + 0.5)), n_in - 1);
        b.tap(i, 1.0);
        b.end_row();
    }
    return b.finish();
}

AxisOp AxisOp::cubic_bspline(std::size_t n_in, std::span<const double> coords) {
    RowBuilder b(n_in, coords.size());
    for (double c0 : coords) {
        const double c = clamp_coord(c0, n_in);
        const double fl = std::floor(c);
        const double t = c - fl;
        const long i0 = static_cast<long>(fl);
        const double omt = 1.0 - t;
        const double w[4] = {omt * omt * omt / 6.0, (4.0 - 6.0 * t * t + 3.0 * t * t * t) / 6.0,
                             (1.0 + 3.0 * t + 3.0 * t * t - 3.0 * t * t * t) / 6.0, t * t * t / 6.0};
        for (int k = 0; k < 4; ++k) b.tap(mirror(i0 - 1 + k, n_in), w[k]);
        b.end_row();
    }
    return b.finish();
}

AxisOp AxisOp::compose(const AxisOp& rhs) const {
    if (n_in != rhs.n_out) throw SizeError("axis op compose: inner dimension mismatch");
    RowBuilder b(rhs.n_in, n_out);
    std::vector<double> acc(rhs.n_in, 0.0);
    std::vector<std::size_t> touched;
    for (std::size_t r = 0; r < n_out; ++r) {
        touched.clear();
        for (std::size_t e = row_start[r]; e < row_start[r + 1]; ++e) {
            const std::size_t m = col[e];
            for (std::size_t f = rhs.row_start[m]; f < rhs.row_start[m + 1]; ++f) {
                if (acc[rhs.col[f]] == 0.0) touched.push_back(rhs.col[f]);
                acc[rhs.col[f]] += weight[e] * rhs.weight[f];
            }
        }
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        for (std::size_t c : touched) {
            b.tap(c, acc[c]);
            acc[c] = 0.0;
        }
        b.end_row();
    }
    return b.finish();
}

bool AxisOp::is_identity() const {
    if (n_in != n_out) return false;
    for (std::size_t r = 0; r < n_out; ++r) {
        if (row_start[r + 1] - row_start[r] != 1) return false;
        if (col[row_start[r]] != r || weight[row_start[r]] != 1.0) return false;
    }
    return true;
}

}  // namespace voxsr
