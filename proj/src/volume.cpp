#include "voxsr/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace voxsr {

static_assert(std::endian::native == std::endian::little,
              "file I/O assumes a little-endian host");

Grid3::Grid3(std::size_t nx_, std::size_t ny_, std::size_t nz_, double sx_, double sy_, double sz_)
    : nx(nx_), ny(ny_), nz(nz_), sx(sx_), sy(sy_), sz(sz_) {
    validate();
}

void Grid3::validate() const {
    if (nx < 1 || ny < 1 || nz < 1) {
        throw SizeError("grid counts must be >= 1, got " + describe());
    }
    if (!(sx > 0.0) || !(sy > 0.0) || !(sz > 0.0) || !std::isfinite(sx) || !std::isfinite(sy) ||
        !std::isfinite(sz)) {
        throw SizeError("grid spacing must be positive, got " + describe());
    }
    const auto max = std::numeric_limits<std::size_t>::max();
    if (nx > max / ny || nx * ny > max / nz) {
        throw SizeError("grid voxel count overflows: " + describe());
    }
}

std::string Grid3::describe() const {
    std::ostringstream os;
    os << nx << "x" << ny << "x" << nz << " @ " << sx << "x" << sy << "x" << sz << "mm";
    return os.str();
}

template <class T>
bool BasicVolume<T>::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template class BasicVolume<float>;
template class BasicVolume<double>;

Series4::Series4(const Grid3& grid, std::vector<Volume3> frames, std::optional<double> tr_seconds)
    : grid_(grid), frames_(std::move(frames)), tr_(tr_seconds) {
    grid_.validate();
    if (frames_.empty()) throw SizeError("series needs at least one frame");
    for (std::size_t t = 0; t < frames_.size(); ++t) {
        if (!(frames_[t].grid() == grid_)) {
            throw SizeError("frame " + std::to_string(t) + " grid " + frames_[t].grid().describe() +
                            " differs from series grid " + grid_.describe());
        }
    }
}

Series4::Series4(Volume3 single) : grid_(single.grid()) { frames_.push_back(std::move(single)); }

VolumeStats stats(const Volume3& v) {
    VolumeStats s;
    const auto vals = v.values();
    s.min = s.max = vals.empty() ? 0.0 : vals[0];
    // Welford keeps the variance exact for constant fields.
    double mean = 0.0, m2 = 0.0;
    std::size_t n = 0;
    for (float f : vals) {
        const double x = f;
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }
    s.mean = mean;
    s.stddev = n > 0 ? std::sqrt(std::max(0.0, m2 / static_cast<double>(n))) : 0.0;
    return s;
}

// ---------------------------------------------------------------------------
// NIfTI-1

namespace {

constexpr int kNiftiHeaderSize = 348;
constexpr int kNiftiVoxOffset = 352;
constexpr short kDtInt16 = 4;
constexpr short kDtFloat32 = 16;
constexpr short kDtUint16 = 512;

template <class T>
T load(const unsigned char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

template <class T>
void store(unsigned char* p, T v) {
    std::memcpy(p, &v, sizeof(T));
}

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

void write_file(const std::string& path, const std::vector<unsigned char>& header,
                const Series4& series) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
    for (const auto& f : series.frames()) {
        out.write(reinterpret_cast<const char*>(f.data().data()),
                  static_cast<std::streamsize>(f.size() * sizeof(float)));
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace

Series4 read_nifti(const std::string& path) {
    const auto buf = read_file(path);
    if (buf.size() >= 2 && buf[0] == 0x1f && buf[1] == 0x8b) {
        throw FormatError("'" + path + "': gzip-compressed NIfTI is not supported (compression)");
    }
    if (buf.size() < static_cast<std::size_t>(kNiftiHeaderSize)) {
        throw IoError("'" + path + "': truncated header (" + std::to_string(buf.size()) + " bytes)");
    }
    const unsigned char* h = buf.data();
    if (load<std::int32_t>(h) != kNiftiHeaderSize) {
        throw FormatError("'" + path + "': sizeof_hdr is " + std::to_string(load<std::int32_t>(h)) +
                          ", expected 348 (little-endian NIfTI-1)");
    }
    if (std::memcmp(h + 344, "n+1\0", 4) != 0) {
        throw FormatError("'" + path + "': magic is not \"n+1\" (only single-file NIfTI-1 is supported)");
    }
    std::array<std::int16_t, 8> dim{};
    for (int i = 0; i < 8; ++i) dim[i] = load<std::int16_t>(h + 40 + 2 * i);
    if (dim[0] != 3 && dim[0] != 4) {
        throw FormatError("'" + path + "': dim[0] = " + std::to_string(dim[0]) + ", expected 3 or 4");
    }
    for (int i = 1; i <= dim[0]; ++i) {
        if (dim[i] < 1) throw FormatError("'" + path + "': dim[" + std::to_string(i) + "] < 1");
    }
    const short datatype = load<std::int16_t>(h + 70);
    std::size_t bytes_per_voxel = 0;
    switch (datatype) {
        case kDtFloat32: bytes_per_voxel = 4; break;
        case kDtInt16:
        case kDtUint16: bytes_per_voxel = 2; break;
        default:
            throw FormatError("'" + path + "': unsupported datatype " + std::to_string(datatype) +
                              " (supported: float32, int16, uint16)");
    }
    std::array<float, 8> pixdim{};
    for (int i = 0; i < 8; ++i) pixdim[i] = load<float>(h + 76 + 4 * i);
    const float vox_offset_f = load<float>(h + 108);
    const float slope = load<float>(h + 112);
    const float inter = load<float>(h + 116);

    auto spacing = [&](int i) {
        const double s = std::fabs(pixdim[i]);
        return (std::isfinite(s) && s > 0.0) ? s : 1.0;
    };
    const Grid3 grid(static_cast<std::size_t>(dim[1]), static_cast<std::size_t>(dim[2]),
                     static_cast<std::size_t>(dim[3]), spacing(1), spacing(2), spacing(3));
    const std::size_t t = dim[0] == 4 ? static_cast<std::size_t>(dim[4]) : 1;
    const auto vox_offset = static_cast<std::size_t>(std::max(vox_offset_f, static_cast<float>(kNiftiHeaderSize)));
    const std::size_t payload = grid.voxels() * t * bytes_per_voxel;
    if (buf.size() < vox_offset + payload) {
        throw IoError("'" + path + "': truncated payload, expected " + std::to_string(payload) +
                      " bytes at offset " + std::to_string(vox_offset) + ", file has " +
                      std::to_string(buf.size()));
    }

    const bool scaled = slope != 0.0f && std::isfinite(slope);
    std::vector<Volume3> frames;
    frames.reserve(t);
    const unsigned char* p = buf.data() + vox_offset;
    for (std::size_t f = 0; f < t; ++f) {
        std::vector<float> data(grid.voxels());
        for (std::size_t i = 0; i < data.size(); ++i, p += bytes_per_voxel) {
            double raw = 0.0;
            if (datatype == kDtFloat32) raw = load<float>(p);
            else if (datatype == kDtInt16) raw = load<std::int16_t>(p);
            else raw = load<std::uint16_t>(p);
            if (datatype == kDtFloat32 && !scaled) {
                data[i] = static_cast<float>(raw);
            } else {
                data[i] = scaled ? static_cast<float>(raw * slope + inter) : static_cast<float>(raw);
            }
        }
        frames.emplace_back(grid, std::move(data));
    }
    std::optional<double> tr;
    if (dim[0] == 4 && pixdim[4] > 0.0f && std::isfinite(pixdim[4])) tr = pixdim[4];
    return Series4(grid, std::move(frames), tr);
}

void write_nifti(const Series4& series, const std::string& path) {
    const Grid3& g = series.grid();
    const auto check16 = [&](std::size_t n, const char* what) {
        if (n > 32767) throw SizeError(std::string("NIfTI-1 cannot store ") + what + " = " + std::to_string(n));
        return static_cast<std::int16_t>(n);
    };
    std::vector<unsigned char> h(kNiftiVoxOffset, 0);
    store<std::int32_t>(h.data(), kNiftiHeaderSize);
    h[38] = 'r';
    const bool is4d = series.timepoints() > 1;
    const std::int16_t dim[8] = {static_cast<std::int16_t>(is4d ? 4 : 3), check16(g.nx, "nx"), check16(g.ny, "ny"),
                                 check16(g.nz, "nz"), check16(series.timepoints(), "t"), 1, 1, 1};
    for (int i = 0; i < 8; ++i) store<std::int16_t>(h.data() + 40 + 2 * i, dim[i]);
    store<std::int16_t>(h.data() + 70, kDtFloat32);
    store<std::int16_t>(h.data() + 72, 32);
    const float pixdim[8] = {1.0f, static_cast<float>(g.sx), static_cast<float>(g.sy), static_cast<float>(g.sz),
                             static_cast<float>(series.tr_seconds().value_or(1.0)), 1.0f, 1.0f, 1.0f};
    for (int i = 0; i < 8; ++i) store<float>(h.data() + 76 + 4 * i, pixdim[i]);
    store<float>(h.data() + 108, static_cast<float>(kNiftiVoxOffset));
    store<float>(h.data() + 112, 0.0f);
    store<float>(h.data() + 116, 0.0f);
    h[123] = static_cast<unsigned char>(2 | 8);  // mm, seconds
    std::memcpy(h.data() + 344, "n+1\0", 4);
    write_file(path, h, series);
}

// ---------------------------------------------------------------------------
// raw dump

namespace {
constexpr unsigned char kRawMagic[16] = {'V', 'O', 'X', 'S', 'R', 'V', 'O', 'L', 0, 0, 0, 0, 0, 0, 0, 1};
constexpr std::size_t kRawHeader = 16 + 4 * 4 + 3 * 4;
}  // namespace

Series4 read_raw(const std::string& path) {
    const auto buf = read_file(path);
    if (buf.size() < kRawHeader) throw IoError("'" + path + "': truncated raw header");
    if (std::memcmp(buf.data(), kRawMagic, 16) != 0) {
        throw FormatError("'" + path + "': bad raw magic (expected VOXSRVOL v1)");
    }
    const unsigned char* p = buf.data() + 16;
    const std::uint32_t nx = load<std::uint32_t>(p), ny = load<std::uint32_t>(p + 4),
                        nz = load<std::uint32_t>(p + 8), t = load<std::uint32_t>(p + 12);
    const float sx = load<float>(p + 16), sy = load<float>(p + 20), sz = load<float>(p + 24);
    if (t < 1) throw FormatError("'" + path + "': raw t must be >= 1");
    const Grid3 grid(nx, ny, nz, sx, sy, sz);
    const std::size_t payload = grid.voxels() * t * sizeof(float);
    if (buf.size() < kRawHeader + payload) throw IoError("'" + path + "': truncated raw payload");
    std::vector<Volume3> frames;
    const unsigned char* d = buf.data() + kRawHeader;
    for (std::uint32_t f = 0; f < t; ++f) {
        std::vector<float> data(grid.voxels());
        std::memcpy(data.data(), d, data.size() * sizeof(float));
        d += data.size() * sizeof(float);
        frames.emplace_back(grid, std::move(data));
    }
    return Series4(grid, std::move(frames));
}

void write_raw(const Series4& series, const std::string& path) {
    const Grid3& g = series.grid();
    std::vector<unsigned char> h(kRawHeader, 0);
    std::memcpy(h.data(), kRawMagic, 16);
    const auto u32 = [](std::size_t v) {
        if (v > 0xffffffffu) throw SizeError("raw format dimension exceeds u32");
        return static_cast<std::uint32_t>(v);
    };
    store<std::uint32_t>(h.data() + 16, u32(g.nx));
    store<std::uint32_t>(h.data() + 20, u32(g.ny));
    store<std::uint32_t>(h.data() + 24, u32(g.nz));
    store<std::uint32_t>(h.data() + 28, u32(series.timepoints()));
    store<float>(h.data() + 32, static_cast<float>(g.sx));
    store<float>(h.data() + 36, static_cast<float>(g.sy));
    store<float>(h.data() + 40, static_cast<float>(g.sz));
    write_file(path, h, series);
}

namespace {
bool has_nii_ext(const std::string& path) {
    return path.size() >= 4 && path.compare(path.size() - 4, 4, ".nii") == 0;
}
}  // namespace

Series4 read_series(const std::string& path) { return has_nii_ext(path) ? read_nifti(path) : read_raw(path); }

void write_series(const Series4& series, const std::string& path) {
    if (has_nii_ext(path)) write_nifti(series, path);
    else write_raw(series, path);
}

}  // namespace voxsr
