#include "snapshot.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace voxsr::tools {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

void write_axial_png(const std::vector<const Volume3*>& panels, double lo, double hi, const std::string& path) {
    if (panels.empty()) throw ArgumentError("snapshot needs at least one panel");
    constexpr std::size_t gutter = 2;
    std::size_t width = 0, height = 0;
    for (const Volume3* v : panels) {
        width += v->grid().nx;
        height = std::max(height, v->grid().ny);
    }
    width += gutter * (panels.size() - 1);

    std::vector<png_byte> pixels(width * height, 0);
    const double span = hi > lo ? hi - lo : 1.0;
    std::size_t x0 = 0;
    for (const Volume3* v : panels) {
        const Grid3& g = v->grid();
        const std::size_t k = g.nz / 2;
        for (std::size_t j = 0; j < g.ny; ++j) {
            const std::size_t row = height - 1 - j;
            for (std::size_t i = 0; i < g.nx; ++i) {
                const double t = std::clamp((v->at(i, j, k) - lo) / span, 0.0, 1.0);
                pixels[row * width + x0 + i] = static_cast<png_byte>(std::lround(255.0 * t));
            }
        }
        x0 += g.nx + gutter;
    }

    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open '" + path + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng: cannot create info struct");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng: failed writing '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t r = 0; r < height; ++r) png_write_row(png, pixels.data() + r * width);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace voxsr::tools
