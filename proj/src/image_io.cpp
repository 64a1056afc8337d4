// PPM and PNG codecs; both carry interleaved 8-bit RGB
#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "edenvfi/image_io.hpp"

namespace edenvfi {

namespace {

Tensor from_rgb8(const std::vector<unsigned char>& rgb, int w, int h) {
    Tensor img = Tensor::empty({3, h, w}, DType::f32);
    float* d = img.data<float>();
    const int64_t plane = static_cast<int64_t>(h) * w;
    for (int64_t p = 0; p < plane; ++p)
        for (int c = 0; c < 3; ++c)
            d[c * plane + p] = static_cast<float>(rgb[static_cast<size_t>(p * 3 + c)]) / 255.0f;
    return img;
}

std::vector<unsigned char> to_rgb8(const Tensor& img) {
    if (img.rank() != 3 || img.dim(0) != 3)
        throw ShapeError("save_image expects [3,H,W], got " + shape_str(img.shape()));
    const int h = img.dim(1), w = img.dim(2);
    const int64_t plane = static_cast<int64_t>(h) * w;
    std::vector<unsigned char> rgb(static_cast<size_t>(plane) * 3);
    for (int64_t p = 0; p < plane; ++p)
        for (int c = 0; c < 3; ++c) {
            double v = img.at(c * plane + p);
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            rgb[static_cast<size_t>(p * 3 + c)] =
                static_cast<unsigned char>(std::lround(v * 255.0));
        }
    return rgb;
}

// next integer in a PPM header, skipping whitespace and # comments
int ppm_int(std::istream& f, const std::string& path) {
    int ch = f.get();
    while (ch != EOF && (std::isspace(ch) || ch == '#')) {
        if (ch == '#')
            while (ch != EOF && ch != '\n') ch = f.get();
        ch = f.get();
    }
    int v = 0;
    bool any = false;
    while (ch != EOF && std::isdigit(ch)) {
        v = v * 10 + (ch - '0');
        any = true;
        ch = f.get();
    }
    if (!any) throw FormatError("malformed PPM header in '" + path + "'");
    return v;
}

Tensor load_ppm(std::istream& f, const std::string& path) {
    char magic[2] = {};
    f.read(magic, 2);
    if (!f || magic[0] != 'P' || magic[1] != '6')
        throw FormatError("not a binary PPM: '" + path + "'");
    const int w = ppm_int(f, path);
    const int h = ppm_int(f, path);
    const int maxval = ppm_int(f, path);
    if (w <= 0 || h <= 0) throw FormatError("bad PPM dimensions in '" + path + "'");
    if (maxval != 255)
        throw FormatError("unsupported PPM maxval " + std::to_string(maxval) + " in '" + path +
                          "' (only 255)");
    // the single whitespace byte after maxval was consumed by ppm_int's lookahead
    std::vector<unsigned char> rgb(static_cast<size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!f) throw FormatError("truncated PPM data in '" + path + "'");
    return from_rgb8(rgb, w, h);
}

void save_ppm(const Tensor& img, const std::string& path) {
    const std::vector<unsigned char> rgb = to_rgb8(img);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "P6\n" << img.dim(2) << " " << img.dim(1) << "\n255\n";
    f.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!f) throw IoError("write failed for '" + path + "'");
}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

Tensor load_png(const std::string& path) {
    PngReader r;
    r.fp = std::fopen(path.c_str(), "rb");
    if (!r.fp) throw IoError("cannot open '" + path + "'");
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    r.info = r.png ? png_create_info_struct(r.png) : nullptr;
    if (!r.info) throw IoError("libpng allocation failed");

    int w = 0, h = 0;
    std::vector<unsigned char> rgb;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(r.png))) throw FormatError("libpng failed decoding '" + path + "'");
    png_init_io(r.png, r.fp);
    png_read_info(r.png, r.info);
    w = static_cast<int>(png_get_image_width(r.png, r.info));
    h = static_cast<int>(png_get_image_height(r.png, r.info));
    const png_byte color = png_get_color_type(r.png, r.info);
    const png_byte depth = png_get_bit_depth(r.png, r.info);
    if (depth == 16) png_set_strip_16(r.png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(r.png);
    png_set_strip_alpha(r.png);
    png_read_update_info(r.png, r.info);
    if (png_get_rowbytes(r.png, r.info) != static_cast<size_t>(w) * 3)
        throw FormatError("unexpected PNG layout in '" + path + "'");
    rgb.resize(static_cast<size_t>(w) * h * 3);
    rows.resize(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = rgb.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return from_rgb8(rgb, w, h);
}

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

void save_png(const Tensor& img, const std::string& path) {
    std::vector<unsigned char> rgb = to_rgb8(img);
    const int w = img.dim(2), h = img.dim(1);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = rgb.data() + static_cast<size_t>(y) * w * 3;

    PngWriter wr;
    wr.fp = std::fopen(path.c_str(), "wb");
    if (!wr.fp) throw IoError("cannot open '" + path + "' for writing");
    wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    wr.info = wr.png ? png_create_info_struct(wr.png) : nullptr;
    if (!wr.info) throw IoError("libpng allocation failed");
    if (setjmp(png_jmpbuf(wr.png))) throw IoError("libpng failed writing '" + path + "'");
    png_init_io(wr.png, wr.fp);
    png_set_IHDR(wr.png, wr.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    png_write_image(wr.png, rows.data());
    png_write_end(wr.png, nullptr);
}

} // namespace

Tensor load_image(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    unsigned char sig[8] = {};
    f.read(reinterpret_cast<char*>(sig), 8);
    if (!f) throw FormatError("'" + path + "' is too short for any image format");
    if (png_sig_cmp(sig, 0, 8) == 0) {
        f.close();
        return load_png(path);
    }
    f.seekg(0);
    return load_ppm(f, path);
}

void save_image(const Tensor& img, const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".ppm") == 0)
        save_ppm(img, path);
    else if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".png") == 0)
        save_png(img, path);
    else
        throw IoError("unsupported image extension in '" + path + "' (use .png or .ppm)");
}

} // namespace edenvfi
