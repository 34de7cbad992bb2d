#include "hydrocube/plot.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>

namespace hydrocube {

namespace {

struct Canvas {
    int w, h;
    std::vector<unsigned char> rgb;
    Canvas(int width, int height) : w(width), h(height), rgb(std::size_t(width) * height * 3, 255) {}
    void set(int x, int y, unsigned char r, unsigned char g, unsigned char b) {
        if (x < 0 || x >= w || y < 0 || y >= h) return;
        unsigned char* p = &rgb[(std::size_t(y) * w + x) * 3];
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }
    void line(int x0, int y0, int x1, int y1, unsigned char r, unsigned char g, unsigned char b) {
        const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            set(x0, y0, r, g, b);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }
};

// 5x7 glyphs for numeric labels ("0123456789-.e+"), one bit per pixel.
constexpr const char* kGlyphs[] = {
    "01110100011001110101110011000101110",  // 0
    "00100011000010000100001000010011111",  // 1
    "01110100010000100110010001000011111",  // 2
    "01110100010000100110000011000101110",  // 3
    "00010001100101010010111110001000010",  // 4
    "11111100001111000001000011000101110",  // 5
    "00110010001000011110100011000101110",  // 6
    "11111000010001000100010001000010000",  // 7
    "01110100011000101110100011000101110",  // 8
    "01110100011000101111000010001001100",  // 9
    "00000000000000011111000000000000000",  // -
    "00000000000000000000000000110001100",  // .
    "00000000000111010001111111000001110",  // e
    "00000001000010011111001000010000000",  // +
};

int glyph_index(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c == '-') return 10;
    if (c == '.') return 11;
    if (c == 'e' || c == 'E') return 12;
    if (c == '+') return 13;
    return -1;
}

void draw_text(Canvas& cv, int x, int y, const std::string& text) {
    for (char c : text) {
        const int gi = glyph_index(c);
        if (gi >= 0)
            for (int r = 0; r < 7; ++r)
                for (int cc = 0; cc < 5; ++cc)
                    if (kGlyphs[gi][r * 5 + cc] == '1') cv.set(x + cc, y + r, 40, 40, 40);
        x += 6;
    }
}

std::string format_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

void write_png(const std::filesystem::path& file, const Canvas& cv) {
    FILE* fp = std::fopen(file.string().c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot open for writing: " + file.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw std::runtime_error("png encode failed: " + file.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, cv.w, cv.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < cv.h; ++y)
        png_write_row(png, const_cast<png_bytep>(&cv.rgb[std::size_t(y) * cv.w * 3]));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace

void write_line_plot_png(const std::filesystem::path& file, const std::vector<double>& x,
                         const std::vector<double>& y, int width, int height) {
    if (x.size() != y.size() || x.empty())
        throw std::invalid_argument("write_line_plot_png: need equal, non-empty x/y");
    Canvas cv(width, height);
    const int ml = 78, mr = 16, mt = 14, mb = 26;
    const int px0 = ml, px1 = width - mr, py0 = height - mb, py1 = mt;

    double xmin = *std::min_element(x.begin(), x.end());
    double xmax = *std::max_element(x.begin(), x.end());
    double ymin = *std::min_element(y.begin(), y.end());
    double ymax = *std::max_element(y.begin(), y.end());
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto sx = [&](double v) { return int(px0 + (v - xmin) / (xmax - xmin) * (px1 - px0)); };
    auto sy = [&](double v) { return int(py0 - (v - ymin) / (ymax - ymin) * (py0 - py1)); };

    // gridlines + tick labels
    for (int i = 0; i <= 4; ++i) {
        const double v = ymin + (ymax - ymin) * i / 4.0;
        const int yy = sy(v);
        cv.line(px0, yy, px1, yy, 225, 225, 225);
        draw_text(cv, 4, yy - 3, format_tick(v));
    }
    for (int i = 0; i <= 4; ++i) {
        const double v = xmin + (xmax - xmin) * i / 4.0;
        const int xx = sx(v);
        cv.line(xx, py0, xx, py1, 235, 235, 235);
        draw_text(cv, xx - 12, py0 + 6, format_tick(v));
    }
    // axes
    cv.line(px0, py0, px1, py0, 30, 30, 30);
    cv.line(px0, py0, px0, py1, 30, 30, 30);

    // polyline (doubled for thickness)
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        cv.line(sx(x[i]), sy(y[i]), sx(x[i + 1]), sy(y[i + 1]), 31, 98, 189);
        cv.line(sx(x[i]), sy(y[i]) + 1, sx(x[i + 1]), sy(y[i + 1]) + 1, 31, 98, 189);
    }
    write_png(file, cv);
}

}  // namespace hydrocube
