#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fieldscout/common.hpp"
#include "fieldscout/image_io.hpp"

namespace fieldscout {

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;
};

namespace detail {

// 5x7 bitmap glyphs, one byte per row, 5 LSB-to-MSB columns left to right.
inline const uint8_t* glyph5x7(char c) {
    static const uint8_t digits[10][7] = {
        {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}, {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e},
        {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}, {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e},
        {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}, {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e},
        {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}, {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
        {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}, {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}};
    static const uint8_t letters[26][7] = {
        {0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}, {0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e},
        {0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e}, {0x1c, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1c},
        {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f}, {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10},
        {0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f}, {0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11},
        {0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}, {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c},
        {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}, {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f},
        {0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}, {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11},
        {0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}, {0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10},
        {0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d}, {0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11},
        {0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e}, {0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},
        {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}, {0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04},
        {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0a}, {0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11},
        {0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04}, {0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f}};
    static const uint8_t dot[7] = {0, 0, 0, 0, 0, 0x0c, 0x0c};
    static const uint8_t minus[7] = {0, 0, 0, 0x0e, 0, 0, 0};
    static const uint8_t plus[7] = {0, 0x04, 0x04, 0x1f, 0x04, 0x04, 0};
    static const uint8_t underscore[7] = {0, 0, 0, 0, 0, 0, 0x1f};
    static const uint8_t slash[7] = {0x01, 0x02, 0x02, 0x04, 0x08, 0x08, 0x10};
    static const uint8_t percent[7] = {0x19, 0x1a, 0x02, 0x04, 0x08, 0x0b, 0x13};
    static const uint8_t colon[7] = {0, 0x0c, 0x0c, 0, 0x0c, 0x0c, 0};
    static const uint8_t blank[7] = {0, 0, 0, 0, 0, 0, 0};

    if (c >= '0' && c <= '9') return digits[c - '0'];
    if (c >= 'A' && c <= 'Z') return letters[c - 'A'];
    if (c >= 'a' && c <= 'z') return letters[c - 'a'];
    switch (c) {
    case '.': return dot;
    case '-': return minus;
    case '+': return plus;
    case '_': return underscore;
    case '/': return slash;
    case '%': return percent;
    case ':': return colon;
    default: return blank;
    }
}

} // namespace detail

/// Minimal RGB canvas: lines, rectangles and 5x7 bitmap text.
class Canvas {
public:
    Canvas(int w, int h, Rgb fill = {255, 255, 255}) : w_(w), h_(h) {
        px_.resize(size_t(w) * h * 3);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) set(x, y, fill);
    }

    int width() const { return w_; }
    int height() const { return h_; }

    void set(int x, int y, Rgb c) {
        if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
        size_t i = (size_t(y) * w_ + x) * 3;
        px_[i] = c.r;
        px_[i + 1] = c.g;
        px_[i + 2] = c.b;
    }

    void fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
        for (int y = std::max(0, y0); y < std::min(h_, y1); ++y)
            for (int x = std::max(0, x0); x < std::min(w_, x1); ++x) set(x, y, c);
    }

    void line(int x0, int y0, int x1, int y1, Rgb c) {
        int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            set(x0, y0, c);
            if (x0 == x1 && y0 == y1) break;
            int e2 = 2 * err;
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

    void text(int x, int y, const std::string& s, Rgb c) {
        for (char ch : s) {
            const uint8_t* g = detail::glyph5x7(ch);
            for (int row = 0; row < 7; ++row)
                for (int col = 0; col < 5; ++col)
                    if (g[row] & (1 << (4 - col))) set(x + col, y + row, c);
            x += 6;
        }
    }

    void save(const std::string& path) const {
        Image8 img;
        img.width = w_;
        img.height = h_;
        img.channels = 3;
        img.pixels = px_;
        save_png(path, img);
    }

private:
    int w_, h_;
    std::vector<uint8_t> px_;
};

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

inline Rgb plot_color(size_t i) {
    static const Rgb palette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                                  {214, 39, 40},  {148, 103, 189}, {140, 86, 75},
                                  {227, 119, 194}};
    return palette[i % 7];
}

/// Simple line plot with axes, ticks and a legend.
inline void line_plot(const std::string& path, const std::string& title,
                      const std::vector<PlotSeries>& series, int width = 640, int height = 420) {
    Canvas cv(width, height);
    const int ml = 60, mr = 15, mt = 28, mb = 36;
    const int x0 = ml, y0 = mt, x1 = width - mr, y1 = height - mb;
    Rgb black{0, 0, 0}, grey{200, 200, 200};

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool any = false;
    for (const auto& s : series)
        for (size_t i = 0; i < s.y.size(); ++i) {
            double xv = i < s.x.size() ? s.x[i] : double(i);
            if (!any) {
                xmin = xmax = xv;
                ymin = ymax = s.y[i];
                any = true;
            }
            xmin = std::min(xmin, xv);
            xmax = std::max(xmax, xv);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double v) { return x0 + int((v - xmin) / (xmax - xmin) * (x1 - x0)); };
    auto py = [&](double v) { return y1 - int((v - ymin) / (ymax - ymin) * (y1 - y0)); };

    auto short_fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        return std::string(buf);
    };
    for (int t = 0; t <= 4; ++t) {
        double xv = xmin + (xmax - xmin) * t / 4.0;
        double yv = ymin + (ymax - ymin) * t / 4.0;
        cv.line(px(xv), y0, px(xv), y1, grey);
        cv.line(x0, py(yv), x1, py(yv), grey);
        cv.text(px(xv) - 8, y1 + 6, short_fmt(xv), black);
        cv.text(4, py(yv) - 3, short_fmt(yv), black);
    }
    cv.line(x0, y0, x0, y1, black);
    cv.line(x0, y1, x1, y1, black);
    cv.text(x0, 8, title, black);

    for (size_t si = 0; si < series.size(); ++si) {
        Rgb c = plot_color(si);
        const auto& s = series[si];
        for (size_t i = 0; i + 1 < s.y.size(); ++i) {
            double xa = i < s.x.size() ? s.x[i] : double(i);
            double xb = i + 1 < s.x.size() ? s.x[i + 1] : double(i + 1);
            cv.line(px(xa), py(s.y[i]), px(xb), py(s.y[i + 1]), c);
        }
        int ly = y0 + 6 + int(si) * 12;
        cv.fill_rect(x1 - 110, ly, x1 - 100, ly + 8, c);
        cv.text(x1 - 96, ly, s.name, black);
    }
    cv.save(path);
}

/// Ground truth with the flown trajectory, start marker green, end marker red.
inline void trajectory_overlay(const std::string& path, const std::vector<double>& truth,
                               int res, const std::vector<Vec2>& poses) {
    Canvas cv(res, res);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            auto v = uint8_t(std::lround(clamp01(truth[size_t(y) * res + x]) * 255.0));
            cv.set(x, y, {v, v, v});
        }
    Rgb track{255, 196, 0};
    for (size_t i = 0; i + 1 < poses.size(); ++i)
        cv.line(int(poses[i].x * res), int(poses[i].y * res), int(poses[i + 1].x * res),
                int(poses[i + 1].y * res), track);
    auto marker = [&](Vec2 p, Rgb c) {
        int cx = int(p.x * res), cy = int(p.y * res);
        cv.fill_rect(cx - 3, cy - 3, cx + 4, cy + 4, c);
    };
    if (!poses.empty()) {
        marker(poses.front(), {0, 200, 0});
        marker(poses.back(), {220, 0, 0});
    }
    cv.save(path);
}

} // namespace fieldscout
