#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fieldscout/common.hpp"
#include "fieldscout/image_io.hpp"

namespace fieldscout {

constexpr double kDefaultGsd = 0.0104; // metres per pixel

/// Ground-truth scalar field. Values in [0,1], 1 = weed. Planner and GP work
/// in unit-square coordinates; width*gsd converts back to metres.
struct WeedRaster {
    int width = 0;
    int height = 0;
    std::vector<double> values; // row-major
    double gsd = kDefaultGsd;

    double at(int x, int y) const { return values[size_t(y) * width + x]; }
    double& at(int x, int y) { return values[size_t(y) * width + x]; }

    double map_size_m() const { return width * gsd; }

    // Nearest pixel for a unit-square coordinate.
    double sample(double x, double y) const {
        int px = std::clamp(int(x * width), 0, width - 1);
        int py = std::clamp(int(y * height), 0, height - 1);
        return at(px, py);
    }

    void validate() const {
        if (width <= 0 || height <= 0) throw validation_error("raster has zero size");
        if (gsd <= 0.0) throw validation_error("raster gsd must be positive");
        for (double v : values)
            if (v < 0.0 || v > 1.0) throw validation_error("raster value outside [0,1]");
    }
};

/// One pooled training sample for the GP.
struct Observation {
    double x = 0.0; // unit-square coordinates
    double y = 0.0;
    double value = 0.0;
};

enum class WeedChannel { red, green, blue, gray };

inline WeedChannel weed_channel_from_string(const std::string& s) {
    if (s == "red") return WeedChannel::red;
    if (s == "green") return WeedChannel::green;
    if (s == "blue") return WeedChannel::blue;
    if (s == "gray" || s == "grey") return WeedChannel::gray;
    throw validation_error("unknown weed channel: " + s);
}

/// Load an 8-bit PNG/PGM raster and scale to [0,1]. RGB inputs are reduced to
/// the selected weed channel (the dataset convention labels weeds in red).
inline WeedRaster load_raster(const std::string& path, double gsd = kDefaultGsd,
                              WeedChannel channel = WeedChannel::red) {
    Image8 img = load_image(path);
    if (img.width <= 0 || img.height <= 0) throw validation_error(path + ": zero-size image");
    if (gsd <= 0.0) throw validation_error("gsd must be positive");

    WeedRaster r;
    r.width = img.width;
    r.height = img.height;
    r.gsd = gsd;
    r.values.resize(size_t(img.width) * img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double v;
            if (img.channels == 1) {
                v = img.at(x, y) / 255.0;
            } else {
                switch (channel) {
                case WeedChannel::red: v = img.at(x, y, 0) / 255.0; break;
                case WeedChannel::green: v = img.at(x, y, 1) / 255.0; break;
                case WeedChannel::blue: v = img.at(x, y, 2) / 255.0; break;
                default:
                    v = (img.at(x, y, 0) * 0.299 + img.at(x, y, 1) * 0.587 +
                         img.at(x, y, 2) * 0.114) / 255.0;
                }
            }
            r.values[size_t(y) * img.width + x] = v;
        }
    }
    return r;
}

/// Gaussian blob in unit-square coordinates.
struct Blob {
    double cx = 0.5;
    double cy = 0.5;
    double radius = 0.1;
    double amplitude = 1.0;
};

struct SynthSpec {
    int width = 256;
    int height = 256;
    double gsd = kDefaultGsd;
    std::vector<Blob> blobs;
    double noise = 0.0; // i.i.d. Gaussian sigma, clamped after addition
};

/// Deterministic synthetic ground truth: sum of Gaussian blobs plus noise,
/// clamped to [0,1]. Zero blobs and zero noise gives an all-zero raster.
inline WeedRaster synth_field(const SynthSpec& spec, uint64_t seed) {
    if (spec.width <= 0 || spec.height <= 0)
        throw validation_error("synthetic field spec has zero size");
    if (spec.gsd <= 0.0) throw validation_error("synthetic field gsd must be positive");
    for (const Blob& b : spec.blobs) {
        if (b.radius <= 0.0) throw validation_error("blob radius must be positive");
        if (b.cx < 0.0 || b.cx > 1.0 || b.cy < 0.0 || b.cy > 1.0)
            throw validation_error("blob centre outside unit square");
    }

    WeedRaster r;
    r.width = spec.width;
    r.height = spec.height;
    r.gsd = spec.gsd;
    r.values.assign(size_t(spec.width) * spec.height, 0.0);

    for (int py = 0; py < spec.height; ++py) {
        double y = (py + 0.5) / spec.height;
        for (int px = 0; px < spec.width; ++px) {
            double x = (px + 0.5) / spec.width;
            double v = 0.0;
            for (const Blob& b : spec.blobs) {
                double dx = x - b.cx, dy = y - b.cy;
                v += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.radius * b.radius));
            }
            r.at(px, py) = v;
        }
    }
    if (spec.noise > 0.0) {
        Rng rng(seed);
        for (double& v : r.values) v += spec.noise * rng.normal();
    }
    for (double& v : r.values) v = clamp01(v);
    return r;
}

/// Mean over a clipped patch_px x patch_px patch centred on a pixel.
inline double patch_mean(const WeedRaster& r, int cx, int cy, int patch_px) {
    int half = patch_px / 2;
    int x0 = std::max(0, cx - half);
    int y0 = std::max(0, cy - half);
    int x1 = std::min(r.width, cx - half + patch_px);
    int y1 = std::min(r.height, cy - half + patch_px);
    double sum = 0.0;
    long n = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            sum += r.at(x, y);
            ++n;
        }
    return n > 0 ? sum / double(n) : 0.0;
}

/// Random uniform points with average pooling over patch_px x patch_px
/// patches (clipped at the borders). Reproducible for a fixed seed.
inline std::vector<Observation> pooled_samples(const WeedRaster& r, int n, int patch_px,
                                               uint64_t seed) {
    if (n < 1) throw validation_error("pooled_samples needs n >= 1");
    if (patch_px < 1) throw validation_error("pooled_samples needs patch_px >= 1");
    r.validate();

    Rng rng(seed);
    std::vector<Observation> obs;
    obs.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        double x = rng.uniform();
        double y = rng.uniform();
        int px = std::clamp(int(x * r.width), 0, r.width - 1);
        int py = std::clamp(int(y * r.height), 0, r.height - 1);
        obs.push_back({x, y, patch_mean(r, px, py, patch_px)});
    }
    return obs;
}

/// Camera footprint side length before rounding: 2 * H * tan(FOV/2) / GSD.
inline double footprint_px_exact(double altitude_m, double fov_deg, double gsd) {
    if (altitude_m <= 0.0) throw validation_error("altitude must be positive");
    if (fov_deg <= 0.0 || fov_deg >= 180.0) throw validation_error("fov must be in (0,180)");
    if (gsd <= 0.0) throw validation_error("gsd must be positive");
    double half_angle = fov_deg * M_PI / 360.0;
    return 2.0 * altitude_m * std::tan(half_angle) / gsd;
}

/// Square footprint side in pixels, rounded to the nearest integer (>= 1).
inline int footprint_px(double altitude_m, double fov_deg, double gsd) {
    long n = std::lround(footprint_px_exact(altitude_m, fov_deg, gsd));
    return int(std::max(1L, n));
}

/// Footprint patch extracted from the raster, with its pixel bounds recorded
/// for coverage masking. Bounds are half-open [x0,x1) x [y0,y1).
struct FootprintPatch {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    std::vector<double> values;
    double mean = 0.0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
};

inline FootprintPatch extract_footprint(const WeedRaster& r, Vec2 centre, int size_px) {
    if (centre.x < 0.0 || centre.x > 1.0 || centre.y < 0.0 || centre.y > 1.0)
        throw validation_error("footprint centre outside unit square");
    if (size_px < 1) throw validation_error("footprint size must be >= 1");

    int cx = std::clamp(int(centre.x * r.width), 0, r.width - 1);
    int cy = std::clamp(int(centre.y * r.height), 0, r.height - 1);
    int half = size_px / 2;

    FootprintPatch p;
    p.x0 = std::max(0, cx - half);
    p.y0 = std::max(0, cy - half);
    p.x1 = std::min(r.width, cx - half + size_px);
    p.y1 = std::min(r.height, cy - half + size_px);
    p.values.reserve(size_t(p.width()) * p.height());
    double sum = 0.0;
    for (int y = p.y0; y < p.y1; ++y)
        for (int x = p.x0; x < p.x1; ++x) {
            double v = r.at(x, y);
            p.values.push_back(v);
            sum += v;
        }
    p.mean = p.values.empty() ? 0.0 : sum / double(p.values.size());
    return p;
}

/// Area-average downsample of a raster onto a square field grid.
inline Field to_field(const WeedRaster& r, int resolution) {
    Field f(resolution);
    for (int gy = 0; gy < resolution; ++gy) {
        int y0 = int(std::floor(double(gy) * r.height / resolution));
        int y1 = std::max(y0 + 1, int(std::floor(double(gy + 1) * r.height / resolution)));
        y1 = std::min(y1, r.height);
        for (int gx = 0; gx < resolution; ++gx) {
            int x0 = int(std::floor(double(gx) * r.width / resolution));
            int x1 = std::max(x0 + 1, int(std::floor(double(gx + 1) * r.width / resolution)));
            x1 = std::min(x1, r.width);
            double sum = 0.0;
            long n = 0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    sum += r.at(x, y);
                    ++n;
                }
            f.at(gx, gy) = n > 0 ? sum / double(n) : 0.0;
        }
    }
    return f;
}

} // namespace fieldscout
