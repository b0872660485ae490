#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fieldscout/common.hpp"
#include "fieldscout/gp.hpp"
#include "fieldscout/partition.hpp"
#include "fieldscout/raster.hpp"

namespace fieldscout {

/// Fidelity of one representation against the reference grid.
struct FidelityReport {
    double ssim_complement = 0.0; // 1 - SSIM
    long hamming = 0;
    double mse = 0.0;
    double build_time = 0.0; // seconds
    size_t memory = 0;       // serialised partition bytes
};

struct FieldFeatures {
    double weed_coverage_ratio = 0.0;
    long num_weed_patches = 0;
    double largest_patch_fraction = 0.0;
    double avg_patch_size = 0.0;
    double patch_size_std = 0.0;
    long dbscan_num_clusters = 0;
    double dbscan_avg_cluster_size = 0.0;
};

/// Windowed SSIM (7x7 uniform window, sample covariance, dynamic range 1.0),
/// averaged over all fully interior window positions.
inline double ssim(const Field& a, const Field& b, int window = 7) {
    if (a.resolution != b.resolution || a.values.size() != b.values.size())
        throw validation_error("ssim: dimension mismatch");
    const int res = a.resolution;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    int w = std::min(window, res);

    detail::Sat sa(a.values, res, res), sb(b.values, res, res);
    std::vector<double> ab(a.values.size());
    for (size_t i = 0; i < ab.size(); ++i) ab[i] = a.values[i] * b.values[i];
    detail::Sat sab(ab, res, res);

    const double n = double(w) * w;
    const double corr = n > 1 ? n / (n - 1) : 1.0;
    double total = 0.0;
    long windows = 0;
    for (int y0 = 0; y0 + w <= res; ++y0)
        for (int x0 = 0; x0 + w <= res; ++x0) {
            int x1 = x0 + w, y1 = y0 + w;
            double mx = sa.sum(x0, y0, x1, y1) / n;
            double my = sb.sum(x0, y0, x1, y1) / n;
            double vx = corr * (sa.sum2(x0, y0, x1, y1) / n - mx * mx);
            double vy = corr * (sb.sum2(x0, y0, x1, y1) / n - my * my);
            double cxy = corr * (sab.sum(x0, y0, x1, y1) / n - mx * my);
            total += ((2 * mx * my + c1) * (2 * cxy + c2)) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++windows;
        }
    return total / double(windows);
}

/// DCT-based perceptual hash as a packed bit vector.
struct PerceptualHash {
    int bits = 0;
    std::vector<uint64_t> words;
};

namespace detail {

inline std::vector<double> resize_area(const std::vector<double>& v, int src, int dst) {
    std::vector<double> out(size_t(dst) * dst, 0.0);
    for (int gy = 0; gy < dst; ++gy) {
        int y0 = int(std::floor(double(gy) * src / dst));
        int y1 = std::max(y0 + 1, int(std::floor(double(gy + 1) * src / dst)));
        y1 = std::min(y1, src);
        for (int gx = 0; gx < dst; ++gx) {
            int x0 = int(std::floor(double(gx) * src / dst));
            int x1 = std::max(x0 + 1, int(std::floor(double(gx + 1) * src / dst)));
            x1 = std::min(x1, src);
            double s = 0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) s += v[size_t(y) * src + x];
            out[size_t(gy) * dst + gx] = s / (double(x1 - x0) * (y1 - y0));
        }
    }
    return out;
}

// Separable DCT-II, no normalisation (only coefficient ordering matters for
// the median threshold).
inline std::vector<double> dct2(const std::vector<double>& v, int n) {
    std::vector<double> tmp(size_t(n) * n, 0.0), out(size_t(n) * n, 0.0);
    std::vector<double> table(size_t(n) * n);
    for (int u = 0; u < n; ++u)
        for (int x = 0; x < n; ++x)
            table[size_t(u) * n + x] = std::cos(M_PI * (2 * x + 1) * u / (2.0 * n));
    for (int y = 0; y < n; ++y)
        for (int u = 0; u < n; ++u) {
            double s = 0;
            for (int x = 0; x < n; ++x) s += v[size_t(y) * n + x] * table[size_t(u) * n + x];
            tmp[size_t(y) * n + u] = s;
        }
    for (int u = 0; u < n; ++u)
        for (int vfreq = 0; vfreq < n; ++vfreq) {
            double s = 0;
            for (int y = 0; y < n; ++y) s += tmp[size_t(y) * n + u] * table[size_t(vfreq) * n + y];
            out[size_t(vfreq) * n + u] = s;
        }
    return out;
}

} // namespace detail

/// Resize, 2D DCT, keep the low-frequency block, threshold at the median.
inline PerceptualHash perceptual_hash(const Field& a, int hash_bits = 4096) {
    int block = int(std::lround(std::sqrt(double(hash_bits))));
    if (block * block != hash_bits || hash_bits < 4)
        throw validation_error("perceptual_hash: hash_bits must be a square number");
    if (a.resolution <= 0) throw validation_error("perceptual_hash: empty field");

    int work = 2 * block;
    std::vector<double> resized = detail::resize_area(a.values, a.resolution, work);
    std::vector<double> coeff = detail::dct2(resized, work);

    std::vector<double> low(static_cast<size_t>(hash_bits));
    for (int y = 0; y < block; ++y)
        for (int x = 0; x < block; ++x) low[size_t(y) * block + x] = coeff[size_t(y) * work + x];

    std::vector<double> sorted = low;
    std::nth_element(sorted.begin(), sorted.begin() + hash_bits / 2, sorted.end());
    double upper = sorted[size_t(hash_bits) / 2];
    double lower = *std::max_element(sorted.begin(), sorted.begin() + hash_bits / 2);
    double median = hash_bits % 2 ? upper : 0.5 * (lower + upper);

    PerceptualHash h;
    h.bits = hash_bits;
    h.words.assign(size_t(hash_bits + 63) / 64, 0);
    for (int i = 0; i < hash_bits; ++i)
        if (low[size_t(i)] > median) h.words[size_t(i) / 64] |= uint64_t(1) << (i % 64);
    return h;
}

inline long hamming(const PerceptualHash& h1, const PerceptualHash& h2) {
    if (h1.bits != h2.bits || h1.words.size() != h2.words.size())
        throw validation_error("hamming: length mismatch");
    long d = 0;
    for (size_t i = 0; i < h1.words.size(); ++i)
        d += std::popcount(h1.words[i] ^ h2.words[i]);
    return d;
}

inline double mse(const Field& a, const Field& b) {
    if (a.resolution != b.resolution || a.values.size() != b.values.size())
        throw validation_error("mse: dimension mismatch");
    double s = 0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        double d = a.values[i] - b.values[i];
        s += d * d;
    }
    return s / double(a.values.size());
}

/// RMSE between the GP mean and the ground truth at n random coordinates.
inline double rmse_vs_truth(const GPModel& model, const WeedRaster& truth, int n = 5000,
                            uint64_t seed = 0) {
    if (n < 1) throw validation_error("rmse_vs_truth needs n >= 1");
    Rng rng(seed);
    std::vector<Vec2> pts(static_cast<size_t>(n));
    for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
    std::vector<double> mean, var;
    predict(model, pts, mean, var);
    double s = 0;
    for (int i = 0; i < n; ++i) {
        double d = mean[size_t(i)] - truth.sample(pts[size_t(i)].x, pts[size_t(i)].y);
        s += d * d;
    }
    return std::sqrt(s / double(n));
}

/// Mean predictive variance over a square evaluation grid.
inline double mean_uncertainty(const GPModel& model, int grid_res) {
    if (grid_res < 1) throw validation_error("mean_uncertainty needs grid_res >= 1");
    std::vector<Vec2> pts;
    pts.reserve(size_t(grid_res) * grid_res);
    for (int y = 0; y < grid_res; ++y)
        for (int x = 0; x < grid_res; ++x)
            pts.push_back({(x + 0.5) / grid_res, (y + 0.5) / grid_res});
    std::vector<double> mean, var;
    predict(model, pts, mean, var);
    double s = 0;
    for (double v : var) s += v;
    return s / double(var.size());
}

/// (weed coverage, map coverage) for a sensed mask against the ground truth.
/// With no weed pixels at all, weed coverage is vacuously 1.
inline std::pair<double, double> coverage(const CoverageMask& mask, const WeedRaster& truth,
                                          double weed_threshold = 0.5) {
    if (mask.resolution != truth.width || mask.resolution != truth.height)
        throw validation_error("coverage: mask dimensions must match the truth raster");
    long weed = 0, weed_seen = 0, seen = 0;
    const long total = long(truth.width) * truth.height;
    for (int y = 0; y < truth.height; ++y)
        for (int x = 0; x < truth.width; ++x) {
            bool w = truth.at(x, y) > weed_threshold;
            bool m = mask.at(x, y) != 0;
            weed += w;
            weed_seen += (w && m);
            seen += m;
        }
    double weed_cov = weed == 0 ? 1.0 : double(weed_seen) / double(weed);
    return {weed_cov, double(seen) / double(total)};
}

namespace detail {

// 8-connected components of a boolean mask, scan-order labels.
inline std::vector<long> patch_sizes(const std::vector<uint8_t>& mask, int w, int h) {
    std::vector<int32_t> label(mask.size(), -1);
    std::vector<long> sizes;
    std::vector<int32_t> stack;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int32_t i = int32_t(y) * w + x;
            if (!mask[size_t(i)] || label[size_t(i)] >= 0) continue;
            int32_t id = int32_t(sizes.size());
            sizes.push_back(0);
            stack.push_back(i);
            label[size_t(i)] = id;
            while (!stack.empty()) {
                int32_t c = stack.back();
                stack.pop_back();
                ++sizes[size_t(id)];
                int cx = c % w, cy = c / w;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        int32_t nb = int32_t(ny) * w + nx;
                        if (mask[size_t(nb)] && label[size_t(nb)] < 0) {
                            label[size_t(nb)] = id;
                            stack.push_back(nb);
                        }
                    }
            }
        }
    return sizes;
}

struct DbscanResult {
    long clusters = 0;
    double avg_size = 0.0;
};

// Grid-bucketed DBSCAN over pixel coordinates, sklearn neighbour convention
// (a point counts itself).
inline DbscanResult dbscan(const std::vector<Vec2>& pts, double eps, int min_pts) {
    const int n = int(pts.size());
    DbscanResult out;
    if (n == 0) return out;
    double cell = eps;
    std::map<std::pair<int, int>, std::vector<int>> buckets;
    for (int i = 0; i < n; ++i)
        buckets[{int(std::floor(pts[size_t(i)].x / cell)),
                 int(std::floor(pts[size_t(i)].y / cell))}]
            .push_back(i);
    auto neighbours = [&](int i) {
        std::vector<int> out_nb;
        int bx = int(std::floor(pts[size_t(i)].x / cell));
        int by = int(std::floor(pts[size_t(i)].y / cell));
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                auto it = buckets.find({bx + dx, by + dy});
                if (it == buckets.end()) continue;
                for (int j : it->second) {
                    double ddx = pts[size_t(i)].x - pts[size_t(j)].x;
                    double ddy = pts[size_t(i)].y - pts[size_t(j)].y;
                    if (ddx * ddx + ddy * ddy <= eps * eps) out_nb.push_back(j);
                }
            }
        return out_nb;
    };

    std::vector<int32_t> label(size_t(n), -2); // -2 unvisited, -1 noise
    std::vector<long> sizes;
    for (int i = 0; i < n; ++i) {
        if (label[size_t(i)] != -2) continue;
        auto nb = neighbours(i);
        if (int(nb.size()) < min_pts) {
            label[size_t(i)] = -1;
            continue;
        }
        int32_t id = int32_t(sizes.size());
        sizes.push_back(0);
        label[size_t(i)] = id;
        std::vector<int> frontier = nb;
        for (size_t k = 0; k < frontier.size(); ++k) {
            int j = frontier[k];
            if (label[size_t(j)] == -1) label[size_t(j)] = id; // noise becomes border
            if (label[size_t(j)] != -2) continue;
            label[size_t(j)] = id;
            auto nb2 = neighbours(j);
            if (int(nb2.size()) >= min_pts)
                frontier.insert(frontier.end(), nb2.begin(), nb2.end());
        }
    }
    for (int32_t l : label)
        if (l >= 0) ++sizes[size_t(l)];
    out.clusters = long(sizes.size());
    if (!sizes.empty()) {
        double s = 0;
        for (long v : sizes) s += double(v);
        out.avg_size = s / double(sizes.size());
    }
    return out;
}

} // namespace detail

/// The seven per-field features correlated against method scores: coverage
/// ratio, 8-connected patch statistics, and DBSCAN cluster statistics.
inline FieldFeatures field_features(const WeedRaster& truth, double weed_threshold = 0.5,
                                    double dbscan_eps = 5.0, int dbscan_min_pts = 10) {
    if (dbscan_eps <= 0.0 || dbscan_min_pts < 1)
        throw validation_error("field_features: invalid DBSCAN parameters");
    FieldFeatures out;
    std::vector<uint8_t> mask(truth.values.size());
    long weed = 0;
    for (size_t i = 0; i < truth.values.size(); ++i) {
        mask[i] = truth.values[i] > weed_threshold;
        weed += mask[i];
    }
    out.weed_coverage_ratio = double(weed) / double(truth.values.size());

    auto sizes = detail::patch_sizes(mask, truth.width, truth.height);
    out.num_weed_patches = long(sizes.size());
    if (!sizes.empty()) {
        long largest = *std::max_element(sizes.begin(), sizes.end());
        out.largest_patch_fraction = weed > 0 ? double(largest) / double(weed) : 0.0;
        double mean = 0;
        for (long s : sizes) mean += double(s);
        mean /= double(sizes.size());
        out.avg_patch_size = mean;
        double var = 0;
        for (long s : sizes) var += (double(s) - mean) * (double(s) - mean);
        out.patch_size_std = std::sqrt(var / double(sizes.size()));
    }

    std::vector<Vec2> pts;
    for (int y = 0; y < truth.height; ++y)
        for (int x = 0; x < truth.width; ++x)
            if (mask[size_t(y) * truth.width + x]) pts.push_back({double(x), double(y)});
    auto db = detail::dbscan(pts, dbscan_eps, dbscan_min_pts);
    out.dbscan_num_clusters = db.clusters;
    out.dbscan_avg_cluster_size = db.avg_size;
    return out;
}

/// Min-max normalise each metric column across methods (all columns are
/// lower-is-better, so 1 = best after orientation), then average the
/// normalised columns into one composite score per method. A degenerate
/// column (max = min) contributes 1 for every method.
inline std::vector<double> composite_scores(const std::vector<std::vector<double>>& columns,
                                            size_t n_methods) {
    if (n_methods < 2) throw validation_error("composite_scores needs at least two methods");
    if (columns.empty()) throw validation_error("composite_scores needs at least one metric");
    std::vector<double> scores(n_methods, 0.0);
    for (const auto& col : columns) {
        if (col.size() != n_methods)
            throw validation_error("composite_scores: ragged metric column");
        double lo = *std::min_element(col.begin(), col.end());
        double hi = *std::max_element(col.begin(), col.end());
        for (size_t i = 0; i < n_methods; ++i)
            scores[i] += hi == lo ? 1.0 : (hi - col[i]) / (hi - lo);
    }
    for (double& s : scores) s /= double(columns.size());
    return scores;
}

namespace detail {

inline std::vector<double> average_ranks(const std::vector<double>& x) {
    const size_t n = x.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> rank(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        double avg = 0.5 * (double(i) + double(j)) + 1.0;
        for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    return rank;
}

} // namespace detail

/// Spearman's rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw validation_error("spearman: length mismatch");
    if (x.size() < 3) throw validation_error("spearman needs at least 3 samples");
    auto rx = detail::average_ranks(x);
    auto ry = detail::average_ranks(y);
    const double n = double(x.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        throw validation_error("spearman undefined: zero rank variance");
    return sxy / std::sqrt(sxx * syy);
}

} // namespace fieldscout
