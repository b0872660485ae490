#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fieldscout/common.hpp"

namespace fieldscout {

enum class PartitionMethod { grid, quadtree, wedgelet, bsp_lse, bsp_region, hexagon, voronoi };

inline const char* to_string(PartitionMethod m) {
    switch (m) {
    case PartitionMethod::grid: return "grid";
    case PartitionMethod::quadtree: return "quadtree";
    case PartitionMethod::wedgelet: return "wedgelet";
    case PartitionMethod::bsp_lse: return "bsp_lse";
    case PartitionMethod::bsp_region: return "bsp_region";
    case PartitionMethod::hexagon: return "hexagon";
    case PartitionMethod::voronoi: return "voronoi";
    }
    return "?";
}

inline PartitionMethod partition_method_from_string(const std::string& s) {
    for (auto m : {PartitionMethod::grid, PartitionMethod::quadtree, PartitionMethod::wedgelet,
                   PartitionMethod::bsp_lse, PartitionMethod::bsp_region,
                   PartitionMethod::hexagon, PartitionMethod::voronoi})
        if (s == to_string(m)) return m;
    throw validation_error("unknown partition method: " + s);
}

enum class CellGeom : uint8_t { rect, wedge_half, polygon, hexagon, pixel_set };

/// One cell of a partition. The pixel index map is the authoritative
/// geometry; the descriptor fields below keep enough structure for the
/// compact serialisation and the text dump.
struct Cell {
    int id = 0;
    double mean_value = 0.0;
    Vec2 centroid{}; // unit-square coordinates, guaranteed inside the cell
    long area_px = 0;
    CellGeom geom = CellGeom::pixel_set;

    int rx = 0, ry = 0, rw = 0, rh = 0;       // rect methods, pixel units
    float line_theta = 0.f, line_offset = 0.f; // wedge / bsp split line
    int8_t line_side = 0;
    uint8_t depth = 0;
    int16_t hex_q = 0, hex_r = 0;
    uint8_t hex_level = 0;
    Vec2 seed{}; // voronoi generator, unit-square coordinates
};

/// A complete tiling of the field: every pixel maps to exactly one cell.
struct Partition {
    PartitionMethod method = PartitionMethod::grid;
    int resolution = 0;
    std::vector<Cell> cells;
    std::vector<int32_t> index; // resolution^2 pixel -> cell id

    int32_t label(int x, int y) const { return index[size_t(y) * resolution + x]; }
};

namespace detail {

// Summed-area tables for O(1) rectangle mean/variance.
struct Sat {
    int w = 0, h = 0;
    std::vector<double> s, s2;

    Sat(const std::vector<double>& v, int width, int height) : w(width), h(height) {
        s.assign(size_t(w + 1) * (h + 1), 0.0);
        s2.assign(size_t(w + 1) * (h + 1), 0.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double val = v[size_t(y) * w + x];
                size_t i = size_t(y + 1) * (w + 1) + (x + 1);
                s[i] = val + s[i - 1] + s[i - (w + 1)] - s[i - (w + 1) - 1];
                s2[i] = val * val + s2[i - 1] + s2[i - (w + 1)] - s2[i - (w + 1) - 1];
            }
    }
    // half-open [x0,x1) x [y0,y1)
    double sum(int x0, int y0, int x1, int y1) const {
        return s[size_t(y1) * (w + 1) + x1] - s[size_t(y0) * (w + 1) + x1] -
               s[size_t(y1) * (w + 1) + x0] + s[size_t(y0) * (w + 1) + x0];
    }
    double sum2(int x0, int y0, int x1, int y1) const {
        return s2[size_t(y1) * (w + 1) + x1] - s2[size_t(y0) * (w + 1) + x1] -
               s2[size_t(y1) * (w + 1) + x0] + s2[size_t(y0) * (w + 1) + x0];
    }
    double variance(int x0, int y0, int x1, int y1) const {
        double n = double(x1 - x0) * (y1 - y0);
        if (n <= 0) return 0.0;
        double mu = sum(x0, y0, x1, y1) / n;
        return std::max(0.0, sum2(x0, y0, x1, y1) / n - mu * mu);
    }
};

inline void assign_rect(std::vector<int32_t>& index, int res, int x0, int y0, int x1, int y1,
                        int32_t id) {
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) index[size_t(y) * res + x] = id;
}

// Pixel-set centroid in unit coordinates, snapped to the nearest member
// pixel when the raw centroid falls outside the cell.
inline void finalize_cells(Partition& p, const Field& f) {
    const int res = p.resolution;
    const size_t n = p.cells.size();
    std::vector<double> sum(n, 0.0), sx(n, 0.0), sy(n, 0.0);
    std::vector<long> cnt(n, 0);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            int32_t id = p.index[size_t(y) * res + x];
            if (id < 0 || size_t(id) >= n) throw numerical_error("partition index out of range");
            sum[size_t(id)] += f.at(x, y);
            sx[size_t(id)] += x + 0.5;
            sy[size_t(id)] += y + 0.5;
            ++cnt[size_t(id)];
        }
    for (size_t i = 0; i < n; ++i) {
        Cell& c = p.cells[i];
        if (cnt[i] == 0) throw numerical_error("partition produced an empty cell");
        c.area_px = cnt[i];
        c.mean_value = sum[i] / double(cnt[i]);
        bool overridden = p.method == PartitionMethod::voronoi;
        double cx = overridden ? c.seed.x * res : sx[i] / double(cnt[i]);
        double cy = overridden ? c.seed.y * res : sy[i] / double(cnt[i]);
        int px = std::clamp(int(cx), 0, res - 1);
        int py = std::clamp(int(cy), 0, res - 1);
        if (p.index[size_t(py) * res + px] != int32_t(i)) {
            // snap to the nearest pixel belonging to the cell
            double best = std::numeric_limits<double>::max();
            for (int y = 0; y < res; ++y)
                for (int x = 0; x < res; ++x) {
                    if (p.index[size_t(y) * res + x] != int32_t(i)) continue;
                    double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
                    double d = dx * dx + dy * dy;
                    if (d < best) {
                        best = d;
                        px = x;
                        py = y;
                    }
                }
            cx = px + 0.5;
            cy = py + 0.5;
        }
        c.centroid = {cx / res, cy / res};
    }
}

} // namespace detail

inline Partition build_grid(const Field& f, int cell_px) {
    if (f.resolution <= 0) throw validation_error("empty field");
    if (cell_px < 1) throw validation_error("grid cell size must be >= 1");
    const int res = f.resolution;
    Partition p;
    p.method = PartitionMethod::grid;
    p.resolution = res;
    p.index.assign(size_t(res) * res, -1);
    int32_t id = 0;
    for (int y0 = 0; y0 < res; y0 += cell_px)
        for (int x0 = 0; x0 < res; x0 += cell_px) {
            int x1 = std::min(res, x0 + cell_px);
            int y1 = std::min(res, y0 + cell_px);
            detail::assign_rect(p.index, res, x0, y0, x1, y1, id);
            Cell c;
            c.id = id;
            c.geom = CellGeom::rect;
            c.rx = x0;
            c.ry = y0;
            c.rw = x1 - x0;
            c.rh = y1 - y0;
            p.cells.push_back(c);
            ++id;
        }
    detail::finalize_cells(p, f);
    return p;
}

/// Recursive 4-way split while the cell's pixel variance exceeds tol. Non
/// power-of-two fields are padded by edge replication; leaves are clipped
/// back so the real pixels still tile exactly.
inline Partition build_quadtree(const Field& f, int max_depth = 8, double tol = 2e-4) {
    if (f.resolution <= 0) throw validation_error("empty field");
    const int res = f.resolution;
    int pot = 1;
    while (pot < res) pot *= 2;

    detail::Sat sat(f.values, res, res);
    Partition p;
    p.method = PartitionMethod::quadtree;
    p.resolution = res;
    p.index.assign(size_t(res) * res, -1);

    struct Node {
        int x0, y0, size, depth;
    };
    std::deque<Node> todo{{0, 0, pot, 0}};
    while (!todo.empty()) {
        Node nd = todo.front();
        todo.pop_front();
        int cx1 = std::min(res, nd.x0 + nd.size), cy1 = std::min(res, nd.y0 + nd.size);
        if (nd.x0 >= res || nd.y0 >= res) continue; // entirely padding
        double var = sat.variance(nd.x0, nd.y0, cx1, cy1);
        if (var > tol && nd.depth < max_depth && nd.size > 1) {
            int h = nd.size / 2;
            todo.push_back({nd.x0, nd.y0, h, nd.depth + 1});
            todo.push_back({nd.x0 + h, nd.y0, h, nd.depth + 1});
            todo.push_back({nd.x0, nd.y0 + h, h, nd.depth + 1});
            todo.push_back({nd.x0 + h, nd.y0 + h, h, nd.depth + 1});
            continue;
        }
        Cell c;
        c.id = int(p.cells.size());
        c.geom = CellGeom::rect;
        c.rx = nd.x0;
        c.ry = nd.y0;
        c.rw = cx1 - nd.x0;
        c.rh = cy1 - nd.y0;
        c.depth = uint8_t(nd.depth);
        detail::assign_rect(p.index, res, nd.x0, nd.y0, cx1, cy1, c.id);
        p.cells.push_back(c);
    }
    detail::finalize_cells(p, f);
    return p;
}

namespace detail {

struct LineScore {
    double mse = std::numeric_limits<double>::max();
    double theta = 0.0, offset = 0.0;
    bool valid = false;
};

// Two-side MSE of splitting the pixel list by the line n(theta) . p = offset.
inline double score_line(const std::vector<int32_t>& pix, const std::vector<double>& values,
                         int res, double theta, double offset) {
    double nx = std::cos(theta), ny = std::sin(theta);
    double n1 = 0, s1 = 0, q1 = 0, n2 = 0, s2 = 0, q2 = 0;
    for (int32_t pidx : pix) {
        double x = double(pidx % res) + 0.5;
        double y = double(pidx / res) + 0.5;
        double v = values[size_t(pidx)];
        if (nx * x + ny * y - offset >= 0.0) {
            n1 += 1;
            s1 += v;
            q1 += v * v;
        } else {
            n2 += 1;
            s2 += v;
            q2 += v * v;
        }
    }
    if (n1 == 0 || n2 == 0) return std::numeric_limits<double>::max(); // degenerate
    double sse1 = q1 - s1 * s1 / n1;
    double sse2 = q2 - s2 * s2 / n2;
    return std::max(0.0, sse1 + sse2) / (n1 + n2);
}

inline void project_extent(double nx, double ny, double x0, double y0, double x1, double y1,
                           double& lo, double& hi) {
    lo = std::numeric_limits<double>::max();
    hi = std::numeric_limits<double>::lowest();
    for (double cx : {x0, x1})
        for (double cy : {y0, y1}) {
            double t = nx * cx + ny * cy;
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
}

} // namespace detail

/// Quadtree recursion with an extra move: before 4-way splitting an
/// inhomogeneous square, candidate lines over an angle x offset grid are
/// scored by two-side MSE, and the square becomes a wedge (two half-cells)
/// when the best line already meets the tolerance.
inline Partition build_wedgelet(const Field& f, int max_depth = 8, double tol = 2e-4,
                                int n_angles = 24, int n_offsets = 16) {
    if (f.resolution <= 0) throw validation_error("empty field");
    if (n_angles < 1 || n_offsets < 1) throw validation_error("wedgelet grid must be >= 1");
    const int res = f.resolution;
    int pot = 1;
    while (pot < res) pot *= 2;

    detail::Sat sat(f.values, res, res);
    Partition p;
    p.method = PartitionMethod::wedgelet;
    p.resolution = res;
    p.index.assign(size_t(res) * res, -1);

    struct Node {
        int x0, y0, size, depth;
    };
    std::deque<Node> todo{{0, 0, pot, 0}};
    while (!todo.empty()) {
        Node nd = todo.front();
        todo.pop_front();
        if (nd.x0 >= res || nd.y0 >= res) continue;
        int cx1 = std::min(res, nd.x0 + nd.size), cy1 = std::min(res, nd.y0 + nd.size);
        double var = sat.variance(nd.x0, nd.y0, cx1, cy1);

        auto emit_square = [&](int depth) {
            Cell c;
            c.id = int(p.cells.size());
            c.geom = CellGeom::rect;
            c.rx = nd.x0;
            c.ry = nd.y0;
            c.rw = cx1 - nd.x0;
            c.rh = cy1 - nd.y0;
            c.depth = uint8_t(depth);
            detail::assign_rect(p.index, res, nd.x0, nd.y0, cx1, cy1, c.id);
            p.cells.push_back(c);
        };

        if (var <= tol || (cx1 - nd.x0) * (cy1 - nd.y0) < 4) {
            emit_square(nd.depth);
            continue;
        }

        // line search over the clipped square
        std::vector<int32_t> pix;
        pix.reserve(size_t(cx1 - nd.x0) * (cy1 - nd.y0));
        for (int y = nd.y0; y < cy1; ++y)
            for (int x = nd.x0; x < cx1; ++x) pix.push_back(int32_t(y) * res + x);

        detail::LineScore best;
        for (int a = 0; a < n_angles; ++a) {
            double theta = M_PI * a / n_angles;
            double nx = std::cos(theta), ny = std::sin(theta), lo, hi;
            detail::project_extent(nx, ny, nd.x0, nd.y0, cx1, cy1, lo, hi);
            for (int k = 0; k < n_offsets; ++k) {
                double o = lo + (k + 0.5) * (hi - lo) / n_offsets;
                double mse = detail::score_line(pix, f.values, res, theta, o);
                if (mse < best.mse) best = {mse, theta, o, true};
            }
        }

        if (best.valid && best.mse <= tol) {
            double nx = std::cos(best.theta), ny = std::sin(best.theta);
            int32_t id_a = int(p.cells.size());
            int32_t id_b = id_a + 1;
            for (int32_t pidx : pix) {
                double x = double(pidx % res) + 0.5;
                double y = double(pidx / res) + 0.5;
                p.index[size_t(pidx)] = (nx * x + ny * y - best.offset >= 0.0) ? id_a : id_b;
            }
            for (int side = 0; side < 2; ++side) {
                Cell c;
                c.id = int(p.cells.size());
                c.geom = CellGeom::wedge_half;
                c.rx = nd.x0;
                c.ry = nd.y0;
                c.rw = cx1 - nd.x0;
                c.rh = cy1 - nd.y0;
                c.line_theta = float(best.theta);
                c.line_offset = float(best.offset);
                c.line_side = side == 0 ? 1 : -1;
                c.depth = uint8_t(nd.depth);
                p.cells.push_back(c);
            }
            continue;
        }

        if (nd.depth < max_depth && nd.size > 1) {
            int h = nd.size / 2;
            todo.push_back({nd.x0, nd.y0, h, nd.depth + 1});
            todo.push_back({nd.x0 + h, nd.y0, h, nd.depth + 1});
            todo.push_back({nd.x0, nd.y0 + h, h, nd.depth + 1});
            todo.push_back({nd.x0 + h, nd.y0 + h, h, nd.depth + 1});
        } else {
            emit_square(nd.depth);
        }
    }
    detail::finalize_cells(p, f);
    return p;
}

/// Top-down BSP: each region is split by the best sampled line (two-region
/// MSE), recursing until depth 9 or the homogeneity criterion 2e-4. The
/// coarse angle x offset grid is re-searched in a window shrinking 4x around
/// the best candidate for `refine_rounds` rounds.
inline Partition build_bsp_lse(const Field& f, int max_depth = 9, double tol = 2e-4,
                               int n_angles = 36, int n_offsets = 32, int refine_rounds = 4) {
    if (f.resolution <= 0) throw validation_error("empty field");
    const int res = f.resolution;

    Partition p;
    p.method = PartitionMethod::bsp_lse;
    p.resolution = res;
    p.index.assign(size_t(res) * res, -1);

    struct Region {
        std::vector<int32_t> pix;
        int depth = 0;
        float theta = 0.f, offset = 0.f; // line that carved this region off
    };
    std::deque<Region> todo;
    Region root;
    root.pix.resize(size_t(res) * res);
    std::iota(root.pix.begin(), root.pix.end(), 0);
    todo.push_back(std::move(root));

    auto region_variance = [&](const std::vector<int32_t>& pix) {
        double s = 0, q = 0;
        for (int32_t i : pix) {
            double v = f.values[size_t(i)];
            s += v;
            q += v * v;
        }
        double n = double(pix.size());
        double mu = s / n;
        return std::max(0.0, q / n - mu * mu);
    };

    while (!todo.empty()) {
        Region reg = std::move(todo.front());
        todo.pop_front();

        bool split = reg.depth < max_depth && reg.pix.size() >= 4 &&
                     region_variance(reg.pix) > tol;
        detail::LineScore best;
        if (split) {
            // region bounding box for the offset range
            int bx0 = res, by0 = res, bx1 = 0, by1 = 0;
            for (int32_t i : reg.pix) {
                int x = i % res, y = i / res;
                bx0 = std::min(bx0, x);
                by0 = std::min(by0, y);
                bx1 = std::max(bx1, x + 1);
                by1 = std::max(by1, y + 1);
            }
            double th_lo = 0.0, th_span = M_PI;
            double off_ctr = 0.0, off_frac = 1.0; // window as fraction of the full extent
            for (int round = 0; round <= refine_rounds; ++round) {
                // refinement rounds sample a doubled grid in the shrinking window
                int angles = round == 0 ? n_angles : 2 * n_angles;
                int offsets = round == 0 ? n_offsets : 2 * n_offsets;
                detail::LineScore round_best;
                for (int a = 0; a < angles; ++a) {
                    double theta = th_lo + th_span * a / angles;
                    double nx = std::cos(theta), ny = std::sin(theta), lo, hi;
                    detail::project_extent(nx, ny, bx0, by0, bx1, by1, lo, hi);
                    double span = (hi - lo) * off_frac;
                    double centre = round == 0 ? 0.5 * (lo + hi)
                                               : std::clamp(off_ctr, lo + span / 2, hi - span / 2);
                    for (int k = 0; k < offsets; ++k) {
                        double o = centre - span / 2 + (k + 1) * span / (offsets + 1);
                        double mse = detail::score_line(reg.pix, f.values, res, theta, o);
                        if (mse < round_best.mse) round_best = {mse, theta, o, true};
                    }
                }
                if (!round_best.valid) break;
                best = round_best;
                th_lo = best.theta - th_span / 8.0;
                th_span /= 4.0;
                off_ctr = best.offset;
                off_frac /= 4.0;
            }
        }

        if (split && best.valid) {
            double nx = std::cos(best.theta), ny = std::sin(best.theta);
            Region a, b;
            a.depth = b.depth = reg.depth + 1;
            a.theta = b.theta = float(best.theta);
            a.offset = b.offset = float(best.offset);
            for (int32_t i : reg.pix) {
                double x = double(i % res) + 0.5, y = double(i / res) + 0.5;
                (nx * x + ny * y - best.offset >= 0.0 ? a : b).pix.push_back(i);
            }
            todo.push_back(std::move(a));
            todo.push_back(std::move(b));
            continue;
        }

        Cell c;
        c.id = int(p.cells.size());
        c.geom = CellGeom::polygon;
        c.depth = uint8_t(reg.depth);
        c.line_theta = reg.theta;
        c.line_offset = reg.offset;
        for (int32_t i : reg.pix) p.index[size_t(i)] = c.id;
        p.cells.push_back(c);
    }
    detail::finalize_cells(p, f);
    return p;
}

/// Bottom-up binary partition tree: Kruskal over the 4-adjacency graph with
/// |value difference| weights (8-bit quantised). A merge becomes part of the
/// final segmentation when the edge is flat (weight 0) or one side is still
/// below the minimum region size, which prunes every region under
/// min_region_px into its neighbour.
inline Partition build_bsp_region(const Field& f, int min_region_px = 10) {
    if (f.resolution <= 0) throw validation_error("empty field");
    const int res = f.resolution;
    const size_t n = size_t(res) * res;

    std::vector<uint8_t> q(n);
    for (size_t i = 0; i < n; ++i) q[i] = uint8_t(std::lround(clamp01(f.values[i]) * 255.0));

    struct Edge {
        int32_t a, b;
        uint8_t w;
    };
    std::vector<Edge> edges;
    edges.reserve(2 * n);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            int32_t i = int32_t(y) * res + x;
            if (x + 1 < res)
                edges.push_back({i, i + 1, uint8_t(std::abs(int(q[size_t(i)]) - q[size_t(i) + 1]))});
            if (y + 1 < res)
                edges.push_back(
                    {i, i + res, uint8_t(std::abs(int(q[size_t(i)]) - q[size_t(i) + res]))});
        }
    std::stable_sort(edges.begin(), edges.end(),
                     [](const Edge& a, const Edge& b) { return a.w < b.w; });

    std::vector<int32_t> tree_parent(n), final_parent(n);
    std::vector<int32_t> tree_size(n, 1);
    std::iota(tree_parent.begin(), tree_parent.end(), 0);
    std::iota(final_parent.begin(), final_parent.end(), 0);
    auto find = [](std::vector<int32_t>& up, int32_t i) {
        while (up[size_t(i)] != i) {
            up[size_t(i)] = up[size_t(up[size_t(i)])];
            i = up[size_t(i)];
        }
        return i;
    };

    for (const Edge& e : edges) {
        int32_t ra = find(tree_parent, e.a), rb = find(tree_parent, e.b);
        if (ra == rb) continue;
        bool commit = e.w == 0 || std::min(tree_size[size_t(ra)], tree_size[size_t(rb)]) <
                                      min_region_px;
        if (commit) {
            int32_t fa = find(final_parent, e.a), fb = find(final_parent, e.b);
            if (fa != fb) final_parent[size_t(std::max(fa, fb))] = std::min(fa, fb);
        }
        if (tree_size[size_t(ra)] < tree_size[size_t(rb)]) std::swap(ra, rb);
        tree_parent[size_t(rb)] = ra;
        tree_size[size_t(ra)] += tree_size[size_t(rb)];
    }

    Partition p;
    p.method = PartitionMethod::bsp_region;
    p.resolution = res;
    p.index.assign(n, -1);
    std::map<int32_t, int32_t> remap; // first-pixel order
    for (size_t i = 0; i < n; ++i) {
        int32_t root = find(final_parent, int32_t(i));
        auto [it, inserted] = remap.try_emplace(root, int32_t(remap.size()));
        p.index[i] = it->second;
    }
    p.cells.resize(remap.size());
    for (size_t i = 0; i < remap.size(); ++i) {
        p.cells[i].id = int(i);
        p.cells[i].geom = CellGeom::pixel_set;
    }
    detail::finalize_cells(p, f);
    return p;
}

namespace detail {

struct AxialCoord {
    int q = 0, r = 0;
    bool operator<(const AxialCoord& o) const { return q != o.q ? q < o.q : r < o.r; }
    bool operator==(const AxialCoord& o) const { return q == o.q && r == o.r; }
};

inline AxialCoord axial_round(double q, double r) {
    double x = q, z = r, y = -x - z;
    double rx = std::round(x), ry = std::round(y), rz = std::round(z);
    double dx = std::abs(rx - x), dy = std::abs(ry - y), dz = std::abs(rz - z);
    if (dx > dy && dx > dz)
        rx = -ry - rz;
    else if (dy <= dz)
        rz = -rx - ry;
    return {int(rx), int(rz)};
}

// Aperture-7 parent: child axial coords map through the inverse of the
// sublattice basis (2,1),(-1,3), then round to the nearest parent centre.
inline AxialCoord hex_parent(AxialCoord c) {
    double m = (3.0 * c.q + c.r) / 7.0;
    double n = (-1.0 * c.q + 2.0 * c.r) / 7.0;
    return axial_round(m, n);
}

} // namespace detail

/// Pointy-top hexagon tiling at base resolution, aggregated bottom-up into
/// aperture-7 parents. A parent replaces its children when its pixel MSE is
/// within tol.
inline Partition build_hexmap(const Field& f, int base_res = 24, double tol = 2e-4,
                              int max_levels = 8) {
    if (f.resolution <= 0) throw validation_error("empty field");
    if (base_res < 1) throw validation_error("hex base resolution must be >= 1");
    const int res = f.resolution;
    const double s = 1.0 / (std::sqrt(3.0) * base_res); // hex size, unit coords

    struct HexNode {
        detail::AxialCoord coord;
        std::vector<int32_t> children; // node ids one level down
        std::vector<int32_t> pixels;   // level 0 only
        double sum = 0, sum2 = 0;
        long n = 0;
    };
    std::vector<std::vector<HexNode>> levels(1);

    {
        std::map<detail::AxialCoord, int32_t> id_of;
        for (int py = 0; py < res; ++py)
            for (int px = 0; px < res; ++px) {
                double x = (px + 0.5) / res, y = (py + 0.5) / res;
                double qf = (std::sqrt(3.0) / 3.0 * x - y / 3.0) / s;
                double rf = (2.0 / 3.0 * y) / s;
                auto c = detail::axial_round(qf, rf);
                auto [it, inserted] = id_of.try_emplace(c, int32_t(levels[0].size()));
                if (inserted) {
                    HexNode nd;
                    nd.coord = c;
                    levels[0].push_back(nd);
                }
                HexNode& nd = levels[0][size_t(it->second)];
                double v = f.at(px, py);
                nd.pixels.push_back(int32_t(py) * res + px);
                nd.sum += v;
                nd.sum2 += v * v;
                nd.n += 1;
            }
    }

    while (int(levels.size()) < max_levels && levels.back().size() > 1) {
        const auto& child_level = levels.back();
        std::map<detail::AxialCoord, int32_t> id_of;
        std::vector<HexNode> parents;
        for (int32_t ci = 0; ci < int32_t(child_level.size()); ++ci) {
            auto pc = detail::hex_parent(child_level[size_t(ci)].coord);
            auto [it, inserted] = id_of.try_emplace(pc, int32_t(parents.size()));
            if (inserted) {
                HexNode nd;
                nd.coord = pc;
                parents.push_back(nd);
            }
            HexNode& nd = parents[size_t(it->second)];
            nd.children.push_back(ci);
            nd.sum += child_level[size_t(ci)].sum;
            nd.sum2 += child_level[size_t(ci)].sum2;
            nd.n += child_level[size_t(ci)].n;
        }
        if (parents.size() >= child_level.size()) break; // no aggregation possible
        levels.push_back(std::move(parents));
    }

    Partition p;
    p.method = PartitionMethod::hexagon;
    p.resolution = res;
    p.index.assign(size_t(res) * res, -1);

    // top-down: emit a node when its MSE meets tol, else descend
    struct StackItem {
        int level;
        int32_t node;
    };
    std::vector<StackItem> stack;
    for (int32_t i = int32_t(levels.back().size()) - 1; i >= 0; --i)
        stack.push_back({int(levels.size()) - 1, i});

    auto label_pixels = [&](int level, int32_t node, int32_t cell_id) {
        std::vector<StackItem> sub{{level, node}};
        while (!sub.empty()) {
            auto [lv, nd] = sub.back();
            sub.pop_back();
            const HexNode& h = levels[size_t(lv)][size_t(nd)];
            if (lv == 0)
                for (int32_t px : h.pixels) p.index[size_t(px)] = cell_id;
            else
                for (int32_t c : h.children) sub.push_back({lv - 1, c});
        }
    };

    while (!stack.empty()) {
        auto [lv, nd] = stack.back();
        stack.pop_back();
        const HexNode& h = levels[size_t(lv)][size_t(nd)];
        double mu = h.sum / double(h.n);
        double mse = std::max(0.0, h.sum2 / double(h.n) - mu * mu);
        if (lv == 0 || mse <= tol) {
            Cell c;
            c.id = int(p.cells.size());
            c.geom = CellGeom::hexagon;
            c.hex_level = uint8_t(lv);
            c.hex_q = int16_t(h.coord.q);
            c.hex_r = int16_t(h.coord.r);
            label_pixels(lv, nd, c.id);
            p.cells.push_back(c);
        } else {
            for (auto it = h.children.rbegin(); it != h.children.rend(); ++it)
                stack.push_back({lv - 1, *it});
        }
    }
    detail::finalize_cells(p, f);
    return p;
}

namespace detail {

// One jump-flooding pass structure: each pixel adopts the closest seed seen
// at the sampled offsets.
inline void jump_flood(std::vector<int32_t>& label, int res, const std::vector<Vec2>& seeds_px) {
    std::vector<int32_t> next(label.size());
    int step = 1;
    while (step < res) step *= 2;
    auto closer = [&](int32_t a, int32_t b, double x, double y) {
        // returns true when b beats a
        if (b < 0) return false;
        if (a < 0) return true;
        double dxa = seeds_px[size_t(a)].x - x, dya = seeds_px[size_t(a)].y - y;
        double dxb = seeds_px[size_t(b)].x - x, dyb = seeds_px[size_t(b)].y - y;
        double da = dxa * dxa + dya * dya, db = dxb * dxb + dyb * dyb;
        if (db < da - 1e-12) return true;
        if (da < db - 1e-12) return false;
        return b < a;
    };
    for (; step >= 1; step /= 2) {
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x) {
                double cx = x + 0.5, cy = y + 0.5;
                int32_t bestl = label[size_t(y) * res + x];
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int nx = x + dx * step, ny = y + dy * step;
                        if (nx < 0 || ny < 0 || nx >= res || ny >= res) continue;
                        int32_t cand = label[size_t(ny) * res + nx];
                        if (closer(bestl, cand, cx, cy)) bestl = cand;
                    }
                next[size_t(y) * res + x] = bestl;
            }
        label.swap(next);
    }
}

} // namespace detail

/// Density-adapted Voronoi tessellation: rejection-sampled seeds, then
/// Lloyd-style iterations of jump-flood assignment and density-weighted
/// centroid updates, with one split of the worst cell / merge of the best
/// per iteration while the count stays within +-20% of n_seeds.
inline Partition build_voronoi(const Field& f, int n_seeds, int iters, uint64_t seed) {
    if (f.resolution <= 0) throw validation_error("empty field");
    if (n_seeds < 1) throw validation_error("voronoi needs n_seeds >= 1");
    const int res = f.resolution;
    const double floor_density = 0.05;
    double dmax = floor_density;
    for (double v : f.values) dmax = std::max(dmax, v + floor_density);

    Rng rng(seed);
    std::vector<Vec2> seeds; // pixel coordinates
    while (int(seeds.size()) < n_seeds) {
        double x = rng.uniform() * res, y = rng.uniform() * res;
        double d = f.values[size_t(int(y)) * res + int(x)] + floor_density;
        if (rng.uniform() * dmax > d) continue;
        bool dup = false;
        for (const auto& sp : seeds)
            if (std::abs(sp.x - x) < 1e-9 && std::abs(sp.y - y) < 1e-9) dup = true;
        if (!dup) seeds.push_back({x, y});
    }

    int max_cells = std::max(1, int(std::lround(1.2 * n_seeds)));
    int min_cells = std::max(1, int(std::lround(0.8 * n_seeds)));

    std::vector<int32_t> label(size_t(res) * res, -1);
    auto assign = [&] {
        std::fill(label.begin(), label.end(), -1);
        for (int32_t i = 0; i < int32_t(seeds.size()); ++i) {
            int px = std::clamp(int(seeds[size_t(i)].x), 0, res - 1);
            int py = std::clamp(int(seeds[size_t(i)].y), 0, res - 1);
            int32_t& slot = label[size_t(py) * res + px];
            if (slot < 0) slot = i;
        }
        detail::jump_flood(label, res, seeds);
    };

    for (int it = 0; it < std::max(1, iters); ++it) {
        assign();
        const size_t k = seeds.size();
        std::vector<double> wsum(k, 0), wx(k, 0), wy(k, 0), vsum(k, 0), vsum2(k, 0);
        std::vector<long> cnt(k, 0);
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x) {
                int32_t id = label[size_t(y) * res + x];
                double v = f.at(x, y);
                double w = v + floor_density;
                wsum[size_t(id)] += w;
                wx[size_t(id)] += w * (x + 0.5);
                wy[size_t(id)] += w * (y + 0.5);
                vsum[size_t(id)] += v;
                vsum2[size_t(id)] += v * v;
                ++cnt[size_t(id)];
            }

        // drop starved seeds, move the rest to weighted centroids
        std::vector<Vec2> updated;
        std::vector<double> err;
        std::vector<long> area;
        for (size_t i = 0; i < k; ++i) {
            if (cnt[i] == 0) continue;
            updated.push_back({wx[i] / wsum[i], wy[i] / wsum[i]});
            double mu = vsum[i] / double(cnt[i]);
            err.push_back(std::max(0.0, vsum2[i] - 2 * mu * vsum[i] + mu * mu * cnt[i]));
            area.push_back(cnt[i]);
        }
        seeds = updated;

        if (it + 1 >= iters) break; // final pass only relocates

        double mean_err = std::accumulate(err.begin(), err.end(), 0.0) / double(err.size());
        if (mean_err > 0) {
            // split worst
            size_t worst = 0;
            for (size_t i = 1; i < err.size(); ++i)
                if (err[i] > err[size_t(worst)]) worst = i;
            if (err[worst] > 2.0 * mean_err && int(seeds.size()) + 1 <= max_cells) {
                assign();
                // halve the cell along its longer bbox axis through the seed
                int bx0 = res, by0 = res, bx1 = 0, by1 = 0;
                for (int y = 0; y < res; ++y)
                    for (int x = 0; x < res; ++x)
                        if (label[size_t(y) * res + x] == int32_t(worst)) {
                            bx0 = std::min(bx0, x);
                            by0 = std::min(by0, y);
                            bx1 = std::max(bx1, x + 1);
                            by1 = std::max(by1, y + 1);
                        }
                bool horiz = (bx1 - bx0) >= (by1 - by0);
                double wxa = 0, wya = 0, wa = 0, wxb = 0, wyb = 0, wb = 0;
                for (int y = 0; y < res; ++y)
                    for (int x = 0; x < res; ++x) {
                        if (label[size_t(y) * res + x] != int32_t(worst)) continue;
                        double w = f.at(x, y) + floor_density;
                        bool sideA = horiz ? (x + 0.5 < seeds[worst].x) : (y + 0.5 < seeds[worst].y);
                        if (sideA) {
                            wa += w;
                            wxa += w * (x + 0.5);
                            wya += w * (y + 0.5);
                        } else {
                            wb += w;
                            wxb += w * (x + 0.5);
                            wyb += w * (y + 0.5);
                        }
                    }
                if (wa > 0 && wb > 0) {
                    seeds[worst] = {wxa / wa, wya / wa};
                    seeds.push_back({wxb / wb, wyb / wb});
                }
            }
            // merge calmest
            if (int(seeds.size()) - 1 >= min_cells && err.size() == area.size()) {
                size_t calm = 0;
                for (size_t i = 1; i < err.size() && i < seeds.size(); ++i)
                    if (err[i] < err[calm]) calm = i;
                if (calm < seeds.size() && err[calm] < 0.5 * mean_err &&
                    int(seeds.size()) > min_cells)
                    seeds.erase(seeds.begin() + long(calm));
            }
        }
    }

    assign();
    // compress labels to surviving cells, ids in seed order
    std::vector<int32_t> remap(seeds.size(), -1);
    Partition p;
    p.method = PartitionMethod::voronoi;
    p.resolution = res;
    p.index.assign(size_t(res) * res, -1);
    std::vector<Vec2> cell_seed;
    std::vector<bool> seen(seeds.size(), false);
    for (int32_t l : label) seen[size_t(l)] = true;
    for (size_t i = 0; i < seeds.size(); ++i)
        if (seen[i]) {
            remap[i] = int32_t(cell_seed.size());
            cell_seed.push_back(seeds[i]);
        }
    for (size_t i = 0; i < label.size(); ++i) p.index[i] = remap[size_t(label[i])];
    for (size_t i = 0; i < cell_seed.size(); ++i) {
        Cell c;
        c.id = int(i);
        c.geom = CellGeom::pixel_set;
        c.seed = {cell_seed[i].x / res, cell_seed[i].y / res};
        p.cells.push_back(c);
    }
    detail::finalize_cells(p, f);
    return p;
}

/// Builder parameters for all methods, with the defaults used throughout.
struct PartitionParams {
    int eval_res = 256;
    int grid_cell_px = 32;
    int quadtree_max_depth = 8;
    double quadtree_tol = 2e-4;
    int wedgelet_max_depth = 8;
    double wedgelet_tol = 2e-4;
    int wedgelet_angles = 24;
    int wedgelet_offsets = 16;
    int bsp_lse_max_depth = 9;
    double bsp_lse_tol = 2e-4;
    int bsp_lse_angles = 36;
    int bsp_lse_offsets = 32;
    int bsp_lse_refine = 4;
    int bsp_region_min_px = 10;
    int hex_base_res = 24;
    double hex_tol = 2e-4;
    int voronoi_seeds = 48;
    int voronoi_iters = 12;
};

inline Partition build_partition(const Field& f, PartitionMethod method,
                                 const PartitionParams& params, uint64_t seed = 0) {
    switch (method) {
    case PartitionMethod::grid: return build_grid(f, params.grid_cell_px);
    case PartitionMethod::quadtree:
        return build_quadtree(f, params.quadtree_max_depth, params.quadtree_tol);
    case PartitionMethod::wedgelet:
        return build_wedgelet(f, params.wedgelet_max_depth, params.wedgelet_tol,
                              params.wedgelet_angles, params.wedgelet_offsets);
    case PartitionMethod::bsp_lse:
        return build_bsp_lse(f, params.bsp_lse_max_depth, params.bsp_lse_tol,
                             params.bsp_lse_angles, params.bsp_lse_offsets,
                             params.bsp_lse_refine);
    case PartitionMethod::bsp_region: return build_bsp_region(f, params.bsp_region_min_px);
    case PartitionMethod::hexagon: return build_hexmap(f, params.hex_base_res, params.hex_tol);
    case PartitionMethod::voronoi:
        return build_voronoi(f, params.voronoi_seeds, params.voronoi_iters, seed);
    }
    throw validation_error("unknown partition method");
}

/// Render the partition back onto a grid: each pixel takes its cell's mean.
inline Field rasterize(const Partition& p, int resolution) {
    Field out(resolution);
    for (int y = 0; y < resolution; ++y)
        for (int x = 0; x < resolution; ++x) {
            int sx = p.resolution == resolution ? x : int(double(x) * p.resolution / resolution);
            int sy = p.resolution == resolution ? y : int(double(y) * p.resolution / resolution);
            sx = std::clamp(sx, 0, p.resolution - 1);
            sy = std::clamp(sy, 0, p.resolution - 1);
            out.at(x, y) = p.cells[size_t(p.label(sx, sy))].mean_value;
        }
    return out;
}

inline std::vector<Vec2> centroids(const Partition& p) {
    std::vector<Vec2> out;
    out.reserve(p.cells.size());
    for (const Cell& c : p.cells) out.push_back(c.centroid);
    return out;
}

inline int locate(const Partition& p, Vec2 point) {
    if (point.x < 0.0 || point.x > 1.0 || point.y < 0.0 || point.y > 1.0)
        throw validation_error("locate: point outside the unit square");
    int px = std::clamp(int(point.x * p.resolution), 0, p.resolution - 1);
    int py = std::clamp(int(point.y * p.resolution), 0, p.resolution - 1);
    return int(p.label(px, py));
}

namespace detail {

template <typename T>
void put(std::vector<uint8_t>& out, T v) {
    uint8_t buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.insert(out.end(), buf, buf + sizeof(T));
}

} // namespace detail

/// Compact method-specific encoding; its byte size is the memory metric.
/// Rect methods store quantised rects, hexagons their axial address, voronoi
/// its generators, and pixel-set methods a run-length coded label map.
inline std::vector<uint8_t> serialize_partition(const Partition& p) {
    std::vector<uint8_t> out;
    out.insert(out.end(), {'F', 'S', 'P', 'T'});
    detail::put(out, uint8_t(p.method));
    detail::put(out, uint32_t(p.resolution));
    detail::put(out, uint32_t(p.cells.size()));

    switch (p.method) {
    case PartitionMethod::grid:
        detail::put(out, uint16_t(p.cells.empty() ? 0 : p.cells[0].rw));
        for (const Cell& c : p.cells) detail::put(out, float(c.mean_value));
        break;
    case PartitionMethod::quadtree:
        for (const Cell& c : p.cells) {
            detail::put(out, uint16_t(c.rx));
            detail::put(out, uint16_t(c.ry));
            detail::put(out, uint16_t(c.rw));
            detail::put(out, float(c.mean_value));
        }
        break;
    case PartitionMethod::wedgelet:
        for (const Cell& c : p.cells) {
            detail::put(out, uint16_t(c.rx));
            detail::put(out, uint16_t(c.ry));
            detail::put(out, uint16_t(c.rw));
            detail::put(out, uint8_t(c.geom == CellGeom::wedge_half ? 1 : 0));
            if (c.geom == CellGeom::wedge_half) {
                detail::put(out, c.line_theta);
                detail::put(out, c.line_offset);
                detail::put(out, c.line_side);
            }
            detail::put(out, float(c.mean_value));
        }
        break;
    case PartitionMethod::bsp_lse:
        for (const Cell& c : p.cells) {
            detail::put(out, c.depth);
            detail::put(out, c.line_theta);
            detail::put(out, c.line_offset);
            detail::put(out, float(c.mean_value));
        }
        break;
    case PartitionMethod::hexagon:
        for (const Cell& c : p.cells) {
            detail::put(out, c.hex_level);
            detail::put(out, c.hex_q);
            detail::put(out, c.hex_r);
            detail::put(out, float(c.mean_value));
        }
        break;
    case PartitionMethod::voronoi:
        for (const Cell& c : p.cells) {
            detail::put(out, float(c.seed.x));
            detail::put(out, float(c.seed.y));
            detail::put(out, float(c.mean_value));
        }
        break;
    case PartitionMethod::bsp_region: {
        for (const Cell& c : p.cells) detail::put(out, float(c.mean_value));
        // run-length coded label map
        size_t i = 0;
        while (i < p.index.size()) {
            size_t j = i;
            while (j < p.index.size() && p.index[j] == p.index[i] && j - i < 0xffff) ++j;
            detail::put(out, uint32_t(p.index[i]));
            detail::put(out, uint16_t(j - i));
            i = j;
        }
        break;
    }
    }
    return out;
}

/// Structured text dump: one line per cell (id, method, mean, centroid, area).
inline std::string dump_partition(const Partition& p) {
    std::ostringstream os;
    os << "# id method mean cx cy area_px\n";
    for (const Cell& c : p.cells)
        os << c.id << " " << to_string(p.method) << " " << fmt_double(c.mean_value) << " "
           << fmt_double(c.centroid.x) << " " << fmt_double(c.centroid.y) << " " << c.area_px
           << "\n";
    return os.str();
}

} // namespace fieldscout
