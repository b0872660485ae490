#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <optional>
#include <vector>

#include "fieldscout/gp.hpp"
#include "fieldscout/metrics.hpp"

namespace fieldscout {

/// Traversal graph over partition centroids. Nodes are merged within 1e-9;
/// node_of_cell maps original centroid indices onto graph nodes.
struct TraversalGraph {
    std::vector<Vec2> nodes;
    std::vector<std::pair<int, int>> edges; // a < b
    std::vector<std::vector<int>> adjacency; // sorted neighbour lists
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> node_of_cell;
    bool degenerate = false; // fewer than 3 distinct or collinear input points
};

namespace detail {

struct Circumcircle {
    double cx = 0, cy = 0, r2 = 0;
    bool valid = false;
};

inline Circumcircle circumcircle(Vec2 a, Vec2 b, Vec2 c) {
    double d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    Circumcircle out;
    if (std::abs(d) < 1e-14) return out; // collinear
    double a2 = a.x * a.x + a.y * a.y;
    double b2 = b.x * b.x + b.y * b.y;
    double c2 = c.x * c.x + c.y * c.y;
    out.cx = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
    out.cy = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
    double dx = a.x - out.cx, dy = a.y - out.cy;
    out.r2 = dx * dx + dy * dy;
    out.valid = true;
    return out;
}

inline TraversalGraph chain_graph(const std::vector<Vec2>& nodes, std::vector<int> node_of_cell) {
    TraversalGraph g;
    g.nodes = nodes;
    g.node_of_cell = std::move(node_of_cell);
    g.degenerate = true;
    g.adjacency.assign(nodes.size(), {});
    std::vector<int> order(nodes.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return nodes[size_t(a)].x != nodes[size_t(b)].x ? nodes[size_t(a)].x < nodes[size_t(b)].x
                                                        : nodes[size_t(a)].y < nodes[size_t(b)].y;
    });
    for (size_t i = 0; i + 1 < order.size(); ++i) {
        int a = std::min(order[i], order[i + 1]), b = std::max(order[i], order[i + 1]);
        g.edges.push_back({a, b});
        g.adjacency[size_t(a)].push_back(b);
        g.adjacency[size_t(b)].push_back(a);
    }
    for (auto& adj : g.adjacency) std::sort(adj.begin(), adj.end());
    return g;
}

} // namespace detail

/// Incremental Bowyer-Watson triangulation. Every returned triangle satisfies
/// the empty-circumcircle property within tolerance; degenerate inputs
/// (duplicates collapse below 3 nodes, or all collinear) return a flagged
/// chain graph instead.
inline TraversalGraph delaunay(const std::vector<Vec2>& points) {
    // merge duplicates within 1e-9
    std::vector<Vec2> nodes;
    std::vector<int> node_of_cell(points.size(), -1);
    for (size_t i = 0; i < points.size(); ++i) {
        int found = -1;
        for (size_t j = 0; j < nodes.size(); ++j)
            if (std::abs(nodes[j].x - points[i].x) <= 1e-9 &&
                std::abs(nodes[j].y - points[i].y) <= 1e-9) {
                found = int(j);
                break;
            }
        if (found < 0) {
            found = int(nodes.size());
            nodes.push_back(points[i]);
        }
        node_of_cell[i] = found;
    }

    if (nodes.size() < 3) return detail::chain_graph(nodes, std::move(node_of_cell));

    const int n = int(nodes.size());
    std::vector<Vec2> pts = nodes;
    pts.push_back({-100.0, -100.0});
    pts.push_back({300.0, -100.0});
    pts.push_back({-100.0, 300.0});

    struct Tri {
        int a, b, c;
        detail::Circumcircle cc;
    };
    std::vector<Tri> tris;
    auto make_tri = [&](int a, int b, int c) {
        return Tri{a, b, c, detail::circumcircle(pts[size_t(a)], pts[size_t(b)], pts[size_t(c)])};
    };
    tris.push_back(make_tri(n, n + 1, n + 2));

    for (int ip = 0; ip < n; ++ip) {
        const Vec2 p = pts[size_t(ip)];
        std::vector<size_t> bad;
        for (size_t t = 0; t < tris.size(); ++t) {
            const auto& cc = tris[t].cc;
            if (!cc.valid) continue;
            double dx = p.x - cc.cx, dy = p.y - cc.cy;
            if (dx * dx + dy * dy < cc.r2 - 1e-12) bad.push_back(t);
        }
        // boundary = edges used by exactly one bad triangle
        std::vector<std::pair<int, int>> boundary;
        auto toggle = [&](int a, int b) {
            auto e = std::minmax(a, b);
            auto it = std::find(boundary.begin(), boundary.end(),
                                std::make_pair(e.first, e.second));
            if (it == boundary.end())
                boundary.push_back({e.first, e.second});
            else
                boundary.erase(it);
        };
        for (size_t t : bad) {
            toggle(tris[t].a, tris[t].b);
            toggle(tris[t].b, tris[t].c);
            toggle(tris[t].c, tris[t].a);
        }
        for (auto it = bad.rbegin(); it != bad.rend(); ++it)
            tris.erase(tris.begin() + long(*it));
        for (auto [a, b] : boundary) tris.push_back(make_tri(a, b, ip));
    }

    TraversalGraph g;
    g.nodes = nodes;
    g.node_of_cell = std::move(node_of_cell);
    g.adjacency.assign(nodes.size(), {});
    auto add_edge = [&](int a, int b) {
        if (a > b) std::swap(a, b);
        if (std::find(g.edges.begin(), g.edges.end(), std::make_pair(a, b)) == g.edges.end()) {
            g.edges.push_back({a, b});
            g.adjacency[size_t(a)].push_back(b);
            g.adjacency[size_t(b)].push_back(a);
        }
    };
    for (const auto& t : tris) {
        if (t.a >= n || t.b >= n || t.c >= n) continue; // touches the super triangle
        g.triangles.push_back({t.a, t.b, t.c});
        add_edge(t.a, t.b);
        add_edge(t.b, t.c);
        add_edge(t.c, t.a);
    }
    if (g.triangles.empty()) return detail::chain_graph(nodes, std::move(g.node_of_cell));
    for (auto& adj : g.adjacency) {
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }
    std::sort(g.edges.begin(), g.edges.end());
    return g;
}

/// Candidate receding-horizon path. Consecutive waypoints are graph-adjacent
/// and the utility decomposes exactly as info - l_cost*cost - l_visit*revisit.
struct CandidatePath {
    std::vector<int> nodes; // starts at the current node
    double utility = 0.0;
    double info = 0.0;
    double cost_m = 0.0;
    double revisit = 0.0;
};

/// All simple walks of 1..horizon steps from start, breadth-first with
/// ascending neighbour order, truncated at cap candidates.
inline std::vector<CandidatePath> enumerate_paths(const TraversalGraph& g, int start,
                                                  int horizon, int cap = 5000) {
    if (start < 0 || size_t(start) >= g.nodes.size())
        throw validation_error("enumerate_paths: start node outside the graph");
    if (horizon < 1) throw validation_error("enumerate_paths needs horizon >= 1");
    std::vector<CandidatePath> out;
    std::deque<std::vector<int>> queue{{start}};
    while (!queue.empty() && int(out.size()) < cap) {
        std::vector<int> cur = queue.front();
        queue.pop_front();
        for (int nb : g.adjacency[size_t(cur.back())]) {
            if (std::find(cur.begin(), cur.end(), nb) != cur.end()) continue;
            std::vector<int> ext = cur;
            ext.push_back(nb);
            CandidatePath cp;
            cp.nodes = ext;
            out.push_back(cp);
            if (int(out.size()) >= cap) break;
            if (int(ext.size()) <= horizon) queue.push_back(std::move(ext));
        }
    }
    return out;
}

/// Polyline length in metres (unit square scaled by the map side).
inline double path_cost(const std::vector<Vec2>& waypoints, double map_size_m) {
    if (waypoints.empty()) throw validation_error("path_cost needs at least one waypoint");
    double total = 0.0;
    for (size_t i = 0; i + 1 < waypoints.size(); ++i)
        total += dist(waypoints[i], waypoints[i + 1]);
    return total * map_size_m;
}

/// Mean coverage-mask value at the waypoints.
inline double revisit_fraction(const std::vector<Vec2>& waypoints, const CoverageMask& mask) {
    if (mask.resolution <= 0) throw validation_error("revisit_fraction needs a mask");
    if (waypoints.empty()) return 0.0;
    double s = 0.0;
    for (const Vec2& w : waypoints) s += mask.sample(w.x, w.y) ? 1.0 : 0.0;
    return s / double(waypoints.size());
}

struct UtilityWeights {
    double lambda_cost = 0.15;
    double lambda_visit = 400.0;
};

/// Score one candidate: mutual information of the GP at the waypoints minus
/// the weighted travel cost and revisit penalty.
inline void utility(CandidatePath& path, const TraversalGraph& g, const GPModel& model,
                    const CoverageMask& mask, const UtilityWeights& weights, double map_size_m) {
    if (path.nodes.empty()) throw validation_error("utility: empty path");
    std::vector<Vec2> coords;
    coords.reserve(path.nodes.size());
    for (int nidx : path.nodes) coords.push_back(g.nodes[size_t(nidx)]);
    Eigen::MatrixXd sigma = posterior_cov(model, coords);
    path.info = mutual_information(sigma, model.theta.sigma_n2);
    path.cost_m = path_cost(coords, map_size_m);
    path.revisit = revisit_fraction(coords, mask);
    path.utility =
        path.info - weights.lambda_cost * path.cost_m - weights.lambda_visit * path.revisit;
}

/// Score a whole candidate list; paths whose covariance fails are dropped.
inline std::vector<CandidatePath> score_paths(std::vector<CandidatePath> paths,
                                              const TraversalGraph& g, const GPModel& model,
                                              const CoverageMask& mask,
                                              const UtilityWeights& weights, double map_size_m,
                                              int* n_discarded = nullptr) {
    std::vector<CandidatePath> out;
    int discarded = 0;
    for (auto& p : paths) {
        try {
            utility(p, g, model, mask, weights, map_size_m);
            out.push_back(std::move(p));
        } catch (const std::runtime_error&) {
            ++discarded;
        }
    }
    if (n_discarded) *n_discarded = discarded;
    return out;
}

/// Receding-horizon selection: argmax utility, ties broken by shorter cost
/// then lexicographically smaller node sequence. Only the first waypoint of
/// the winner is executed.
inline std::optional<CandidatePath> select_best(const std::vector<CandidatePath>& paths) {
    if (paths.empty()) return std::nullopt;
    const CandidatePath* best = &paths[0];
    for (const auto& p : paths) {
        if (p.utility > best->utility)
            best = &p;
        else if (p.utility == best->utility) {
            if (p.cost_m < best->cost_m)
                best = &p;
            else if (p.cost_m == best->cost_m && p.nodes < best->nodes)
                best = &p;
        }
    }
    return *best;
}

inline int next_waypoint(const CandidatePath& path) {
    return path.nodes.size() > 1 ? path.nodes[1] : path.nodes[0];
}

} // namespace fieldscout
