#pragma once

#include <chrono>
#include <cmath>
#include <vector>

#include "fieldscout/gp.hpp"
#include "fieldscout/metrics.hpp"
#include "fieldscout/partition.hpp"
#include "fieldscout/planner.hpp"
#include "fieldscout/raster.hpp"

namespace fieldscout {

/// Fixed per-stage costs for deterministic runs, seeded from the observed
/// build-time magnitudes of each representation.
struct StageCosts {
    double gp = 0.5;
    double plan = 0.2;

    static double repr(PartitionMethod m) {
        switch (m) {
        case PartitionMethod::grid: return 0.01;
        case PartitionMethod::quadtree: return 0.02;
        case PartitionMethod::wedgelet: return 4.13;
        case PartitionMethod::bsp_lse: return 141.0;
        case PartitionMethod::bsp_region: return 0.01;
        case PartitionMethod::hexagon: return 7.32;
        case PartitionMethod::voronoi: return 4.76;
        }
        return 0.0;
    }
};

struct MissionConfig {
    PartitionMethod representation = PartitionMethod::quadtree;
    int horizon = 4;          // receding-horizon planning budget
    double budget_s = 2400.0; // total mission time budget
    double speed_mps = 2.0;
    int retrain_every = 10; // full GP re-estimation cadence, in samples
    int bootstrap_samples = 10;
    double altitude_m = 7.0;
    double fov_deg = 33.0;
    UtilityWeights weights;
    uint64_t seed = 0;
    Vec2 start{0.1, 0.1};
    int path_cap = 5000;
    int rmse_samples = 5000;
    int fit_restarts = 3;
    KernelType kernel = KernelType::matern32;
    bool deterministic_time = false; // synthetic stage costs instead of wall clock
    StageCosts stage_costs;
    PartitionParams partition;

    void validate() const {
        if (budget_s < 0.0) throw validation_error("mission budget must be >= 0");
        if (speed_mps <= 0.0) throw validation_error("mission speed must be positive");
        if (horizon < 1) throw validation_error("mission horizon must be >= 1");
        if (retrain_every < 1) throw validation_error("retrain_every must be >= 1");
        if (start.x < 0 || start.x > 1 || start.y < 0 || start.y > 1)
            throw validation_error("start pose outside the unit square");
    }
};

struct MissionState {
    Vec2 pose{};
    CoverageMask coverage_mask;
    GPModel model;
    double time_left = 0.0;
    std::vector<Observation> samples;
    int step_index = 0;
};

struct StepRecord {
    int step = 0;
    double weed_coverage = 0.0;
    double map_coverage = 0.0;
    double rmse = 0.0;
    double mean_uncertainty = 0.0;
    double t_gp = 0.0, t_repr = 0.0, t_plan = 0.0, t_travel = 0.0;
    double distance_m = 0.0;
    Vec2 pose{}; // pose after the move
    int n_samples = 0;
    int n_candidates = 0;
    double utility = 0.0, info = 0.0, cost_m = 0.0, revisit = 0.0;
    int chosen_node = -1;
    Hyperparams theta; // hyperparameters in force at this step
    bool fit_warning = false;
    bool fallback = false;
};

/// Mark every mask cell intersecting the square footprint. Idempotent.
inline void apply_footprint(CoverageMask& mask, Vec2 pose, int footprint_px) {
    if (pose.x < 0 || pose.x > 1 || pose.y < 0 || pose.y > 1)
        throw validation_error("apply_footprint: pose outside the unit square");
    const int res = mask.resolution;
    int x0 = int(std::lround(pose.x * res - footprint_px / 2.0));
    int y0 = int(std::lround(pose.y * res - footprint_px / 2.0));
    int x1 = std::min(res, x0 + footprint_px);
    int y1 = std::min(res, y0 + footprint_px);
    x0 = std::max(0, x0);
    y0 = std::max(0, y0);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) mask.at(x, y) = 1;
}

/// Deduct the four stage times of a finished step from the remaining budget.
inline MissionState account_time(const StepRecord& record, MissionState state) {
    state.time_left -= record.t_gp + record.t_repr + record.t_plan + record.t_travel;
    state.step_index += 1;
    return state;
}

namespace detail {

struct StageTimer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double stop() const {
        auto t1 = std::chrono::steady_clock::now();
        return std::chrono::duration<double>(t1 - t0).count();
    }
};

// Batched posterior render over the evaluation grid; returns the clamped
// mean field and the mean predictive variance.
inline Field render_posterior(const GPModel& model, int res, double* mean_var) {
    std::vector<Vec2> pts;
    pts.reserve(size_t(res) * res);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) pts.push_back({(x + 0.5) / res, (y + 0.5) / res});
    std::vector<double> mean, var;
    predict(model, pts, mean, var);
    Field f(res);
    double vsum = 0.0;
    for (size_t i = 0; i < mean.size(); ++i) {
        f.values[i] = clamp01(mean[i]);
        vsum += var[i];
    }
    if (mean_var) *mean_var = vsum / double(var.size());
    return f;
}

} // namespace detail

/// Full budgeted receding-horizon mission: sample at the pose, update the GP
/// (re-optimising hyperparameters every retrain_every samples), rebuild the
/// configured representation (sparse grid during bootstrap), plan over the
/// centroid graph, execute the first waypoint, and account all stage times
/// against the budget until it is exhausted.
inline std::vector<StepRecord> run_mission(const MissionConfig& cfg, const WeedRaster& truth) {
    cfg.validate();
    truth.validate();

    const int eval_res = cfg.partition.eval_res;
    const double map_size_m = truth.map_size_m();
    const int fp_truth = footprint_px(cfg.altitude_m, cfg.fov_deg, truth.gsd);
    const int fp_eval =
        std::max(1, int(std::lround(double(fp_truth) / truth.width * eval_res)));

    // truth resampled onto the evaluation grid for coverage accounting
    Field truth_field = to_field(truth, eval_res);
    WeedRaster truth_eval;
    truth_eval.width = eval_res;
    truth_eval.height = eval_res;
    truth_eval.values = truth_field.values;
    truth_eval.gsd = map_size_m / eval_res;

    MissionState state;
    state.pose = cfg.start;
    state.coverage_mask = CoverageMask(eval_res);
    state.time_left = cfg.budget_s;
    HyperPriors priors;
    Hyperparams theta = priors.mode();
    state.model = fit_gp({}, {}, theta, cfg.kernel);

    std::vector<StepRecord> records;
    PartitionParams boot_params = cfg.partition;
    boot_params.grid_cell_px = std::max(1, eval_res / 8);

    while (state.time_left > 0.0) {
        StepRecord rec;
        rec.step = state.step_index;

        // stage 1: sample the footprint and refresh the GP
        detail::StageTimer gp_timer;
        auto patch = extract_footprint(truth, state.pose, fp_truth);
        state.samples.push_back({state.pose.x, state.pose.y, patch.mean});
        apply_footprint(state.coverage_mask, state.pose, fp_eval);

        std::vector<Vec2> X;
        std::vector<double> y;
        X.reserve(state.samples.size());
        for (const auto& o : state.samples) {
            X.push_back({o.x, o.y});
            y.push_back(o.value);
        }
        if (int(state.samples.size()) >= 2 &&
            int(state.samples.size()) % cfg.retrain_every == 0) {
            auto fit = fit_map(X, y, theta, cfg.fit_restarts, cfg.kernel, priors,
                               cfg.seed ^ (0x9e3779b9ULL * uint64_t(state.samples.size())));
            theta = fit.theta;
            rec.fit_warning = fit.warning;
        }
        rec.theta = theta;
        try {
            state.model = fit_gp(X, y, theta, cfg.kernel);
        } catch (const numerical_error&) {
            rec.fit_warning = true; // keep the previous model
        }
        double mean_var = 0.0;
        Field mean_field = detail::render_posterior(state.model, eval_res, &mean_var);
        rec.t_gp = gp_timer.stop();

        // stage 2: discrete representation (sparse grid while bootstrapping)
        detail::StageTimer repr_timer;
        bool bootstrap = int(state.samples.size()) <= cfg.bootstrap_samples;
        Partition part =
            bootstrap ? build_grid(mean_field, boot_params.grid_cell_px)
                      : build_partition(mean_field, cfg.representation, cfg.partition,
                                        cfg.seed ^ uint64_t(state.step_index));
        rec.t_repr = repr_timer.stop();

        // stage 3: plan over the centroid graph
        detail::StageTimer plan_timer;
        TraversalGraph graph = delaunay(centroids(part));
        int start_node = graph.node_of_cell[size_t(locate(part, state.pose))];
        auto candidates = enumerate_paths(graph, start_node, cfg.horizon, cfg.path_cap);
        int discarded = 0;
        auto scored = score_paths(std::move(candidates), graph, state.model,
                                  state.coverage_mask, cfg.weights, map_size_m, &discarded);
        rec.n_candidates = int(scored.size());
        auto best = select_best(scored);
        rec.t_plan = plan_timer.stop();

        Vec2 target = state.pose;
        if (best) {
            rec.chosen_node = next_waypoint(*best);
            rec.utility = best->utility;
            rec.info = best->info;
            rec.cost_m = best->cost_m;
            rec.revisit = best->revisit;
            target = graph.nodes[size_t(rec.chosen_node)];
        } else {
            // fallback: nearest uncovered centroid
            rec.fallback = true;
            double best_d = std::numeric_limits<double>::max();
            int pick = -1;
            auto cs = centroids(part);
            for (size_t i = 0; i < cs.size(); ++i) {
                if (state.coverage_mask.sample(cs[i].x, cs[i].y)) continue;
                double d = dist(state.pose, cs[i]);
                if (d < best_d) {
                    best_d = d;
                    pick = int(i);
                }
            }
            if (pick < 0) {
                // nothing left to visit
                rec.pose = state.pose;
                rec.n_samples = int(state.samples.size());
                auto [wc, mc] = coverage(state.coverage_mask, truth_eval);
                rec.weed_coverage = wc;
                rec.map_coverage = mc;
                rec.mean_uncertainty = mean_var;
                rec.rmse = rmse_vs_truth(state.model, truth, cfg.rmse_samples,
                                         cfg.seed ^ uint64_t(1000003 * state.step_index));
                records.push_back(rec);
                break;
            }
            rec.chosen_node = graph.node_of_cell[size_t(pick)];
            target = cs[size_t(pick)];
        }

        rec.distance_m = dist(state.pose, target) * map_size_m;
        rec.t_travel = rec.distance_m / cfg.speed_mps;
        state.pose = target;

        if (cfg.deterministic_time) {
            rec.t_gp = cfg.stage_costs.gp;
            rec.t_plan = cfg.stage_costs.plan;
            rec.t_repr = bootstrap ? StageCosts::repr(PartitionMethod::grid)
                                   : StageCosts::repr(cfg.representation);
        }

        auto [wc, mc] = coverage(state.coverage_mask, truth_eval);
        rec.weed_coverage = wc;
        rec.map_coverage = mc;
        rec.mean_uncertainty = mean_var;
        rec.rmse = rmse_vs_truth(state.model, truth, cfg.rmse_samples,
                                 cfg.seed ^ uint64_t(1000003 * state.step_index));
        rec.pose = state.pose;
        rec.n_samples = int(state.samples.size());

        state = account_time(rec, std::move(state));
        records.push_back(rec);
    }
    return records;
}

} // namespace fieldscout
