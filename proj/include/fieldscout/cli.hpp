#pragma once

#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>

#include "fieldscout/config.hpp"
#include "fieldscout/csv.hpp"
#include "fieldscout/manifest.hpp"
#include "fieldscout/metrics.hpp"
#include "fieldscout/mission.hpp"
#include "fieldscout/plot.hpp"

namespace fieldscout {

namespace fs = std::filesystem;

struct CliOverrides {
    std::optional<uint64_t> seed;
    std::optional<bool> deterministic;
    std::optional<std::string> methods;
    std::optional<int> trials;
    std::optional<int> starts;
};

namespace cli_detail {

inline std::vector<PartitionMethod> parse_methods(const std::string& csv) {
    std::vector<PartitionMethod> out;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        try {
            out.push_back(partition_method_from_string(cur));
        } catch (const validation_error& e) {
            throw usage_error(e.what());
        }
        cur.clear();
    };
    for (char c : csv) {
        if (c == ',')
            flush();
        else if (!std::isspace(static_cast<unsigned char>(c)))
            cur.push_back(c);
    }
    flush();
    if (out.empty()) throw usage_error("no partition methods given");
    return out;
}

inline PartitionParams partition_params_from(const Config& cfg) {
    PartitionParams p;
    p.eval_res = cfg.get_int("partition.eval_res", p.eval_res);
    p.grid_cell_px = cfg.get_int("partition.grid_cell_px", p.grid_cell_px);
    p.quadtree_max_depth = cfg.get_int("partition.quadtree_max_depth", p.quadtree_max_depth);
    p.quadtree_tol = cfg.get_double("partition.quadtree_tol", p.quadtree_tol);
    p.wedgelet_max_depth = cfg.get_int("partition.wedgelet_max_depth", p.wedgelet_max_depth);
    p.wedgelet_tol = cfg.get_double("partition.wedgelet_tol", p.wedgelet_tol);
    p.wedgelet_angles = cfg.get_int("partition.wedgelet_angles", p.wedgelet_angles);
    p.wedgelet_offsets = cfg.get_int("partition.wedgelet_offsets", p.wedgelet_offsets);
    p.bsp_lse_max_depth = cfg.get_int("partition.bsp_lse_max_depth", p.bsp_lse_max_depth);
    p.bsp_lse_tol = cfg.get_double("partition.bsp_lse_tol", p.bsp_lse_tol);
    p.bsp_lse_angles = cfg.get_int("partition.bsp_lse_angles", p.bsp_lse_angles);
    p.bsp_lse_offsets = cfg.get_int("partition.bsp_lse_offsets", p.bsp_lse_offsets);
    p.bsp_lse_refine = cfg.get_int("partition.bsp_lse_refine", p.bsp_lse_refine);
    p.bsp_region_min_px = cfg.get_int("partition.bsp_region_min_px", p.bsp_region_min_px);
    p.hex_base_res = cfg.get_int("partition.hex_base_res", p.hex_base_res);
    p.hex_tol = cfg.get_double("partition.hex_tol", p.hex_tol);
    p.voronoi_seeds = cfg.get_int("partition.voronoi_seeds", p.voronoi_seeds);
    p.voronoi_iters = cfg.get_int("partition.voronoi_iters", p.voronoi_iters);
    return p;
}

inline WeedRaster load_field_source(const Config& cfg, uint64_t seed) {
    std::string source = cfg.get("field.source", "synth");
    double gsd = cfg.get_double("field.gsd", kDefaultGsd);
    if (source == "synth") {
        SynthSpec spec;
        spec.width = cfg.get_int("field.resolution", 256);
        spec.height = spec.width;
        spec.gsd = gsd;
        spec.noise = cfg.get_double("field.noise", 0.0);
        for (const std::string& blob : cfg.get_all("field.blob")) {
            std::istringstream ss(blob);
            Blob b;
            if (!(ss >> b.cx >> b.cy >> b.radius >> b.amplitude))
                throw validation_error("field.blob expects 'cx cy radius amplitude', got '" +
                                       blob + "'");
            spec.blobs.push_back(b);
        }
        return synth_field(spec, cfg.get_u64("field.synth_seed", seed));
    }
    WeedChannel channel = weed_channel_from_string(cfg.get("field.channel", "red"));
    return load_raster(source, gsd, channel);
}

inline KernelType kernel_from(const Config& cfg, const std::string& key,
                              const std::string& fallback) {
    std::string k = cfg.get(key, fallback);
    if (k == "matern32") return KernelType::matern32;
    if (k == "exponential") return KernelType::exponential;
    throw validation_error("unknown kernel '" + k + "' (matern32 or exponential)");
}

inline std::string num(double v) { return fmt_double(v); }

struct Stats {
    double mean = 0.0, stddev = 0.0;
};

inline Stats stats_of(const std::vector<double>& v) {
    Stats s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= double(v.size());
    for (double x : v) s.stddev += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(s.stddev / double(v.size()));
    return s;
}

} // namespace cli_detail

/// `fieldscout represent`: train the GP on pooled samples of the field,
/// render the posterior reference grid, build each representation `trials`
/// times and report fidelity, timing and memory per method.
inline int cmd_represent(const Config& cfg, const std::string& out_dir,
                         const CliOverrides& ov) {
    uint64_t seed = ov.seed.value_or(cfg.get_u64("seed", 42));
    bool deterministic = ov.deterministic.value_or(cfg.get_bool("deterministic", false));
    int trials = ov.trials.value_or(cfg.get_int("represent.trials", 7));
    if (trials < 1) throw usage_error("trials must be >= 1");
    auto methods = cli_detail::parse_methods(ov.methods.value_or(cfg.get(
        "represent.methods", "grid,quadtree,wedgelet,bsp_lse,bsp_region,hexagon,voronoi")));

    WeedRaster truth = cli_detail::load_field_source(cfg, seed);
    PartitionParams params = cli_detail::partition_params_from(cfg);
    KernelType kernel = cli_detail::kernel_from(cfg, "represent.kernel", "exponential");
    int n_samples = cfg.get_int("represent.samples", 200);
    int patch_px = cfg.get_int("represent.patch_px", 150);
    int restarts = cfg.get_int("gp.restarts", 3);
    int hash_bits = cfg.get_int("metrics.hash_bits", 4096);

    fs::create_directories(out_dir);
    RunManifest manifest("represent", seed, deterministic);
    manifest.set_config_snapshot(cfg.dump());
    manifest.add_input_text("config", cfg.dump());

    CsvTable fidelity;
    fidelity.schema = "fieldscout.fidelity.v1";
    fidelity.header = {"method", "trial",        "ssim_complement", "hamming",
                       "mse",    "mse_255scale", "build_time_s",    "memory_bytes"};

    std::map<std::string, std::map<std::string, std::vector<double>>> samples_by_method;
    HyperPriors priors;

    for (int trial = 0; trial < trials; ++trial) {
        auto obs = pooled_samples(truth, n_samples, patch_px, seed + uint64_t(trial));
        std::vector<Vec2> X;
        std::vector<double> y;
        for (const auto& o : obs) {
            X.push_back({o.x, o.y});
            y.push_back(o.value);
        }
        auto fit = fit_map(X, y, priors.mode(), restarts, kernel, priors,
                           seed * 1000 + uint64_t(trial));
        GPModel model = fit_gp(X, y, fit.theta, kernel);
        Field reference = detail::render_posterior(model, params.eval_res, nullptr);
        PerceptualHash ref_hash = perceptual_hash(reference, hash_bits);

        if (trial == 0) {
            save_png(out_dir + "/truth.png",
                     to_gray_image(truth.values, truth.width, truth.height));
            save_png(out_dir + "/reference.png",
                     to_gray_image(reference.values, params.eval_res, params.eval_res));
            manifest.add_output(out_dir + "/truth.png");
            manifest.add_output(out_dir + "/reference.png");
        }

        for (PartitionMethod method : methods) {
            detail::StageTimer timer;
            Partition part = build_partition(reference, method, params,
                                             seed ^ (uint64_t(trial) * 131 + size_t(method)));
            double build_time = deterministic ? StageCosts::repr(method) : timer.stop();
            auto bytes = serialize_partition(part);
            Field rendered = rasterize(part, params.eval_res);

            double sc = 1.0 - ssim(reference, rendered);
            long hd = hamming(ref_hash, perceptual_hash(rendered, hash_bits));
            double err = mse(reference, rendered);

            fidelity.rows.push_back({to_string(method), std::to_string(trial),
                                     cli_detail::num(sc), std::to_string(hd),
                                     cli_detail::num(err), cli_detail::num(err * 255.0 * 255.0),
                                     cli_detail::num(build_time),
                                     std::to_string(bytes.size())});
            auto& bucket = samples_by_method[to_string(method)];
            bucket["ssim_complement"].push_back(sc);
            bucket["hamming"].push_back(double(hd));
            bucket["mse"].push_back(err);
            bucket["build_time_s"].push_back(build_time);
            bucket["memory_bytes"].push_back(double(bytes.size()));

            if (trial == 0) {
                std::string img = out_dir + "/" + to_string(method) + ".png";
                save_png(img, to_gray_image(rendered.values, params.eval_res, params.eval_res));
                manifest.add_output(img);
                std::string cells = out_dir + "/" + to_string(method) + "_cells.txt";
                std::ofstream cf(cells, std::ios::binary);
                cf << dump_partition(part);
                cf.close();
                manifest.add_output(cells);
            }
        }
    }

    fidelity.save(out_dir + "/fidelity.csv");
    manifest.add_output(out_dir + "/fidelity.csv");

    std::string source = cfg.get("field.source", "synth");
    std::string field_id = source == "synth"
                               ? "synth-" + std::to_string(cfg.get_u64("field.synth_seed", seed))
                               : fs::path(source).filename().string();
    CsvTable summary;
    summary.schema = "fieldscout.fidelity-summary.v1";
    summary.header = {"method", "field", "metric", "mean", "std"};
    for (PartitionMethod method : methods) {
        const auto& bucket = samples_by_method[to_string(method)];
        for (const char* metric : {"ssim_complement", "hamming", "mse", "build_time_s",
                                   "memory_bytes"}) {
            auto st = cli_detail::stats_of(bucket.at(metric));
            summary.rows.push_back({to_string(method), field_id, metric,
                                    cli_detail::num(st.mean), cli_detail::num(st.stddev)});
        }
    }
    summary.save(out_dir + "/summary.csv");
    manifest.add_output(out_dir + "/summary.csv");
    manifest.save(out_dir + "/manifest.json");
    return 0;
}

/// `fieldscout mission`: run the budgeted receding-horizon mission from each
/// start pose, emit per-step CSVs, aggregate curves, trajectory overlays and
/// the stage-time breakdown.
inline int cmd_mission(const Config& cfg, const std::string& out_dir, const CliOverrides& ov) {
    uint64_t seed = ov.seed.value_or(cfg.get_u64("seed", 42));
    bool deterministic = ov.deterministic.value_or(cfg.get_bool("deterministic", false));
    int starts = ov.starts.value_or(cfg.get_int("mission.starts", 5));
    if (starts < 1) throw usage_error("starts must be >= 1");

    WeedRaster truth = cli_detail::load_field_source(cfg, seed);

    MissionConfig mc;
    mc.representation =
        partition_method_from_string(cfg.get("mission.representation", "quadtree"));
    mc.horizon = cfg.get_int("planner.horizon", mc.horizon);
    mc.path_cap = cfg.get_int("planner.cap", mc.path_cap);
    mc.weights.lambda_cost = cfg.get_double("planner.lambda_cost", mc.weights.lambda_cost);
    mc.weights.lambda_visit = cfg.get_double("planner.lambda_visit", mc.weights.lambda_visit);
    mc.budget_s = cfg.get_double("mission.budget_s", mc.budget_s);
    mc.speed_mps = cfg.get_double("mission.speed_mps", mc.speed_mps);
    mc.retrain_every = cfg.get_int("mission.retrain_every", mc.retrain_every);
    mc.bootstrap_samples = cfg.get_int("mission.bootstrap_samples", mc.bootstrap_samples);
    mc.altitude_m = cfg.get_double("mission.altitude_m", mc.altitude_m);
    mc.fov_deg = cfg.get_double("mission.fov_deg", mc.fov_deg);
    mc.start = {cfg.get_double("mission.start_x", 0.1), cfg.get_double("mission.start_y", 0.1)};
    mc.rmse_samples = cfg.get_int("mission.rmse_samples", mc.rmse_samples);
    mc.fit_restarts = cfg.get_int("gp.restarts", mc.fit_restarts);
    mc.kernel = cli_detail::kernel_from(cfg, "mission.kernel", "matern32");
    mc.deterministic_time = deterministic;
    mc.partition = cli_detail::partition_params_from(cfg);
    mc.seed = seed;

    std::vector<Vec2> start_poses;
    if (starts == 1) {
        start_poses.push_back(mc.start);
    } else {
        Rng rng(seed ^ 0x5747a11ULL);
        for (int i = 0; i < starts; ++i)
            start_poses.push_back({0.05 + 0.9 * rng.uniform(), 0.05 + 0.9 * rng.uniform()});
    }

    fs::create_directories(out_dir);
    RunManifest manifest("mission", seed, deterministic);
    manifest.set_config_snapshot(cfg.dump());
    manifest.add_input_text("config", cfg.dump());

    const std::vector<std::string> metric_names = {"weed_coverage", "map_coverage", "rmse",
                                                   "mean_uncertainty"};
    std::vector<std::vector<StepRecord>> all_records;

    for (int si = 0; si < starts; ++si) {
        MissionConfig run_cfg = mc;
        run_cfg.start = start_poses[size_t(si)];
        run_cfg.seed = seed + uint64_t(si);
        auto records = run_mission(run_cfg, truth);
        all_records.push_back(records);

        CsvTable steps;
        steps.schema = "fieldscout.steps.v1";
        steps.header = {"step",     "pose_x",  "pose_y",   "distance_m", "weed_coverage",
                        "map_coverage", "rmse", "mean_uncertainty", "t_gp", "t_repr",
                        "t_plan",   "t_travel", "n_samples", "n_candidates", "utility",
                        "info",     "cost_m",  "revisit",  "chosen_node", "sigma_f2",
                        "ell",      "sigma_n2", "fit_warning", "fallback"};
        for (const auto& r : records)
            steps.rows.push_back(
                {std::to_string(r.step), cli_detail::num(r.pose.x), cli_detail::num(r.pose.y),
                 cli_detail::num(r.distance_m), cli_detail::num(r.weed_coverage),
                 cli_detail::num(r.map_coverage), cli_detail::num(r.rmse),
                 cli_detail::num(r.mean_uncertainty), cli_detail::num(r.t_gp),
                 cli_detail::num(r.t_repr), cli_detail::num(r.t_plan),
                 cli_detail::num(r.t_travel), std::to_string(r.n_samples),
                 std::to_string(r.n_candidates), cli_detail::num(r.utility),
                 cli_detail::num(r.info), cli_detail::num(r.cost_m),
                 cli_detail::num(r.revisit), std::to_string(r.chosen_node),
                 cli_detail::num(r.theta.sigma_f2), cli_detail::num(r.theta.ell),
                 cli_detail::num(r.theta.sigma_n2), r.fit_warning ? "1" : "0",
                 r.fallback ? "1" : "0"});
        std::string steps_path = out_dir + "/steps_" + std::to_string(si) + ".csv";
        steps.save(steps_path);
        manifest.add_output(steps_path);

        std::vector<Vec2> poses{run_cfg.start};
        for (const auto& r : records) poses.push_back(r.pose);
        std::string traj = out_dir + "/trajectory_" + std::to_string(si) + ".png";
        trajectory_overlay(traj, to_field(truth, mc.partition.eval_res).values,
                           mc.partition.eval_res, poses);
        manifest.add_output(traj);

        std::ofstream poly(out_dir + "/path_" + std::to_string(si) + ".txt", std::ios::binary);
        poly << "# x y (unit square)\n";
        for (const auto& p : poses)
            poly << cli_detail::num(p.x) << " " << cli_detail::num(p.y) << "\n";
        poly.close();
        manifest.add_output(out_dir + "/path_" + std::to_string(si) + ".txt");
    }

    // aggregate curves across starts
    size_t max_steps = 0;
    for (const auto& r : all_records) max_steps = std::max(max_steps, r.size());
    CsvTable curves;
    curves.schema = "fieldscout.curves.v1";
    curves.header = {"step", "metric", "mean", "std", "n"};
    std::vector<PlotSeries> curve_series(metric_names.size());
    for (size_t m = 0; m < metric_names.size(); ++m) curve_series[m].name = metric_names[m];
    for (size_t step = 0; step < max_steps; ++step) {
        for (size_t m = 0; m < metric_names.size(); ++m) {
            std::vector<double> vals;
            for (const auto& records : all_records) {
                if (step >= records.size()) continue;
                const auto& r = records[step];
                double v[] = {r.weed_coverage, r.map_coverage, r.rmse, r.mean_uncertainty};
                vals.push_back(v[m]);
            }
            if (vals.empty()) continue;
            auto st = cli_detail::stats_of(vals);
            curves.rows.push_back({std::to_string(step), metric_names[m],
                                   cli_detail::num(st.mean), cli_detail::num(st.stddev),
                                   std::to_string(vals.size())});
            curve_series[m].x.push_back(double(step));
            curve_series[m].y.push_back(st.mean);
        }
    }
    curves.save(out_dir + "/curves.csv");
    manifest.add_output(out_dir + "/curves.csv");
    for (size_t m = 0; m < metric_names.size(); ++m) {
        std::string plot = out_dir + "/curve_" + metric_names[m] + ".png";
        line_plot(plot, metric_names[m] + " vs step", {curve_series[m]});
        manifest.add_output(plot);
    }

    CsvTable mission_summary;
    mission_summary.schema = "fieldscout.mission-summary.v1";
    mission_summary.header = {"start",    "steps",          "weed_coverage", "map_coverage",
                              "rmse",     "mean_uncertainty", "distance_m",  "time_used_s"};
    for (int si = 0; si < starts; ++si) {
        const auto& records = all_records[size_t(si)];
        double distance = 0, time_used = 0;
        for (const auto& r : records) {
            distance += r.distance_m;
            time_used += r.t_gp + r.t_repr + r.t_plan + r.t_travel;
        }
        if (records.empty()) {
            mission_summary.rows.push_back(
                {std::to_string(si), "0", "0", "0", "0", "0", "0", "0"});
        } else {
            const auto& last = records.back();
            mission_summary.rows.push_back(
                {std::to_string(si), std::to_string(records.size()),
                 cli_detail::num(last.weed_coverage), cli_detail::num(last.map_coverage),
                 cli_detail::num(last.rmse), cli_detail::num(last.mean_uncertainty),
                 cli_detail::num(distance), cli_detail::num(time_used)});
        }
    }
    mission_summary.save(out_dir + "/summary.csv");
    manifest.add_output(out_dir + "/summary.csv");

    CsvTable stages;
    stages.schema = "fieldscout.stage-times.v1";
    stages.header = {"stage", "total_s", "mean_per_step_s"};
    const char* stage_names[] = {"gp", "representation", "planning", "travel"};
    for (int s = 0; s < 4; ++s) {
        double total = 0;
        long n = 0;
        for (const auto& records : all_records)
            for (const auto& r : records) {
                double v[] = {r.t_gp, r.t_repr, r.t_plan, r.t_travel};
                total += v[s];
                ++n;
            }
        stages.rows.push_back({stage_names[s], cli_detail::num(total),
                               cli_detail::num(n ? total / double(n) : 0.0)});
    }
    stages.save(out_dir + "/stage_times.csv");
    manifest.add_output(out_dir + "/stage_times.csv");
    manifest.save(out_dir + "/manifest.json");
    return 0;
}

/// `fieldscout compare`: field features, per-field composite method scores
/// and Spearman correlations across completed represent runs.
inline int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& out_dir,
                       const Config& cfg, const CliOverrides& ov) {
    uint64_t seed = ov.seed.value_or(cfg.get_u64("seed", 42));

    struct FieldRun {
        std::string name;
        FieldFeatures features;
        std::vector<std::string> methods;
        std::vector<double> scores;
    };
    std::vector<FieldRun> runs;

    double weed_threshold = cfg.get_double("metrics.weed_threshold", 0.5);
    double eps = cfg.get_double("metrics.dbscan_eps", 5.0);
    int min_pts = cfg.get_int("metrics.dbscan_min_pts", 10);

    for (const std::string& dir : run_dirs) {
        if (!fs::exists(dir + "/summary.csv") || !fs::exists(dir + "/truth.png"))
            throw validation_error(dir + ": not a completed represent run "
                                         "(missing summary.csv or truth.png)");
        WeedRaster truth = load_raster(dir + "/truth.png");
        CsvTable summary = CsvTable::load(dir + "/summary.csv");
        int c_method = summary.column("method");
        int c_metric = summary.column("metric");
        int c_mean = summary.column("mean");

        std::vector<std::string> methods;
        std::map<std::string, std::map<std::string, double>> by_method;
        for (const auto& row : summary.rows) {
            const std::string& m = row[size_t(c_method)];
            if (by_method.find(m) == by_method.end()) methods.push_back(m);
            by_method[m][row[size_t(c_metric)]] = std::strtod(row[size_t(c_mean)].c_str(), nullptr);
        }
        if (methods.size() < 2)
            throw validation_error(dir + ": represent run covers fewer than two methods");

        std::vector<std::vector<double>> columns(3);
        for (const auto& m : methods) {
            columns[0].push_back(by_method[m].at("ssim_complement"));
            columns[1].push_back(by_method[m].at("hamming"));
            columns[2].push_back(by_method[m].at("mse"));
        }
        FieldRun fr;
        fr.name = fs::path(dir).filename().string();
        if (fr.name.empty()) fr.name = dir;
        fr.features = field_features(truth, weed_threshold, eps, min_pts);
        fr.methods = methods;
        fr.scores = composite_scores(columns, methods.size());
        runs.push_back(std::move(fr));
    }

    if (runs.size() < 2) throw validation_error("compare needs at least two represent runs");
    if (runs.size() < 3)
        throw validation_error(
            "Spearman rank correlation needs at least three fields; got " +
            std::to_string(runs.size()) + " - add more represent runs");

    // all runs must cover the same method set
    for (const auto& r : runs)
        if (r.methods != runs[0].methods)
            throw validation_error("represent runs cover different method sets; "
                                   "re-run with identical --methods");

    fs::create_directories(out_dir);
    RunManifest manifest("compare", seed, true);
    manifest.set_config_snapshot(cfg.dump());

    CsvTable features;
    features.schema = "fieldscout.features.v1";
    features.header = {"field",           "weed_coverage_ratio",  "num_weed_patches",
                       "largest_patch_fraction", "avg_patch_size", "patch_size_std",
                       "dbscan_num_clusters",    "dbscan_avg_cluster_size"};
    for (const auto& r : runs)
        features.rows.push_back({r.name, cli_detail::num(r.features.weed_coverage_ratio),
                                 std::to_string(r.features.num_weed_patches),
                                 cli_detail::num(r.features.largest_patch_fraction),
                                 cli_detail::num(r.features.avg_patch_size),
                                 cli_detail::num(r.features.patch_size_std),
                                 std::to_string(r.features.dbscan_num_clusters),
                                 cli_detail::num(r.features.dbscan_avg_cluster_size)});
    features.save(out_dir + "/features.csv");
    manifest.add_output(out_dir + "/features.csv");

    CsvTable scores;
    scores.schema = "fieldscout.scores.v1";
    scores.header = {"field", "method", "composite_score"};
    for (const auto& r : runs)
        for (size_t m = 0; m < r.methods.size(); ++m)
            scores.rows.push_back({r.name, r.methods[m], cli_detail::num(r.scores[m])});
    scores.save(out_dir + "/scores.csv");
    manifest.add_output(out_dir + "/scores.csv");

    const std::vector<std::pair<std::string, std::function<double(const FieldFeatures&)>>>
        feature_getters = {
            {"weed_coverage_ratio", [](const FieldFeatures& f) { return f.weed_coverage_ratio; }},
            {"num_weed_patches",
             [](const FieldFeatures& f) { return double(f.num_weed_patches); }},
            {"largest_patch_fraction",
             [](const FieldFeatures& f) { return f.largest_patch_fraction; }},
            {"avg_patch_size", [](const FieldFeatures& f) { return f.avg_patch_size; }},
            {"patch_size_std", [](const FieldFeatures& f) { return f.patch_size_std; }},
            {"dbscan_num_clusters",
             [](const FieldFeatures& f) { return double(f.dbscan_num_clusters); }},
            {"dbscan_avg_cluster_size",
             [](const FieldFeatures& f) { return f.dbscan_avg_cluster_size; }}};

    CsvTable rho_table;
    rho_table.schema = "fieldscout.spearman.v1";
    rho_table.header = {"feature", "method", "rho"};
    CsvTable corr_summary;
    corr_summary.schema = "fieldscout.correlation-summary.v1";
    corr_summary.header = {"feature", "positive_method", "positive_rho", "negative_method",
                           "negative_rho"};

    const auto& methods = runs[0].methods;
    for (const auto& [fname, getter] : feature_getters) {
        std::vector<double> fvals;
        for (const auto& r : runs) fvals.push_back(getter(r.features));
        std::optional<std::pair<std::string, double>> best_pos, best_neg;
        for (size_t m = 0; m < methods.size(); ++m) {
            std::vector<double> svals;
            for (const auto& r : runs) svals.push_back(r.scores[m]);
            std::string rho_str;
            try {
                double rho = spearman(fvals, svals);
                rho_str = cli_detail::num(rho);
                if (!best_pos || rho > best_pos->second) best_pos = {methods[m], rho};
                if (!best_neg || rho < best_neg->second) best_neg = {methods[m], rho};
            } catch (const validation_error& e) {
                rho_str = std::string("error:") + e.what();
            }
            rho_table.rows.push_back({fname, methods[m], rho_str});
        }
        if (best_pos && best_neg)
            corr_summary.rows.push_back({fname, best_pos->first,
                                         cli_detail::num(best_pos->second), best_neg->first,
                                         cli_detail::num(best_neg->second)});
        else
            corr_summary.rows.push_back({fname, "error", "error", "error", "error"});
    }
    rho_table.save(out_dir + "/spearman.csv");
    manifest.add_output(out_dir + "/spearman.csv");
    corr_summary.save(out_dir + "/correlation_summary.csv");
    manifest.add_output(out_dir + "/correlation_summary.csv");
    manifest.save(out_dir + "/manifest.json");
    return 0;
}

/// `fieldscout report`: merge the CSV outputs of earlier runs by schema,
/// render summary plots and write a consolidated markdown report.
inline int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir,
                      const Config& cfg, const CliOverrides& ov) {
    uint64_t seed = ov.seed.value_or(cfg.get_u64("seed", 42));
    fs::create_directories(out_dir);

    std::vector<std::string> skipped;
    std::map<std::string, CsvTable> merged; // schema -> table
    std::vector<std::string> schema_order;
    std::map<std::string, std::vector<PlotSeries>> curve_plots; // metric -> per-run series

    for (const std::string& dir : run_dirs) {
        if (!fs::exists(dir + "/manifest.json")) {
            skipped.push_back(dir);
            continue;
        }
        std::string run_name = fs::path(dir).filename().string();
        if (run_name.empty()) run_name = dir;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.path().extension() != ".csv") continue;
            CsvTable t = CsvTable::load(entry.path().string());
            if (t.schema.empty()) continue;
            auto it = merged.find(t.schema);
            if (it == merged.end()) {
                CsvTable base;
                base.schema = t.schema;
                base.header = t.header;
                base.header.insert(base.header.begin(), "run");
                schema_order.push_back(t.schema);
                it = merged.emplace(t.schema, std::move(base)).first;
            }
            for (const auto& row : t.rows) {
                std::vector<std::string> r = row;
                r.insert(r.begin(), run_name);
                it->second.rows.push_back(std::move(r));
            }
            if (t.schema == "fieldscout.curves.v1") {
                int c_step = t.column("step"), c_metric = t.column("metric"),
                    c_mean = t.column("mean");
                std::map<std::string, PlotSeries> per_metric;
                for (const auto& row : t.rows) {
                    auto& s = per_metric[row[size_t(c_metric)]];
                    s.name = run_name;
                    s.x.push_back(std::strtod(row[size_t(c_step)].c_str(), nullptr));
                    s.y.push_back(std::strtod(row[size_t(c_mean)].c_str(), nullptr));
                }
                for (auto& [metric, s] : per_metric) curve_plots[metric].push_back(std::move(s));
            }
        }
    }
    if (merged.empty())
        throw validation_error("report: no readable runs (all missing manifest.json?)");

    RunManifest manifest("report", seed, true);
    manifest.set_config_snapshot(cfg.dump());

    std::ostringstream md;
    md << "# fieldscout report\n\n";
    if (!skipped.empty()) {
        md << "Skipped (missing manifest): ";
        for (size_t i = 0; i < skipped.size(); ++i) md << (i ? ", " : "") << skipped[i];
        md << "\n\n";
    }
    for (const std::string& schema : schema_order) {
        const CsvTable& t = merged.at(schema);
        std::string fname = schema;
        for (char& c : fname)
            if (c == '.') c = '_';
        std::string csv_path = out_dir + "/" + fname + ".csv";
        t.save(csv_path);
        manifest.add_output(csv_path);

        md << "## " << schema << "\n\n|";
        for (const auto& h : t.header) md << " " << h << " |";
        md << "\n|";
        for (size_t i = 0; i < t.header.size(); ++i) md << "---|";
        md << "\n";
        for (const auto& row : t.rows) {
            md << "|";
            for (const auto& cell : row) md << " " << cell << " |";
            md << "\n";
        }
        md << "\n";
    }
    for (const auto& [metric, series] : curve_plots) {
        std::string plot_path = out_dir + "/report_" + metric + ".png";
        line_plot(plot_path, metric + " vs step", series);
        manifest.add_output(plot_path);
        md << "![" << metric << "](report_" << metric << ".png)\n";
    }

    std::ofstream rf(out_dir + "/report.md", std::ios::binary);
    if (!rf) throw io_error("cannot write " + out_dir + "/report.md");
    rf << md.str();
    rf.close();
    manifest.add_output(out_dir + "/report.md");
    manifest.save(out_dir + "/manifest.json");
    if (!skipped.empty())
        for (const auto& s : skipped)
            std::cerr << "report: skipped " << s << " (missing manifest.json)\n";
    return 0;
}

} // namespace fieldscout
