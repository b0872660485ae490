#include <CLI11.hpp>

#include "fieldscout/cli.hpp"

using namespace fieldscout;

int main(int argc, char** argv) {
    CLI::App app{"fieldscout - GP field mapping, discrete representations and "
                 "informative path planning"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    CliOverrides ov;
    uint64_t seed_flag = 0;
    bool det_flag = false;
    std::string methods_flag;
    int trials_flag = 0;
    int starts_flag = 0;
    std::vector<std::string> run_dirs;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "config file (sectioned key=value)");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed_flag, "random seed override");
        sub->add_flag("--deterministic", det_flag,
                      "synthetic stage times; byte-reproducible outputs");
    };

    CLI::App* represent = app.add_subcommand("represent", "representation fidelity study");
    add_common(represent);
    represent->add_option("--methods", methods_flag, "comma-separated partition methods");
    represent->add_option("--trials", trials_flag, "trials per method");

    CLI::App* mission = app.add_subcommand("mission", "budgeted exploration mission");
    add_common(mission);
    mission->add_option("--starts", starts_flag, "number of start poses");

    CLI::App* compare = app.add_subcommand("compare", "feature/score correlation study");
    add_common(compare);
    compare->add_option("runs", run_dirs, "represent run directories")->required();

    CLI::App* report = app.add_subcommand("report", "consolidated report over runs");
    add_common(report);
    report->add_option("runs", run_dirs, "run directories")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        Config cfg = config_path.empty() ? Config{} : Config::parse_file(config_path);
        if (app.count_all() && seed_flag) ov.seed = seed_flag;
        if (det_flag) ov.deterministic = true;
        if (!methods_flag.empty()) ov.methods = methods_flag;
        if (trials_flag > 0) ov.trials = trials_flag;
        if (starts_flag > 0) ov.starts = starts_flag;

        if (represent->parsed()) return cmd_represent(cfg, out_dir, ov);
        if (mission->parsed()) return cmd_mission(cfg, out_dir, ov);
        if (compare->parsed()) return cmd_compare(run_dirs, out_dir, cfg, ov);
        if (report->parsed()) return cmd_report(run_dirs, out_dir, cfg, ov);
        return 2;
    } catch (const usage_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const io_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const validation_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    }
}
