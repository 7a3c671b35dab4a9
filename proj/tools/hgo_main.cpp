#include "hgo/errors.hpp"
#include "hgo/harness.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

struct CommonOpts {
    std::string config;
    std::string out;
    std::string schedule;
    std::optional<std::uint64_t> seed;
    std::optional<double> grid_dt, step, horizon;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config, "experiment config (JSON)");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--schedule", o.schedule, "schedule file (verify/observe)");
    cmd->add_option("--seed", o.seed, "seed override");
    cmd->add_option("--grid-dt", o.grid_dt, "schedule grid step override");
    cmd->add_option("--step", o.step, "integration step override");
    cmd->add_option("--horizon", o.horizon, "horizon override");
}

int run(const std::string& mode, const CommonOpts& o) {
    hgo::ExperimentConfig cfg;
    if (!o.config.empty())
        cfg = hgo::ExperimentConfig::from_file(o.config);
    else if (mode == "example")
        cfg = hgo::example_config();
    cfg.mode = mode;
    if (!o.out.empty()) cfg.out = o.out;
    if (!o.schedule.empty()) cfg.schedule_path = o.schedule;
    if (o.seed) cfg.seed = *o.seed;
    if (o.grid_dt) cfg.grid_dt = *o.grid_dt;
    if (o.step) cfg.step = *o.step;
    if (o.horizon) cfg.horizon = *o.horizon;
    cfg.validate();
    return hgo::run_experiment(cfg);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"high-gain observer synthesis and switching estimation for triangular systems"};
    app.require_subcommand(1);

    const char* modes[] = {"simulate", "synthesize", "observe", "switching", "verify", "example"};
    const char* help[] = {"integrate the plant and write its trace",
                          "build and certify an observer gain schedule",
                          "synthesize, then run the observer against a simulated plant",
                          "plan and run the switching estimator",
                          "re-check a saved schedule file",
                          "run the built-in switching reproduction"};
    CommonOpts opts[6];
    CLI::App* cmds[6];
    for (int i = 0; i < 6; ++i) {
        cmds[i] = app.add_subcommand(modes[i], help[i]);
        add_common(cmds[i], opts[i]);
    }

    CLI11_PARSE(app, argc, argv);

    for (int i = 0; i < 6; ++i) {
        if (!cmds[i]->parsed()) continue;
        try {
            return run(modes[i], opts[i]);
        } catch (const hgo::UsageError& e) {
            std::cerr << "usage error: " << e.what() << "\n";
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return 2;
}
