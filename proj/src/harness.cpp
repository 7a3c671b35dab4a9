#include "hgo/harness.hpp"

#include "hgo/errors.hpp"
#include "hgo/rng.hpp"
#include "hgo/runtime.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace hgo {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw UsageError("config: unknown key '" + it.key() + "' in " + ctx);
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw UsageError(std::string("config: parse error: ") + e.what());
    }
    check_keys(j,
               {"system", "mode", "seed", "t0", "horizon", "grid_dt", "step", "R", "L", "lambda",
                "xi", "x0", "policy", "budgets", "safety", "out", "schedule"},
               "top level");
    ExperimentConfig c;
    read_if(j, "system", c.system);
    read_if(j, "mode", c.mode);
    read_if(j, "seed", c.seed);
    read_if(j, "t0", c.t0);
    read_if(j, "horizon", c.horizon);
    read_if(j, "grid_dt", c.grid_dt);
    read_if(j, "step", c.step);
    read_if(j, "R", c.R);
    read_if(j, "L", c.L);
    read_if(j, "lambda", c.lambda);
    read_if(j, "out", c.out);
    read_if(j, "schedule", c.schedule_path);
    if (j.contains("xi")) {
        if (j.at("xi").is_string()) {
            if (j.at("xi").get<std::string>() != "auto")
                throw UsageError("config: xi must be a number or \"auto\"");
            c.xi = 0.0;
        } else {
            c.xi = j.at("xi").get<double>();
        }
    }
    if (j.contains("x0")) c.x0 = j.at("x0").get<std::vector<double>>();
    if (j.contains("policy")) {
        const auto& p = j.at("policy");
        check_keys(p, {"rho", "c_eff"}, "policy");
        read_if(p, "rho", c.rho);
        read_if(p, "c_eff", c.c_eff);
    }
    if (j.contains("budgets")) {
        const auto& b = j.at("budgets");
        check_keys(b, {"phi_tuples", "fresh", "starts", "monotone_samples"}, "budgets");
        read_if(b, "phi_tuples", c.phi_tuples);
        read_if(b, "fresh", c.fresh);
        read_if(b, "starts", c.starts);
        read_if(b, "monotone_samples", c.monotone_samples);
    }
    if (j.contains("safety")) {
        const auto& s = j.at("safety");
        check_keys(s,
                   {"majorant", "minorant", "min", "schur", "phi", "phi_min", "phi_cap",
                    "final_margin"},
                   "safety");
        read_if(s, "majorant", c.majorant_safety);
        read_if(s, "minorant", c.minorant_safety);
        read_if(s, "min", c.min_safety);
        read_if(s, "schur", c.schur_margin);
        read_if(s, "phi", c.phi_safety);
        read_if(s, "phi_min", c.phi_min);
        read_if(s, "phi_cap", c.phi_cap);
        read_if(s, "final_margin", c.final_margin);
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return from_json_text(ss.str());
}

void ExperimentConfig::validate() const {
    static const std::set<std::string> modes = {"simulate", "synthesize", "observe",
                                                "switching", "verify", "example"};
    if (!modes.count(mode)) throw UsageError("config: unknown mode '" + mode + "'");
    if (!(L > 1.0)) throw UsageError("config: L must be > 1");
    if (!(lambda > 0.0 && lambda <= 1.0)) throw UsageError("config: lambda must be in (0, 1]");
    if (!(step > 0.0)) throw UsageError("config: step must be > 0");
    if (!(horizon > 0.0)) throw UsageError("config: horizon must be > 0");
    if (!(R > 0.0)) throw UsageError("config: R must be > 0");
    if (xi < 0.0) throw UsageError("config: xi must be >= 0");
}

SynthesisConfig ExperimentConfig::synthesis_config(const GrowthEnvelope& beta, int n) const {
    SynthesisConfig sc;
    sc.R = R;
    sc.L = L;
    sc.t0 = t0;
    sc.horizon = horizon;
    sc.h_grid = grid_dt;
    sc.lambda = lambda;
    sc.xi = xi > 0.0 ? xi : admissible_xi(beta, t0, R, L, n);
    sc.majorant_safety = majorant_safety;
    sc.minorant_safety = minorant_safety;
    sc.min_safety = min_safety;
    sc.schur_margin = schur_margin;
    sc.phi_safety = phi_safety;
    sc.phi_min = phi_min;
    sc.phi_cap = phi_cap;
    sc.final_margin = final_margin;
    sc.budget.starts = starts;
    sc.phi_tuples = phi_tuples;
    sc.fresh_samples = fresh;
    sc.seed = seed;
    return sc;
}

SwitchingPolicy ExperimentConfig::switching_policy(const GrowthEnvelope& beta, int n) const {
    SwitchingPolicy pol;
    pol.rho = rho;
    pol.c_eff = c_eff;
    pol.horizon = horizon;
    pol.step = step;
    pol.base = synthesis_config(beta, n);
    return pol;
}

ExperimentConfig example_config() {
    ExperimentConfig c;
    c.system = "example2d";
    c.mode = "switching";
    c.seed = 1;
    c.horizon = 60.0;
    c.lambda = 0.2;
    c.x0 = {2.0, -1.0};
    c.rho = 1.0;
    c.out = "out/example2d-switching";
    return c;
}

namespace {

struct SummaryWriter {
    std::ostringstream lines;
    bool all_pass = true;

    void add(const std::string& name, bool pass, const std::string& detail) {
        lines << (pass ? "[PASS] " : "[FAIL] ") << name;
        if (!detail.empty()) lines << ": " << detail;
        lines << "\n";
        if (!pass) all_pass = false;
        std::cout << (pass ? "[PASS] " : "[FAIL] ") << name
                  << (detail.empty() ? "" : ": " + detail) << "\n";
    }

    void add_check(const CheckResult& c) {
        std::ostringstream d;
        d << c.samples << " samples, " << c.violations << " violations";
        if (c.samples > 0) d << ", worst margin " << c.worst_margin << " at t=" << c.worst_t;
        add(c.name, c.pass(), d.str());
    }

    void write(const std::string& path) {
        std::ofstream os(path);
        os << lines.str();
    }
};

std::vector<double> default_x0(const TriangularSystem& sys, const std::vector<double>& cfg_x0) {
    if (!cfg_x0.empty()) {
        if (static_cast<int>(cfg_x0.size()) != sys.n)
            throw UsageError("config: x0 dimension mismatch");
        return cfg_x0;
    }
    return std::vector<double>(static_cast<size_t>(sys.n), 1.0);
}

int finish(SummaryWriter& sw, const std::string& outdir) {
    sw.write(outdir + "/summary.txt");
    return sw.all_pass ? 0 : 1;
}

} // namespace

ViolationReport verify_schedule(const std::string& schedule_file, const ExperimentConfig& cfg) {
    auto sched = load_schedule(schedule_file);
    SystemWithEnvelope sys;
    try {
        sys = find_system(sched.system.empty() ? cfg.system : sched.system);
    } catch (const UsageError&) {
        sys = find_system(cfg.system);
    }
    auto norm = normalize_increasing(sys.sys);
    ViolationReport rep;
    rep.checks = run_all_checks(sched, norm.sys, sys.beta, cfg.fresh, Rng::derive(cfg.seed, 0x77ULL));
    return rep;
}

int run_experiment(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    if (cfg.mode == "example") {
        ExperimentConfig ex = example_config();
        ex.out = cfg.out.empty() ? ex.out : cfg.out;
        ex.seed = cfg.seed;
        cfg = ex;
    }
    std::filesystem::create_directories(cfg.out);
    SummaryWriter sw;

    auto sysenv = find_system(cfg.system);
    auto norm = normalize_increasing(sysenv.sys);
    const TriangularSystem& sys = norm.sys;
    const GrowthEnvelope& beta = sysenv.beta;

    if (cfg.mode == "simulate") {
        auto x0 = default_x0(sysenv.sys, cfg.x0);
        Trace tr = integrate_plant(sysenv.sys, cfg.t0, x0, cfg.t0 + cfg.horizon, cfg.step);
        write_trace_csv(tr, cfg.out + "/plant.csv", false);
        sw.add("simulate", true, "plant trace written (" + std::to_string(tr.size()) + " nodes)");
        return finish(sw, cfg.out);
    }

    if (cfg.mode == "verify") {
        if (cfg.schedule_path.empty()) throw UsageError("config: verify mode needs a schedule path");
        auto rep = verify_schedule(cfg.schedule_path, cfg);
        for (const auto& c : rep.checks) sw.add_check(c);
        return finish(sw, cfg.out);
    }

    if (cfg.mode == "synthesize" || cfg.mode == "observe") {
        ObserverGainSchedule sched;
        if (!cfg.schedule_path.empty()) {
            sched = load_schedule(cfg.schedule_path);
        } else {
            SynthesisConfig sc = cfg.synthesis_config(beta, sys.n);
            sched = synthesize(sys, beta, sc);
            sched.system = cfg.system; // registry name, not the normalized alias
            save_schedule(sched, cfg.out + "/schedule.txt");
        }
        auto checks = run_all_checks(sched, sys, beta, cfg.fresh, Rng::derive(cfg.seed, 0x99ULL));
        for (const auto& c : checks) sw.add_check(c);

        if (cfg.mode == "observe") {
            auto x0 = default_x0(sysenv.sys, cfg.x0);
            Trace xt = integrate_plant(sysenv.sys, cfg.t0, x0, cfg.t0 + cfg.horizon, cfg.step);
            write_trace_csv(xt, cfg.out + "/plant.csv", false);
            YSource ys = YSource::from_trace(xt, sysenv.sys);
            std::vector<double> z0(static_cast<size_t>(sys.n), 0.0);
            Trace zt = run_observer(sched, ys, sys, cfg.t0, cfg.t0 + cfg.horizon, cfg.step, z0);
            auto rep = check_error_envelope(xt, zt, sched);
            for (size_t i = 0; i < zt.size(); ++i) {
                double err = 0.0;
                for (int c = 0; c < sys.n; ++c) {
                    double d = xt.state[i][static_cast<size_t>(c)] - zt.state[i][static_cast<size_t>(c)];
                    err += d * d;
                }
                zt.abs_e.push_back(std::sqrt(err));
                double t = zt.t[i];
                zt.bound_exp.push_back(t >= cfg.t0 + 1.0
                                           ? sched.xi * std::exp(-0.5 * (t - (cfg.t0 + 1.0)))
                                           : sched.xi);
                zt.bound_g.push_back(std::sqrt(sched.gain.g(t)));
                zt.window.push_back(0);
            }
            write_trace_csv(zt, cfg.out + "/observer.csv", true);
            std::ostringstream d;
            d << rep.nodes_checked << " nodes, max |e|/bound " << rep.max_ratio;
            sw.add("error envelope", rep.pass(), d.str());
            double final_err = zt.abs_e.back();
            sw.add("final error", final_err <= 1e-2,
                   "|e(T)| = " + std::to_string(final_err));
        }
        return finish(sw, cfg.out);
    }

    if (cfg.mode == "switching") {
        SwitchingPolicy pol = cfg.switching_policy(beta, sys.n);
        SwitchingPlan plan = plan_switching(sys, beta, cfg.t0, pol);
        {
            std::ofstream os(cfg.out + "/plan.json");
            os << plan.manifest_json() << "\n";
        }
        for (const auto& w : plan.windows)
            save_schedule(w.schedule, cfg.out + "/window_" + std::to_string(w.k) + ".schedule");
        sw.add("plan", true, std::to_string(plan.windows.size()) + " windows");

        auto x0 = default_x0(sysenv.sys, cfg.x0);
        SwitchingRun run = run_switching(sysenv.sys, x0, plan);
        write_trace_csv(run.x, cfg.out + "/plant.csv", false);
        write_trace_csv(run.Z, cfg.out + "/z.csv", true);

        double x0n = norm2(x0);
        for (int k = 1; k <= static_cast<int>(plan.windows.size()); ++k) {
            const auto& w = plan.windows[static_cast<size_t>(k - 1)];
            if (w.R < x0n) continue;
            auto rep = check_window_envelope(run, plan, k, pol.c_eff);
            std::ostringstream d;
            d << "R=" << w.R << ", max |e|/bound " << rep.max_ratio;
            sw.add("window " + std::to_string(k) + " envelope", rep.pass(), d.str());
        }
        // convergence of the published estimate over the final quarter
        double worst = 0.0;
        for (size_t i = 0; i < run.Z.size(); ++i)
            if (run.Z.t[i] >= cfg.t0 + 0.75 * cfg.horizon) worst = std::max(worst, run.Z.abs_e[i]);
        sw.add("switching convergence", worst <= 1e-2,
               "max |x - Z| over final quarter = " + std::to_string(worst));
        return finish(sw, cfg.out);
    }

    throw UsageError("config: unhandled mode " + cfg.mode);
}

} // namespace hgo
