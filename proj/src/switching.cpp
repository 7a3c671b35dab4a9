#include "hgo/switching.hpp"

#include "hgo/errors.hpp"
#include "hgo/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace hgo {

namespace {

double snap_up(double t0, double t, double h) {
    long k = std::lround(std::ceil((t - t0) / h - 1e-9));
    return t0 + static_cast<double>(k) * h;
}

} // namespace

SwitchTimetable compute_switching_times(const GrowthEnvelope& beta, int n, double t0,
                                        const SwitchingPolicy& policy) {
    if (!(policy.rho > 0.0)) throw UsageError("plan_switching: rho must be > 0");
    if (!(policy.c_eff > 0.0)) throw UsageError("plan_switching: c_eff must be > 0");
    const double L = policy.base.L;
    auto xi_for = [&](int k, double t_start) {
        return std::max(1.0, admissible_xi(beta, t_start, static_cast<double>(k) * policy.rho, L, n));
    };

    SwitchTimetable tt;
    tt.times.push_back(t0); // t_1 = t0

    // switch times: Delta_k sized from the next window's threshold so the
    // exponential envelope term is below 1/(k+1) when publication starts
    while (tt.times.back() < t0 + policy.horizon) {
        int k = static_cast<int>(tt.times.size()); // creating t_{k+1}
        double t_k = tt.times.back();
        double xi_next = xi_for(k + 1, t_k); // window k+1 integrates from t_k
        double delta = 1.0 + (std::log1p(xi_next) + std::log(static_cast<double>(k + 1))) / policy.c_eff;
        double t_next = snap_up(t0, t_k + delta, policy.step);
        tt.times.push_back(t_next);
        if (tt.times.size() > 64) throw SynthesisError("plan_switching", "window count runaway");
    }
    for (size_t w = 0; w + 1 < tt.times.size(); ++w) {
        int k = static_cast<int>(w + 1);
        double t_start = (w == 0) ? tt.times[0] : tt.times[w - 1];
        tt.radii.push_back(static_cast<double>(k) * policy.rho);
        tt.xis.push_back(xi_for(k, t_start));
    }
    return tt;
}

SwitchingPlan plan_switching(const TriangularSystem& sys, const GrowthEnvelope& beta, double t0,
                             const SwitchingPolicy& policy) {
    const int n = sys.n;
    const double L = policy.base.L;
    SwitchTimetable tt = compute_switching_times(beta, n, t0, policy);

    SwitchingPlan plan;
    plan.t0 = t0;
    plan.horizon = policy.horizon;
    plan.policy = policy;
    plan.times = tt.times;

    const size_t n_windows = plan.times.size() - 1;
    for (size_t w = 0; w < n_windows; ++w) {
        WindowPlan win;
        win.k = static_cast<int>(w + 1);
        win.t_start = (w == 0) ? plan.times[0] : plan.times[w - 1];
        win.t_pub = plan.times[w];
        win.t_end = plan.times[w + 1];
        win.R = tt.radii[w];
        win.xi = tt.xis[w];

        double need = admissible_xi(beta, win.t_start, win.R, L, n);
        if (win.xi + 1e-9 < need)
            throw SynthesisError("plan_switching",
                                 "threshold inadmissible for window " + std::to_string(win.k));

        SynthesisConfig cfg = policy.base;
        cfg.R = win.R;
        cfg.xi = win.xi;
        cfg.t0 = win.t_start;
        cfg.horizon = win.t_end - win.t_start;
        cfg.seed = Rng::derive(policy.base.seed, 0x517cULL + static_cast<std::uint64_t>(win.k));
        try {
            win.schedule = synthesize(sys, beta, cfg);
        } catch (const SynthesisError& err) {
            throw SynthesisError("plan_switching",
                                 "window " + std::to_string(win.k) + " synthesis failed: " + err.what());
        }
        plan.windows.push_back(std::move(win));
    }
    return plan;
}

std::string SwitchingPlan::manifest_json() const {
    nlohmann::ordered_json j;
    j["t0"] = t0;
    j["horizon"] = horizon;
    j["policy"] = {{"rho", policy.rho},
                   {"c_eff", policy.c_eff},
                   {"step", policy.step},
                   {"L", policy.base.L},
                   {"lambda", policy.base.lambda}};
    j["times"] = times;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& w : windows) {
        arr.push_back({{"k", w.k},
                       {"t_start", w.t_start},
                       {"t_pub", w.t_pub},
                       {"t_end", w.t_end},
                       {"R", w.R},
                       {"xi", w.xi},
                       {"schedule", "window_" + std::to_string(w.k) + ".schedule"}});
    }
    j["windows"] = arr;
    return j.dump(2);
}

SwitchingRun run_switching(const TriangularSystem& sys, std::span<const double> x0_hidden,
                           const SwitchingPlan& plan) {
    const double h = plan.policy.step;
    const double t0 = plan.t0;
    const double t_end = t0 + plan.horizon;

    SwitchingRun run;
    run.x = integrate_plant(sys, t0, x0_hidden, std::max(t_end, plan.times.back()), h);
    YSource ys = YSource::from_trace(run.x, sys);

    std::vector<double> z0(static_cast<size_t>(sys.n), 0.0);
    for (const auto& win : plan.windows) {
        double stop = std::min(win.t_end, run.x.t.back());
        try {
            run.window_z.push_back(
                run_observer(win.schedule, ys, sys, win.t_start, stop, h, z0));
            run.window_ok.push_back(true);
        } catch (const DivergenceError&) {
            run.window_z.push_back(Trace{});
            run.window_ok.push_back(false);
        }
    }

    // assemble Z on the global grid: window k owns [t_k, t_{k+1})
    Trace& Z = run.Z;
    Z.t0 = t0;
    Z.h = h;
    size_t nodes = 0;
    while (t0 + static_cast<double>(nodes) * h <= t_end + 1e-12) nodes++;
    for (size_t i = 0; i < nodes; ++i) {
        double t = t0 + static_cast<double>(i) * h;
        int w = 0;
        for (size_t k = 0; k < plan.windows.size(); ++k) {
            if (t >= plan.windows[k].t_pub - 1e-12 &&
                (k + 1 == plan.windows.size() || t < plan.windows[k + 1].t_pub - 1e-12))
                w = static_cast<int>(k);
        }
        const auto& tr = run.window_z[static_cast<size_t>(w)];
        std::vector<double> zt(static_cast<size_t>(sys.n), 0.0);
        if (run.window_ok[static_cast<size_t>(w)] && !tr.t.empty()) {
            long idx = std::lround((t - tr.t0) / h);
            idx = std::clamp<long>(idx, 0, static_cast<long>(tr.size()) - 1);
            zt = tr.state[static_cast<size_t>(idx)];
        }
        double err = 0.0;
        for (int c = 0; c < sys.n; ++c) {
            long xi_idx = std::lround((t - run.x.t0) / h);
            double d = run.x.state[static_cast<size_t>(xi_idx)][static_cast<size_t>(c)] -
                       zt[static_cast<size_t>(c)];
            err += d * d;
        }
        Z.t.push_back(t);
        Z.state.push_back(zt);
        Z.y.push_back(ys(t));
        Z.abs_e.push_back(std::sqrt(err));
        const auto& win = plan.windows[static_cast<size_t>(w)];
        double bexp = 0.0, bg = 0.0;
        if (t >= win.t_start + 1.0) {
            bexp = win.xi * std::exp(-plan.policy.c_eff * (t - (win.t_start + 1.0)));
            bg = std::sqrt(win.schedule.gain.g(t));
        }
        Z.bound_exp.push_back(bexp);
        Z.bound_g.push_back(bg);
        Z.window.push_back(win.k);
    }
    return run;
}

EnvelopeReport check_window_envelope(const SwitchingRun& run, const SwitchingPlan& plan, int k,
                                     double rate) {
    if (k < 1 || k > static_cast<int>(plan.windows.size()))
        throw UsageError("check_window_envelope: bad window index");
    const auto& win = plan.windows[static_cast<size_t>(k - 1)];
    const auto& ztr = run.window_z[static_cast<size_t>(k - 1)];
    if (!run.window_ok[static_cast<size_t>(k - 1)]) {
        EnvelopeReport rep;
        rep.violations_13a = 1;
        return rep;
    }
    // align the hidden trace with the window trace
    Trace xs;
    xs.t0 = ztr.t0;
    xs.h = ztr.h;
    for (size_t i = 0; i < ztr.size(); ++i) {
        long idx = std::lround((ztr.t[i] - run.x.t0) / run.x.h);
        xs.t.push_back(ztr.t[i]);
        xs.state.push_back(run.x.state[static_cast<size_t>(idx)]);
        xs.y.push_back(run.x.y[static_cast<size_t>(idx)]);
    }
    return check_error_envelope(xs, ztr, win.schedule, rate);
}

} // namespace hgo
