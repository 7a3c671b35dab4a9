#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hgo/errors.hpp"
#include "hgo/model.hpp"
#include "hgo/runtime.hpp"
#include "hgo/synthesis.hpp"

#include <cmath>
#include <filesystem>

using namespace hgo;

namespace {

const ObserverGainSchedule& obs_schedule() {
    static ObserverGainSchedule sched = [] {
        auto ex = make_example();
        SynthesisConfig cfg;
        cfg.R = 3.0;
        cfg.L = 2.0;
        cfg.lambda = 0.35;
        cfg.horizon = 8.0;
        cfg.h_grid = 0.1;
        cfg.xi = admissible_xi(ex.beta, 0.0, cfg.R, cfg.L, ex.sys.n);
        cfg.seed = 21;
        cfg.phi_tuples = 800;
        cfg.fresh_samples = 20000;
        return synthesize(ex.sys, ex.beta, cfg);
    }();
    return sched;
}

} // namespace

TEST_CASE("plant integration holds the origin fixed") {
    auto ex = make_example();
    std::vector<double> x0 = {0.0, 0.0};
    auto tr = integrate_plant(ex.sys, 0.0, x0, 5.0, 1e-3);
    for (const auto& x : tr.state) {
        CHECK(std::abs(x[0]) <= 1e-12);
        CHECK(std::abs(x[1]) <= 1e-12);
    }
}

TEST_CASE("plant stays inside the growth envelope") {
    auto ex = make_example();
    std::vector<double> x0 = {1.0, 1.0};
    auto tr = integrate_plant(ex.sys, 0.0, x0, 30.0, 1e-3);
    double cap = std::max(std::sqrt(2.0), 2.0 * std::sqrt(2.0)) + 1e-6;
    for (const auto& x : tr.state) CHECK(std::hypot(x[0], x[1]) <= cap);
}

TEST_CASE("step halving shrinks the endpoint error by about sixteen") {
    auto ex = make_example();
    std::vector<double> x0 = {1.0, 1.0};
    const double T = 5.0;
    auto ref = integrate_plant(ex.sys, 0.0, x0, T, 6.25e-5);
    auto coarse = integrate_plant(ex.sys, 0.0, x0, T, 2e-3);
    auto fine = integrate_plant(ex.sys, 0.0, x0, T, 1e-3);
    auto endpoint_err = [&](const Trace& tr) {
        double e = 0.0;
        for (int c = 0; c < 2; ++c) {
            double d = tr.state.back()[static_cast<size_t>(c)] - ref.state.back()[static_cast<size_t>(c)];
            e += d * d;
        }
        return std::sqrt(e);
    };
    double ratio = endpoint_err(coarse) / endpoint_err(fine);
    CHECK(ratio >= 11.0);
    CHECK(ratio <= 21.0);
}

TEST_CASE("plant integration rejects bad arguments and diverging states") {
    auto ex = make_example();
    std::vector<double> x0 = {1.0, 1.0};
    CHECK_THROWS_AS(integrate_plant(ex.sys, 0.0, x0, 5.0, -1.0), UsageError);
    CHECK_THROWS_AS(integrate_plant(ex.sys, 5.0, x0, 1.0, 1e-3), UsageError);
    std::vector<double> big = {50.0, 0.0}; // outside the basin, blows up in finite time
    TriangularSystem unstable = ex.sys;
    unstable.f[0] = [](double, std::span<const double> x) { return x[0] * x[0] * x[0]; };
    CHECK_THROWS_AS(integrate_plant(unstable, 0.0, big, 5.0, 1e-2), DivergenceError);
}

TEST_CASE("output source interpolates the trace with derivative data") {
    auto ex = make_example();
    std::vector<double> x0 = {1.0, -0.5};
    auto tr = integrate_plant(ex.sys, 0.0, x0, 2.0, 1e-3);
    auto ys = YSource::from_trace(tr, ex.sys);
    for (size_t i = 0; i < tr.size(); i += 37) CHECK(ys(tr.t[i]) == tr.y[i]);
    // against a four-times finer reference at off-node times
    auto fine = integrate_plant(ex.sys, 0.0, x0, 2.0, 2.5e-4);
    for (size_t i = 1; i + 4 < fine.size(); i += 41) {
        double t = fine.t[i];
        CHECK(std::abs(ys(t) - fine.y[i]) <= 1e-10);
    }
}

TEST_CASE("observer started on the plant state stays glued to it") {
    auto ex = make_example();
    const auto& sched = obs_schedule();
    std::vector<double> x0 = {1.0, 1.0};
    auto xt = integrate_plant(ex.sys, 0.0, x0, 8.0, 1e-3);
    auto ys = YSource::from_trace(xt, ex.sys);
    auto zt = run_observer(sched, ys, ex.sys, 0.0, 8.0, 1e-3, x0);
    // The injected gain pins the estimate near the plant state; the residual
    // is the quantization floor of the innovation times the gain, a few 1e-4
    // for this schedule. Far below both the plant scale and the threshold.
    for (size_t i = 0; i < zt.size(); ++i) {
        double e = std::hypot(xt.state[i][0] - zt.state[i][0], xt.state[i][1] - zt.state[i][1]);
        CHECK(e <= 2.5e-3);
    }
}

TEST_CASE("observer from zero initial state satisfies both error envelopes") {
    auto ex = make_example();
    const auto& sched = obs_schedule();
    std::vector<double> x0 = {1.0, 1.0};
    auto xt = integrate_plant(ex.sys, 0.0, x0, 8.0, 1e-3);
    auto ys = YSource::from_trace(xt, ex.sys);
    std::vector<double> z0 = {0.0, 0.0};
    auto zt = run_observer(sched, ys, ex.sys, 0.0, 8.0, 1e-3, z0);
    auto rep = check_error_envelope(xt, zt, sched);
    CHECK(rep.violations_13a == 0);
    CHECK(rep.violations_13b == 0);
    CHECK(rep.max_ratio < 1.0);
    double efinal = std::hypot(xt.state.back()[0] - zt.state.back()[0],
                               xt.state.back()[1] - zt.state.back()[1]);
    CHECK(efinal <= 1e-2);
}

TEST_CASE("observer refuses an output source with a gap") {
    auto ex = make_example();
    const auto& sched = obs_schedule();
    std::vector<double> x0 = {1.0, 1.0};
    auto xt = integrate_plant(ex.sys, 0.0, x0, 1.0, 1e-3); // shorter than the run
    auto ys = YSource::from_trace(xt, ex.sys);
    std::vector<double> z0 = {0.0, 0.0};
    CHECK_THROWS_AS(run_observer(sched, ys, ex.sys, 0.0, 8.0, 1e-3, z0), UsageError);
}

TEST_CASE("observer runs are deterministic") {
    auto ex = make_example();
    const auto& sched = obs_schedule();
    std::vector<double> x0 = {0.4, -1.1};
    auto xt = integrate_plant(ex.sys, 0.0, x0, 3.0, 1e-3);
    auto ys = YSource::from_trace(xt, ex.sys);
    std::vector<double> z0 = {0.0, 0.0};
    auto a = run_observer(sched, ys, ex.sys, 0.0, 3.0, 1e-3, z0);
    auto b = run_observer(sched, ys, ex.sys, 0.0, 3.0, 1e-3, z0);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a.state[i][0] == b.state[i][0]);
        CHECK(a.state[i][1] == b.state[i][1]);
    }
}

TEST_CASE("envelope checker flags constructed violations and misalignment") {
    auto ex = make_example();
    const auto& sched = obs_schedule();
    std::vector<double> x0 = {1.0, 1.0};
    auto xt = integrate_plant(ex.sys, 0.0, x0, 2.0, 1e-3);

    Trace self = xt;
    auto rep = check_error_envelope(xt, self, sched);
    CHECK(rep.pass());
    CHECK(rep.max_ratio == 0.0);

    Trace shifted = xt;
    for (auto& s : shifted.state) s[0] -= 2.0 * sched.xi;
    auto rep2 = check_error_envelope(xt, shifted, sched);
    CHECK(rep2.violations_13a > 0);

    Trace truncated = xt;
    truncated.t.pop_back();
    truncated.state.pop_back();
    CHECK_THROWS_AS(check_error_envelope(xt, truncated, sched), UsageError);
}

TEST_CASE("trace files round-trip through CSV") {
    auto ex = make_example();
    std::vector<double> x0 = {1.0, -0.5};
    auto tr = integrate_plant(ex.sys, 0.0, x0, 0.5, 1e-3);
    write_trace_csv(tr, "plant_roundtrip.csv", false);
    auto back = read_trace_csv("plant_roundtrip.csv");
    REQUIRE(back.size() == tr.size());
    for (size_t i = 0; i < tr.size(); ++i) {
        CHECK(back.t[i] == tr.t[i]);
        CHECK(back.state[i] == tr.state[i]);
    }
    std::filesystem::remove("plant_roundtrip.csv");
}
