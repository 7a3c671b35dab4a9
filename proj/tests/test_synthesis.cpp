#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hgo/errors.hpp"
#include "hgo/model.hpp"
#include "hgo/rng.hpp"
#include "hgo/synthesis.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

using namespace hgo;

namespace {

SynthesisConfig small_cfg() {
    SynthesisConfig cfg;
    cfg.R = 3.0;
    cfg.L = 2.0;
    cfg.lambda = 0.35;
    cfg.t0 = 0.0;
    cfg.horizon = 6.0;
    cfg.h_grid = 0.1;
    cfg.xi = 5.0;
    cfg.seed = 11;
    cfg.phi_tuples = 600;
    cfg.fresh_samples = 20000;
    return cfg;
}

// cached small-scale synthesis shared across test cases
const ObserverGainSchedule& small_schedule() {
    static ObserverGainSchedule sched = [] {
        auto ex = make_example();
        return synthesize(ex.sys, ex.beta, small_cfg());
    }();
    return sched;
}

std::string file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("theta ramp endpoints and midpoint") {
    double t0 = 1.5, tau = 0.8;
    auto th = theta_ramp(t0, tau);
    CHECK(th.eval(t0) == 0.0);
    CHECK(th.deriv(t0) == 0.0);
    CHECK(th.eval(t0 + tau / 2.0) == 1.0);
    CHECK(th.deriv(t0 + tau / 2.0) == 0.0);
    CHECK(th.eval(t0 + tau / 4.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(th.eval(t0 + 10.0) == 1.0); // flat continuation
    for (double u = 0.0; u <= 1.0; u += 0.01) {
        double v = th.eval(t0 + u * tau);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("border completion with a vanishing coupling is the midpoint value") {
    const double L = 2.0;
    std::vector<double> grid = uniform_grid(0.0, 1.0, 0.1);
    MatrixSchedule low;
    low.k = 1;
    low.t = grid;
    Mat lm(1, 1);
    lm(0, 0) = L;
    low.v.assign(grid.size(), lm);
    low.s.assign(grid.size(), Mat(1, 1));
    ScalarSchedule pR = ScalarSchedule::constant(0.0, 1.0, 0.0);
    auto pR1 = p_r1_completion(low, pR, L, grid, 1.1);
    for (double v : pR1.v) CHECK(v == doctest::Approx(0.5 * (1.0 + L)).epsilon(1e-14));
}

TEST_CASE("border completion keeps random bordered matrices above identity") {
    Rng rng(71);
    const double L = 3.0;
    std::vector<double> grid = uniform_grid(0.0, 2.0, 2.0 / 199.0);
    MatrixSchedule low;
    low.k = 2;
    low.t = grid;
    std::vector<double> pv(grid.size()), ps(grid.size(), 0.0);
    for (size_t idx = 0; idx < grid.size(); ++idx) {
        // random symmetric matrix strictly above the identity
        double a = rng.uniform(0.2, 1.4), b = rng.uniform(0.2, 1.4), c = rng.uniform(-0.5, 0.5);
        Mat m(2, 2);
        m(0, 0) = 1.05 + a * a + c * c;
        m(1, 1) = 1.05 + b * b + c * c;
        m(0, 1) = m(1, 0) = c * (a + b);
        low.v.push_back(m);
        low.s.push_back(Mat(2, 2));
        pv[idx] = idx == 0 ? 0.0 : rng.uniform(-4.0, 4.0);
    }
    ScalarSchedule pR = ScalarSchedule::from_nodes(std::vector<double>(grid), std::move(pv), std::move(ps));
    auto pR1 = p_r1_completion(low, pR, L, grid, 1.1);
    for (size_t idx = 0; idx < grid.size(); ++idx) {
        Mat b(3, 3);
        b(0, 0) = pR1.v[idx];
        b(0, 1) = b(1, 0) = pR.v[idx];
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) b(r + 1, c + 1) = low.v[idx](r, c);
        auto ev = sym_eigenvalues(b);
        CHECK(ev.front() >= 1.0 - 1e-9);
    }
    // block-diagonal start: norm at t0 bounded by L
    Mat b0(3, 3);
    b0(0, 0) = pR1.v[0];
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) b0(r + 1, c + 1) = low.v[0](r, c);
    CHECK(sym_norm(b0) <= L * (1.0 + 1e-12));
}

TEST_CASE("border completion rejects a lower block touching the identity") {
    std::vector<double> grid = {0.0, 1.0};
    MatrixSchedule low;
    low.k = 1;
    low.t = grid;
    Mat lm(1, 1);
    lm(0, 0) = 1.0; // not strictly above the identity
    low.v.assign(2, lm);
    low.s.assign(2, Mat(1, 1));
    ScalarSchedule pR = ScalarSchedule::constant(0.0, 1.0, -1.0);
    CHECK_THROWS_AS(p_r1_completion(low, pR, 2.0, grid, 1.1), SynthesisError);
}

TEST_CASE("base case produces the printed ramp shape") {
    auto ex = make_example();
    auto cfg = small_cfg();
    GainDecay g = make_gain_decay(cfg.t0, cfg.lambda);
    auto grid = uniform_grid(cfg.t0, cfg.t0 + cfg.horizon, cfg.h_grid);
    auto env = make_envelopes(ex.sys, ex.beta, cfg.envelope_config(), grid);
    auto cert = base_case(ex.sys, cfg, env, g, nullptr);

    CHECK(cert.level == 2);
    CHECK(cert.tau > 0.0);
    CHECK(cert.tau <= 1.0);
    CHECK(cert.pR.eval(cfg.t0) == 0.0);
    for (double v : cert.pR.v) CHECK(v <= 0.0);
    for (size_t i = 0; i < cert.d.t.size(); ++i) {
        if (cert.d.t[i] >= cfg.t0 + cert.tau) CHECK(cert.d.v[i] == 2.0); // n
        CHECK(cert.dbar.v[i] == doctest::Approx(cert.d.v[i] - 0.5));
    }
    CHECK(cert.d.eval(cfg.t0) == doctest::Approx(-cert.M));
    // P starts block-diagonal with norm exactly L
    Mat P0 = cert.P.eval(cfg.t0);
    CHECK(P0(0, 1) == 0.0);
    CHECK(P0(1, 1) == cfg.L);
    CHECK(sym_norm(P0) <= cfg.L * (1 + 1e-12));
}

TEST_CASE("small synthesis passes every certificate") {
    auto ex = make_example();
    const auto& sched = small_schedule();
    CHECK(sched.n == 2);
    CHECK(sched.phi.positive);
    for (double v : sched.phi.v) CHECK(v > 0.0);

    auto checks = run_all_checks(sched, ex.sys, ex.beta, 20000, 424242);
    for (const auto& c : checks) {
        INFO(c.name, ": ", c.note);
        CHECK(c.pass());
    }
    // A2 quantities
    for (size_t i = 0; i < sched.d.t.size(); ++i)
        if (sched.d.t[i] >= sched.t0bar + 1.0) CHECK(sched.d.v[i] > 1.0);
    for (size_t i = 0; i < sched.P.t.size(); ++i)
        CHECK(sym_psd(sched.P.v[i] - Mat::identity(2), 1e-9));
}

TEST_CASE("synthesize rejects non-normalized systems and bad configs") {
    auto dec = make_chain3_decreasing();
    auto cfg = small_cfg();
    CHECK_THROWS_AS(synthesize(dec.sys, dec.beta, cfg), UsageError);
    auto ex = make_example();
    SynthesisConfig bad = cfg;
    bad.L = 1.0;
    CHECK_THROWS_AS(synthesize(ex.sys, ex.beta, bad), UsageError);
    bad = cfg;
    bad.xi = 0.5;
    CHECK_THROWS_AS(synthesize(ex.sys, ex.beta, bad), UsageError);
}

TEST_CASE("schedule files round-trip bit-exactly") {
    const auto& sched = small_schedule();
    save_schedule(sched, "roundtrip_a.txt");
    auto loaded = load_schedule("roundtrip_a.txt");
    save_schedule(loaded, "roundtrip_b.txt");
    CHECK(file_bytes("roundtrip_a.txt") == file_bytes("roundtrip_b.txt"));
    CHECK(loaded.n == sched.n);
    CHECK(loaded.xi == sched.xi);
    CHECK(loaded.P.t == sched.P.t);
    CHECK(loaded.minorants.size() == sched.minorants.size());
}

TEST_CASE("verification detects tampered schedules") {
    ObserverGainSchedule lowered = small_schedule();
    for (auto& v : lowered.d.v) v -= 2.0;
    CHECK(!check_d_bounds(lowered).pass());

    ObserverGainSchedule squashed = small_schedule();
    for (auto& m : squashed.P.v)
        for (auto& x : m.a) x *= 0.5;
    CHECK(!check_P_bounds(squashed).pass());

    // and the untampered one is fine
    CHECK(check_d_bounds(small_schedule()).pass());
    CHECK(check_P_bounds(small_schedule()).pass());
}

TEST_CASE("identical configs give bit-identical synthesis output") {
    auto ex = make_example();
    auto cfg = small_cfg();
    cfg.horizon = 4.0;
    cfg.phi_tuples = 300;
    cfg.fresh_samples = 5000;
    auto a = synthesize(ex.sys, ex.beta, cfg);
    auto b = synthesize(ex.sys, ex.beta, cfg);
    save_schedule(a, "det_a.txt");
    save_schedule(b, "det_b.txt");
    CHECK(file_bytes("det_a.txt") == file_bytes("det_b.txt"));
}

TEST_CASE("raising budgets keeps a passing synthesis passing and the gain dominant") {
    auto ex = make_example();
    auto cfg = small_cfg();
    cfg.horizon = 4.0;
    cfg.phi_tuples = 300;
    cfg.fresh_samples = 5000;
    auto lo = synthesize(ex.sys, ex.beta, cfg);
    SynthesisConfig cfg2 = cfg;
    cfg2.phi_tuples = 600;
    auto hi = synthesize(ex.sys, ex.beta, cfg2); // would throw if a check flipped
    // sampling streams extend, so the estimated supremum cannot shrink
    for (size_t i = 0; i < lo.phi.v.size(); ++i) CHECK(hi.phi.v[i] >= lo.phi.v[i] * (1.0 - 1e-12));

    SynthesisConfig cfg3 = cfg;
    cfg3.phi_safety = 1.6;
    auto safer = synthesize(ex.sys, ex.beta, cfg3);
    for (size_t i = 0; i < lo.phi.v.size(); ++i) CHECK(safer.phi.v[i] >= lo.phi.v[i]);
}

TEST_CASE("full-level synthesis for the three-state chain") {
    auto ch = make_chain3();
    SynthesisConfig cfg;
    cfg.R = 2.0;
    cfg.L = 2.0;
    cfg.lambda = 0.3;
    cfg.horizon = 8.0;
    cfg.h_grid = 0.1;
    cfg.xi = 1.5;
    cfg.seed = 3;
    cfg.phi_tuples = 700;
    cfg.fresh_samples = 15000;
    // full resolution for the reduced (t, r) inequality grid
    cfg.tr_grid_t = 200;
    cfg.tr_grid_r = 50;
    auto sched = synthesize(ch.sys, ch.beta, cfg);
    CHECK(sched.n == 3);
    // top-level decay settles at dbar_2 - 1/4 = n - 3/4
    CHECK(sched.d.eval(cfg.t0 + cfg.horizon) == doctest::Approx(3.0 - 0.75).epsilon(1e-9));
    auto checks = run_all_checks(sched, ch.sys, ch.beta, 15000, 777);
    for (const auto& c : checks) {
        INFO(c.name, ": ", c.note);
        CHECK(c.pass());
    }
}
