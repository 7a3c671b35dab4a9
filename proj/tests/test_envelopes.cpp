#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hgo/envelopes.hpp"
#include "hgo/errors.hpp"
#include "hgo/model.hpp"
#include "hgo/rng.hpp"

#include <cmath>
#include <limits>

using namespace hgo;

namespace {

EnvelopeConfig small_cfg() {
    EnvelopeConfig cfg;
    cfg.R = 3.0;
    cfg.xi = 2.0;
    cfg.seed = 5;
    return cfg;
}

// Dense-grid oracle for the benchmark minimum of the first difference
// quotient over |y| <= b, |x2| <= b, r <= |e2| <= xi. The quotient is
// written out from the benchmark polynomial directly so the oracle shares
// no code with the library path it checks.
double grid_oracle_dmin(double b, double xi, double r, double res) {
    auto f1 = [](double x1, double x2) {
        return x1 - x1 * x1 * x1 + x1 * x1 * x2 + 1.5 * x1 * x2 * x2 + x2 * x2 * x2;
    };
    double best = std::numeric_limits<double>::infinity();
    for (double y = -b; y <= b + 1e-12; y += res) {
        for (double x2 = -b; x2 <= b + 1e-12; x2 += res) {
            for (double mag = r; mag <= xi + 1e-12; mag += res) {
                for (int sgn = -1; sgn <= 1; sgn += 2) {
                    double e2 = sgn * mag;
                    double q = (f1(y, x2) - f1(y, x2 - e2)) / e2;
                    best = std::min(best, q);
                }
            }
        }
    }
    return best;
}

} // namespace

TEST_CASE("sigma for n = 2 is the single-pair majorant and is constant in time") {
    auto ex = make_example();
    auto cfg = small_cfg();
    auto grid = uniform_grid(0.0, 2.0, 0.25);
    auto sigma = sigma_majorant(ex.sys, ex.beta, cfg, grid);
    sigma.check_flags();
    // constant envelope box means the running maximum never moves
    for (double v : sigma.v) CHECK(v == sigma.v.front());

    // independent coarse-grid estimate of sup |delta_{2,2}|
    double sup = 0.0;
    std::vector<double> xt(1), e(1);
    for (double y = -3; y <= 3; y += 0.05)
        for (double x2 = -3; x2 <= 3; x2 += 0.05)
            for (double e2 = -2; e2 <= 2; e2 += 0.05) {
                xt[0] = x2;
                e[0] = e2;
                sup = std::max(sup, std::abs(delta(ex.sys, 2, 2, 0.0, y, xt, e)));
            }
    CHECK(sigma.v.front() >= sup);                 // dominates the oracle
    CHECK(sigma.v.front() <= 1.1 * sup * 1.05);    // and is not wildly above it
}

TEST_CASE("sigma dominates fresh summed slopes pointwise") {
    auto ex = make_example();
    auto cfg = small_cfg();
    auto grid = uniform_grid(0.0, 2.0, 0.25);
    auto sigma = sigma_majorant(ex.sys, ex.beta, cfg, grid);
    Rng rng(77);
    for (int s = 0; s < 10000; ++s) {
        double t = rng.uniform(0.0, 2.0);
        double b = ex.beta(t, cfg.R);
        double total = 0.0;
        for (int i = 2; i <= ex.sys.n; ++i)
            for (int j = 2; j <= i; ++j) {
                auto x = rng.ball(ex.sys.arity(i) - 1, b);
                auto e = rng.ball(j - 1, cfg.xi);
                total += std::abs(delta(ex.sys, i, j, t, rng.uniform(-b, b), x, e));
            }
        CHECK(total <= sigma.eval(t));
    }
}

TEST_CASE("constrained minimum estimates are positive and r-monotone") {
    auto ex = make_example();
    auto cfg = small_cfg();
    Rng rng(123);
    for (int s = 0; s < 60; ++s) {
        double t = rng.uniform(0.0, 5.0);
        double r1 = rng.uniform(0.05, 1.0);
        double r2 = r1 + rng.uniform(0.05, 1.0 - 1e-3);
        r2 = std::min(r2, cfg.xi);
        double d1 = d_min(ex.sys, ex.beta, cfg, 1, t, r1);
        double d2 = d_min(ex.sys, ex.beta, cfg, 1, t, r2);
        CHECK(d1 > 0.0);
        CHECK(d2 > 0.0);
        CHECK(d1 <= d2 * 1.02);
    }
}

TEST_CASE("benchmark minimum matches the dense-grid oracle and analytic bound") {
    auto ex = make_example();
    auto cfg = small_cfg();
    for (double r : {0.1, 0.5, 1.0}) {
        double oracle = grid_oracle_dmin(3.0, cfg.xi, r, 0.01);
        CHECK(oracle >= 0.95 * (3.0 / 16.0) * r * r);
        double est = d_min_estimate(ex.sys, ex.beta, cfg, 1, 0.0, r);
        CHECK(std::abs(est - oracle) <= 0.05 * oracle);
        // closed-form interior minimum is r^2/4
        CHECK(est == doctest::Approx(0.25 * r * r).epsilon(0.02));
    }
}

TEST_CASE("floor at the outer radius collapses the band to a sphere slice") {
    auto ex = make_example();
    auto cfg = small_cfg();
    double est = d_min_estimate(ex.sys, ex.beta, cfg, 1, 0.0, cfg.xi);
    // only |e2| = xi remains feasible; interior minimum of the quotient is xi^2/4
    CHECK(est == doctest::Approx(0.25 * cfg.xi * cfg.xi).epsilon(0.02));
}

TEST_CASE("d_min signals a monotonicity margin violation") {
    auto ex = make_example();
    TriangularSystem bad = ex.sys;
    bad.f[0] = [](double, std::span<const double> x) { return -x[1]; }; // wrong direction
    auto cfg = small_cfg();
    CHECK_THROWS_AS(d_min(bad, ex.beta, cfg, 1, 0.0, 0.5), SynthesisError);
}

TEST_CASE("d_min validates its arguments") {
    auto ex = make_example();
    auto cfg = small_cfg();
    CHECK_THROWS_AS(d_min(ex.sys, ex.beta, cfg, 1, 0.0, 0.0), UsageError);
    CHECK_THROWS_AS(d_min(ex.sys, ex.beta, cfg, 1, 0.0, 3.0), UsageError);
    CHECK_THROWS_AS(d_min(ex.sys, ex.beta, cfg, 2, 0.0, 0.5), UsageError);
}

TEST_CASE("minorant sits below its samples") {
    SUBCASE("constant samples") {
        std::vector<double> t = {0, 1, 2, 3};
        std::vector<double> v = {2.0, 2.0, 2.0, 2.0};
        auto mu = minorant_mu(t, v);
        for (double x : mu.v) CHECK(x == doctest::Approx(0.95 * 2.0));
    }
    SUBCASE("decreasing samples") {
        std::vector<double> t, v;
        for (int i = 0; i <= 20; ++i) {
            t.push_back(0.5 * i);
            v.push_back(3.0 * std::exp(-0.2 * t.back()));
        }
        auto mu = minorant_mu(t, v);
        mu.check_flags();
        for (size_t i = 0; i < t.size(); ++i) CHECK(mu.v[i] < v[i]);
        for (size_t i = 0; i + 1 < t.size(); ++i) CHECK(mu.v[i + 1] <= mu.v[i] + 1e-12);
    }
    SUBCASE("non-positive sample is rejected") {
        CHECK_THROWS_AS(minorant_mu({0, 1}, {1.0, 0.0}), UsageError);
    }
}

TEST_CASE("minorant fitted to real minimum samples is verified against re-evaluation") {
    auto ex = make_example();
    auto cfg = small_cfg();
    GainDecay g = make_gain_decay(0.0, 0.5);
    std::vector<double> ts, vs;
    for (int i = 0; i <= 16; ++i) {
        double t = 0.5 * i;
        double r = std::sqrt(g.g(t) / 2.0);
        ts.push_back(t);
        vs.push_back(d_min(ex.sys, ex.beta, cfg, 1, t, r));
    }
    auto mu = minorant_mu(ts, vs);
    for (size_t i = 0; i < ts.size(); ++i) {
        double fresh = d_min_estimate(ex.sys, ex.beta, cfg, 1, ts[i], std::sqrt(g.g(ts[i]) / 2.0));
        CHECK(mu.eval(ts[i]) <= fresh);
    }
}

TEST_CASE("identical seeds give bit-identical envelopes") {
    auto ex = make_example();
    auto cfg = small_cfg();
    auto grid = uniform_grid(0.0, 1.0, 0.25);
    auto a = sigma_majorant(ex.sys, ex.beta, cfg, grid);
    auto b = sigma_majorant(ex.sys, ex.beta, cfg, grid);
    CHECK(a.v == b.v);
    CHECK(a.s == b.s);
    CHECK(d_min_estimate(ex.sys, ex.beta, cfg, 1, 0.7, 0.3) ==
          d_min_estimate(ex.sys, ex.beta, cfg, 1, 0.7, 0.3));
}
