#include "hgo/model.hpp"

#include "hgo/errors.hpp"
#include "hgo/rng.hpp"

#include <cmath>
#include <memory>

namespace hgo {

double GainDecay::g(double t) const { return 0.5 * std::exp(-lambda * (t - t0)); }
double GainDecay::gdot(double t) const { return -lambda * g(t); }

GainDecay make_gain_decay(double t0, double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw UsageError("gain decay rate must be in (0, 1]");
    return GainDecay{t0, lambda};
}

double eval_f(const TriangularSystem& sys, int i, double t, std::span<const double> prefix) {
    if (i < 1 || i > sys.n) throw UsageError("eval_f: component index out of range");
    double v = sys.f[static_cast<size_t>(i - 1)](t, prefix);
    if (!std::isfinite(v))
        throw EvalError("non-finite value from f_" + std::to_string(i));
    return v;
}

std::vector<double> eval_rhs(const TriangularSystem& sys, double t, std::span<const double> x) {
    if (static_cast<int>(x.size()) != sys.n) throw UsageError("eval_rhs: state dimension mismatch");
    std::vector<double> dx(static_cast<size_t>(sys.n));
    for (int i = 1; i <= sys.n; ++i)
        dx[static_cast<size_t>(i - 1)] = eval_f(sys, i, t, x.subspan(0, static_cast<size_t>(sys.arity(i))));
    return dx;
}

std::vector<double> eval_rhs_output_form(const TriangularSystem& sys, double t,
                                         std::span<const double> x, double y) {
    std::vector<double> buf(x.begin(), x.end());
    buf[0] = y;
    return eval_rhs(sys, t, buf);
}

SystemWithEnvelope make_example() {
    TriangularSystem sys;
    sys.n = 2;
    sys.name = "example2d";
    sys.f = {
        [](double, std::span<const double> x) {
            double x1 = x[0], x2 = x[1];
            return x1 - x1 * x1 * x1 + x1 * x1 * x2 + 1.5 * x1 * x2 * x2 + x2 * x2 * x2;
        },
        [](double, std::span<const double> x) {
            double x1 = x[0], x2 = x[1];
            return -x1 * x1 * x1 - x1 * x2 * x2 + x2 - x2 * x2 * x2;
        },
    };
    sys.mono = {+1};
    sys.domain_hint = {{-3.0, 3.0}, {-3.0, 3.0}};
    GrowthEnvelope beta{[](double, double s) { return std::max(s, 2.0 * std::sqrt(2.0)); }};
    return {sys, beta};
}

SystemWithEnvelope make_chain3() {
    TriangularSystem sys;
    sys.n = 3;
    sys.name = "chain3";
    sys.f = {
        [](double, std::span<const double> x) { return x[1] + 0.5 * std::sin(x[0]); },
        [](double, std::span<const double> x) {
            return x[2] + 0.25 * x[1] / (1.0 + x[1] * x[1]) + 0.25 * std::sin(x[0]);
        },
        [](double t, std::span<const double> x) {
            return -x[0] - x[1] - x[2] + 0.2 * std::sin(t);
        },
    };
    sys.mono = {+1, +1};
    sys.domain_hint = {{-3.0, 3.0}, {-3.0, 3.0}, {-3.0, 3.0}};
    GrowthEnvelope beta{[](double t, double s) { return 4.0 * (s + 1.0) + 1.5 * t; }};
    return {sys, beta};
}

SystemWithEnvelope make_chain3_decreasing() {
    auto base = make_chain3();
    TriangularSystem sys = base.sys;
    sys.name = "chain3dec";
    sys.f[0] = [](double, std::span<const double> x) { return -x[1] + 0.5 * std::sin(x[0]); };
    // keep the cascade consistent: f_2 sees the flipped coordinate
    sys.f[1] = [](double, std::span<const double> x) {
        return x[2] + 0.25 * (-x[1]) / (1.0 + x[1] * x[1]) + 0.25 * std::sin(x[0]);
    };
    sys.mono = {-1, +1};
    return {sys, base.beta};
}

SystemWithEnvelope find_system(const std::string& name) {
    if (name == "example2d") return make_example();
    if (name == "chain3") return make_chain3();
    if (name == "chain3dec") return make_chain3_decreasing();
    throw UsageError("unknown system: " + name);
}

NormalizedSystem normalize_increasing(const TriangularSystem& sys) {
    std::vector<int> signs(static_cast<size_t>(sys.n), 1);
    for (int i = 1; i < sys.n; ++i)
        signs[static_cast<size_t>(i)] =
            signs[static_cast<size_t>(i - 1)] * sys.mono[static_cast<size_t>(i - 1)];

    auto base = std::make_shared<TriangularSystem>(sys);
    auto sgn = std::make_shared<std::vector<int>>(signs);

    TriangularSystem out;
    out.n = sys.n;
    out.name = sys.name + "+";
    out.mono.assign(static_cast<size_t>(sys.n - 1), 1);
    out.domain_hint = sys.domain_hint;
    for (int i = 1; i <= sys.n; ++i) {
        const int m = sys.arity(i);
        out.f.push_back([base, sgn, i, m](double t, std::span<const double> xt) {
            std::vector<double> x(static_cast<size_t>(m));
            for (int k = 0; k < m; ++k)
                x[static_cast<size_t>(k)] = (*sgn)[static_cast<size_t>(k)] * xt[static_cast<size_t>(k)];
            return (*sgn)[static_cast<size_t>(i - 1)] * (*base).f[static_cast<size_t>(i - 1)](t, x);
        });
    }
    return {out, signs};
}

MonotonicityReport certify_monotone(const TriangularSystem& sys, const SampleBoxDomain& box,
                                    long samples, std::uint64_t seed) {
    if (samples < 1) throw UsageError("certify_monotone: samples must be >= 1");
    if (static_cast<int>(box.x.size()) != sys.n)
        throw UsageError("certify_monotone: box dimension mismatch");

    MonotonicityReport rep;
    Rng rng(seed);
    for (long s = 0; s < samples; ++s) {
        int i = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(sys.n - 1));
        double t = rng.uniform(box.t_lo, box.t_hi);
        const int m = sys.arity(i);
        std::vector<double> x(static_cast<size_t>(m));
        for (int k = 0; k < m; ++k)
            x[static_cast<size_t>(k)] = rng.uniform(box.x[static_cast<size_t>(k)][0],
                                                    box.x[static_cast<size_t>(k)][1]);
        double e = rng.uniform(-box.e_scale, box.e_scale);
        if (e == 0.0) continue; // difference quotient undefined
        rep.samples_tested++;
        double hi = eval_f(sys, i, t, x);
        std::vector<double> xl = x;
        xl[static_cast<size_t>(m - 1)] -= e;
        double lo = eval_f(sys, i, t, xl);
        double q = sys.mono[static_cast<size_t>(i - 1)] * (hi - lo) / e;
        if (!(q > 0.0))
            rep.violations.push_back({i, t, x, e, q});
    }
    return rep;
}

} // namespace hgo
