#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hgo {

// Right-hand side component f_i(t, x_1..x_m) with m = min(i+1, n).
using RhsFn = std::function<double(double t, std::span<const double> prefix)>;

// Single-output triangular system
//   x_i' = f_i(t, x_1, ..., x_{i+1})   (i < n)
//   x_n' = f_n(t, x_1, ..., x_n)
//   y    = x_1
// where each f_i (i < n) is strictly monotone in its last state argument,
// with direction mono[i-1] in {+1, -1}.
struct TriangularSystem {
    int n = 0;
    std::vector<RhsFn> f;    // size n, f[i] is f_{i+1}
    std::vector<int> mono;   // size n-1
    std::vector<std::array<double, 2>> domain_hint; // optional sampling box, may be empty
    std::string name;

    int arity(int i) const { return i < n ? i + 1 : n; } // i is 1-based
};

// Forward-completeness envelope: |x(t)| <= beta(t, |x0|), nondecreasing in
// both arguments.
struct GrowthEnvelope {
    std::function<double(double t, double s)> beta;
    double operator()(double t, double s) const { return beta(t, s); }
};

// Vanishing threshold g with 0 < g < 1, g' >= -g, g -> 0.
struct GainDecay {
    double t0 = 0.0;
    double lambda = 0.5; // in (0, 1]
    double g(double t) const;
    double gdot(double t) const;
};

GainDecay make_gain_decay(double t0, double lambda);

double eval_f(const TriangularSystem& sys, int i, double t, std::span<const double> prefix);
std::vector<double> eval_rhs(const TriangularSystem& sys, double t, std::span<const double> x);

// F(t, x, y): plant right-hand side with the measured output substituted for
// the first state, used by the observer.
std::vector<double> eval_rhs_output_form(const TriangularSystem& sys, double t,
                                         std::span<const double> x, double y);

struct SystemWithEnvelope {
    TriangularSystem sys;
    GrowthEnvelope beta;
};

// the two-dimensional polynomial benchmark system
SystemWithEnvelope make_example();
// mild three-dimensional chain systems for exercising n = 3 code paths
SystemWithEnvelope make_chain3();
SystemWithEnvelope make_chain3_decreasing(); // mono[0] = -1 variant
// lookup by name ("example2d", "chain3", "chain3dec")
SystemWithEnvelope find_system(const std::string& name);

// Equivalent system with every monotonicity direction +1, obtained by the
// recursive sign flips s_{i+1} = s_i * mono[i] applied to x_2..x_n. The
// output x_1 is unchanged. `signs` (one per state, first entry +1) maps
// original states to transformed ones: xt_i = signs[i-1] * x_i.
struct NormalizedSystem {
    TriangularSystem sys;
    std::vector<int> signs;
};
NormalizedSystem normalize_increasing(const TriangularSystem& sys);

struct SampleBoxDomain {
    double t_lo = 0.0, t_hi = 1.0;
    std::vector<std::array<double, 2>> x; // per-state bounds
    double e_scale = 1.0;                 // increments sampled in [-e_scale, e_scale]
};

struct MonotonicityViolation {
    int i; // 1-based f index
    double t;
    std::vector<double> x;
    double e;
    double quotient;
};

struct MonotonicityReport {
    long samples_tested = 0;
    std::vector<MonotonicityViolation> violations;
    bool pass() const { return violations.empty(); }
};

// Seed-deterministic sampled check of strict monotonicity of each f_i in its
// last state slot. Samples with a zero increment are skipped.
MonotonicityReport certify_monotone(const TriangularSystem& sys, const SampleBoxDomain& box,
                                    long samples, std::uint64_t seed);

} // namespace hgo
