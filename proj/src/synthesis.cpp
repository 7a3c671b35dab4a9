#include "hgo/synthesis.hpp"

#include "hgo/divdiff.hpp"
#include "hgo/errors.hpp"
#include "hgo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace hgo {

namespace {

double smoothstep(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
}
double smoothstep_deriv(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return 6.0 * u * (1.0 - u);
}

std::vector<double> matvec(const Mat& m, std::span<const double> x) {
    std::vector<double> out(static_cast<size_t>(m.rows), 0.0);
    for (int r = 0; r < m.rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < m.cols; ++c) acc += m(r, c) * x[static_cast<size_t>(c)];
        out[static_cast<size_t>(r)] = acc;
    }
    return out;
}

Mat bordered(const Mat& lower, double p1, double p) {
    Mat out(lower.rows + 1, lower.cols + 1);
    out(0, 0) = p1;
    out(0, 1) = p;
    out(1, 0) = p;
    for (int r = 0; r < lower.rows; ++r)
        for (int c = 0; c < lower.cols; ++c) out(r + 1, c + 1) = lower(r, c);
    return out;
}

ScalarSchedule shifted(const ScalarSchedule& base, double offset) {
    ScalarSchedule out = base;
    for (auto& x : out.v) x += offset;
    out.nondecreasing = false;
    out.positive = false;
    return out;
}

// quadratic-form pieces of N(e) = e'PAe + 1/2 e'P'e + mg e'Pe for a fixed A
double eval_N(const Mat& P, const Mat& Pd, const Mat& A, double mg, std::span<const double> e) {
    auto Pe = matvec(P, e);
    auto Ae = matvec(A, e);
    return dot(Pe, Ae) + 0.5 * quad_form(Pd, e, e) + mg * quad_form(P, e, e);
}

struct LevelView {
    int k = 0;
    const TriangularSystem* sys = nullptr;
    const GrowthEnvelope* beta = nullptr;
    const MatrixSchedule* P = nullptr;
    const ScalarSchedule* sigma = nullptr;
    GainDecay g;
    double R = 0.0, xi = 0.0;
    double t_lo = 0.0, t_hi = 0.0;
};

// Sampled verification of the level inequality. kernel = true checks
//   e'PAe + 1/2 e'P'e <= -d e'Pe  on  e_1 = 0,
// otherwise
//   e'PAe + 1/2 e'P'e <= phi e_1^2 - margin e'Pe.
CheckResult sampled_check(const LevelView& lv, const ScalarSchedule* d_kernel,
                          const ScalarSchedule* phi, const ScalarSchedule* margin, bool kernel,
                          long samples, std::uint64_t seed, const char* name) {
    CheckResult res;
    res.name = name;
    Rng rng(seed);
    const int k = lv.k;
    const int lq = q_lower_size(k);
    for (long s = 0; s < samples; ++s) {
        double t = rng.uniform(lv.t_lo, lv.t_hi);
        Mat P = lv.P->eval(t);
        Mat Pd = lv.P->deriv(t);
        double sig = lv.sigma->eval(t);
        double gt = lv.g.g(t);
        double bt = (*lv.beta)(t, lv.R);
        auto q = rng.ball(lq, sig);
        auto x = rng.ball(lv.sys->n, bt);
        double y = rng.uniform(-bt, bt);
        std::vector<double> e;
        bool ok = false;
        for (int tries = 0; tries < 64 && !ok; ++tries) {
            if (kernel) {
                auto eh = rng.ball(k - 1, lv.xi);
                e.assign(1, 0.0);
                e.insert(e.end(), eh.begin(), eh.end());
            } else {
                e = rng.ball(k, lv.xi);
            }
            ok = quad_form(P, e, e) >= gt;
        }
        if (!ok) continue;
        res.samples++;
        Mat A = assemble_A(*lv.sys, k, t, q, x, e, y);
        auto Pe = matvec(P, e);
        auto Ae = matvec(A, e);
        double lhs = dot(Pe, Ae) + 0.5 * quad_form(Pd, e, e);
        double rhs;
        if (kernel)
            rhs = -d_kernel->eval(t) * quad_form(P, e, e);
        else
            rhs = phi->eval(t) * e[0] * e[0] - margin->eval(t) * quad_form(P, e, e);
        double m = rhs - lhs;
        if (m < res.worst_margin) {
            res.worst_margin = m;
            res.worst_t = t;
            char buf[256];
            std::snprintf(buf, sizeof buf, "e1=%.6g |e|=%.6g q0=%.6g qlast=%.6g lhs=%.6g rhs=%.6g",
                          e[0], norm2(e), q.empty() ? 0.0 : q.front(),
                          q.empty() ? 0.0 : q.back(), lhs, rhs);
            res.note = buf;
        }
        if (m < 0.0) res.violations++;
    }
    return res;
}

// sup over admissible e_1 of N(e_1)/e_1^2 for one sampled tuple, exploiting
// that N is an exact quadratic in e_1 at the top level k = n
double tuple_sup_ratio(const LevelView& lv, const Mat& P, const Mat& Pd, double t, double mg,
                       std::span<const double> q, std::span<const double> x, double y,
                       std::span<const double> ehat, double eps_floor) {
    const int k = lv.k;
    const double xi = lv.xi;
    double rest2 = 0.0;
    for (double c : ehat) rest2 += c * c;
    if (rest2 >= xi * xi) return -std::numeric_limits<double>::infinity();
    double emax = std::sqrt(xi * xi - rest2);
    if (emax <= eps_floor) return -std::numeric_limits<double>::infinity();
    double gt = lv.g.g(t);

    std::vector<double> e(static_cast<size_t>(k), 0.0);
    for (int j = 1; j < k; ++j) e[static_cast<size_t>(j)] = ehat[static_cast<size_t>(j - 1)];

    // feasibility quadratic w1 e1^2 + 2 w2 e1 + w3 >= g
    double w1 = P(0, 0);
    double w2 = 0.0;
    for (int j = 1; j < k; ++j) w2 += P(0, j) * e[static_cast<size_t>(j)];
    double w3 = quad_form(P, e, e);
    auto feasible = [&](double e1) {
        double v = w1 * e1 * e1 + 2.0 * w2 * e1 + w3 - gt;
        return v >= -1e-9 * (std::abs(w3) + gt + 1.0);
    };

    double best = -std::numeric_limits<double>::infinity();
    const bool exact_quadratic = (k == lv.sys->n); // A does not read e_1 at the top level

    // quadratic coefficients of N with A frozen at e_1 = 0; exact at the top
    // level, a local model of the peak location below it
    Mat A0 = assemble_A(*lv.sys, k, t, q, x, e, y);
    auto evalN_frozen = [&](double e1) {
        e[0] = e1;
        double v = eval_N(P, Pd, A0, mg, e);
        e[0] = 0.0;
        return v;
    };
    double h = std::max(emax / 2.0, 1e-3);
    double a0 = evalN_frozen(0.0);
    double nh = evalN_frozen(h), nm = evalN_frozen(-h);
    double a2 = (nh + nm - 2.0 * a0) / (2.0 * h * h);
    double a1 = (nh - nm) / (2.0 * h);

    auto true_ratio = [&](double e1) {
        if (exact_quadratic) return a2 + a1 / e1 + a0 / (e1 * e1);
        e[0] = e1;
        Mat A = assemble_A(*lv.sys, k, t, q, x, e, y);
        double v = eval_N(P, Pd, A, mg, e) / (e1 * e1);
        e[0] = 0.0;
        return v;
    };

    double best_e1 = 0.0;
    auto consider = [&](double e1) {
        double mag = std::abs(e1);
        if (!(mag >= eps_floor && mag <= emax)) return;
        if (!feasible(e1)) return;
        double v = true_ratio(e1);
        if (v > best) {
            best = v;
            best_e1 = e1;
        }
    };

    for (int sgn = -1; sgn <= 1; sgn += 2) {
        consider(sgn * eps_floor);
        consider(sgn * emax);
    }
    if (a1 != 0.0) consider(-2.0 * a0 / a1); // stationary point of the frozen model
    {
        double disc = w2 * w2 - w1 * (w3 - gt);
        if (disc > 0.0 && w1 > 0.0) { // feasibility boundary
            double sq = std::sqrt(disc);
            consider((-w2 - sq) / w1);
            consider((-w2 + sq) / w1);
        }
    }
    if (!exact_quadratic) {
        const int pts = 12;
        for (int sgn = -1; sgn <= 1; sgn += 2)
            for (int ip = 0; ip < pts; ++ip)
                consider(sgn * eps_floor *
                         std::pow(emax / eps_floor, static_cast<double>(ip) / (pts - 1)));
        if (best > -std::numeric_limits<double>::infinity()) {
            // golden refinement on the log magnitude around the incumbent
            double sgn = best_e1 < 0.0 ? -1.0 : 1.0;
            double lm = std::log(std::abs(best_e1));
            double span = std::log(emax / eps_floor) / (pts - 1);
            double a = lm - span, b = lm + span;
            const double gr = 0.6180339887498949;
            double c = b - gr * (b - a), d = a + gr * (b - a);
            auto val = [&](double lx) {
                double e1 = sgn * std::exp(lx);
                double mag = std::abs(e1);
                if (!(mag >= eps_floor && mag <= emax) || !feasible(e1))
                    return -std::numeric_limits<double>::infinity();
                return true_ratio(e1);
            };
            double fc = val(c), fd = val(d);
            for (int it = 0; it < 14; ++it) {
                if (fc > fd) {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - gr * (b - a);
                    fc = val(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + gr * (b - a);
                    fd = val(d);
                }
            }
            best = std::max({best, fc, fd});
        }
    }
    return best;
}

std::vector<double> axis_vec(int dim, int axis, double value) {
    std::vector<double> v(static_cast<size_t>(dim), 0.0);
    if (dim > 0) v[static_cast<size_t>(axis)] = value;
    return v;
}

} // namespace

void SynthesisConfig::validate() const {
    if (!(L > 1.0)) throw UsageError("synthesis config: L must be > 1");
    if (!(xi >= 1.0)) throw UsageError("synthesis config: xi must be >= 1");
    if (!(R > 0.0)) throw UsageError("synthesis config: R must be > 0");
    if (!(t0 >= 0.0)) throw UsageError("synthesis config: t0 must be >= 0");
    if (!(horizon > 1.5)) throw UsageError("synthesis config: horizon too short");
    if (!(h_grid > 0.0 && h_grid < horizon)) throw UsageError("synthesis config: bad grid step");
    if (!(lambda > 0.0 && lambda <= 1.0)) throw UsageError("synthesis config: lambda in (0,1]");
    if (!(phi_safety > 1.0)) throw UsageError("synthesis config: phi safety must exceed 1");
}

EnvelopeConfig SynthesisConfig::envelope_config() const {
    EnvelopeConfig ec;
    ec.R = R;
    ec.xi = xi;
    ec.majorant_safety = majorant_safety;
    ec.minorant_safety = minorant_safety;
    ec.min_safety = min_safety;
    ec.budget = budget;
    ec.seed = seed;
    return ec;
}

double admissible_xi(const GrowthEnvelope& beta, double t0bar, double R, double L, int n) {
    return std::sqrt(L) * std::exp(2.0 * static_cast<double>(n)) * beta(t0bar, R + 1.0);
}

ScalarSchedule theta_ramp(double t0, double tau) {
    if (!(tau > 0.0)) throw UsageError("theta_ramp: tau must be > 0");
    const double half = tau / 2.0;
    const int segs = 16;
    std::vector<double> t(segs + 1), v(segs + 1), s(segs + 1);
    for (int i = 0; i <= segs; ++i) {
        double u = static_cast<double>(i) / segs;
        t[static_cast<size_t>(i)] = t0 + half * u;
        v[static_cast<size_t>(i)] = smoothstep(u);
        s[static_cast<size_t>(i)] = smoothstep_deriv(u) / half;
    }
    v.back() = 1.0;
    s.back() = 0.0;
    auto out = ScalarSchedule::from_nodes(std::move(t), std::move(v), std::move(s));
    out.nondecreasing = true;
    return out;
}

ScalarSchedule p_r1_completion(const MatrixSchedule& P_lower, const ScalarSchedule& pR, double L,
                               const std::vector<double>& grid, double schur_margin) {
    std::vector<double> vals(grid.size()), slopes(grid.size());
    const int kl = P_lower.k;
    std::vector<double> e1(static_cast<size_t>(kl), 0.0);
    e1[0] = 1.0;
    for (size_t idx = 0; idx < grid.size(); ++idx) {
        double t = grid[idx];
        Mat low = P_lower.eval(t);
        Mat lowd = P_lower.deriv(t);
        Mat shift = low - Mat::identity(kl);
        std::vector<double> col;
        try {
            col = spd_solve(shift, e1);
        } catch (const EvalError&) {
            throw SynthesisError("p_r1_completion",
                                 "lower block not strictly above identity at t=" + std::to_string(t));
        }
        double m = col[0];
        double mdot = -quad_form(lowd, col, col);
        double p = pR.eval(t), pd = pR.deriv(t);
        vals[idx] = 0.5 * (1.0 + L) + schur_margin * p * p * m;
        slopes[idx] = schur_margin * (2.0 * p * pd * m + p * p * mdot);
    }
    auto out = ScalarSchedule::from_nodes(std::vector<double>(grid), std::move(vals), std::move(slopes));
    out.positive = true;

    // the bordered matrix must stay above the identity, with norm <= L at t0
    for (size_t idx = 0; idx < grid.size(); ++idx) {
        double t = grid[idx];
        Mat b = bordered(P_lower.eval(t), out.v[idx], pR.eval(t));
        if (!sym_psd(b - Mat::identity(b.rows), 1e-9))
            throw SynthesisError("p_r1_completion",
                                 "bordered matrix drops below identity at t=" + std::to_string(t));
    }
    Mat b0 = bordered(P_lower.eval(grid.front()), out.v.front(), pR.eval(grid.front()));
    if (sym_norm(b0) > L * (1.0 + 1e-12))
        throw SynthesisError("p_r1_completion", "bordered norm exceeds L at t0");
    return out;
}

LevelCertificate base_case(const TriangularSystem& sys, const SynthesisConfig& cfg,
                           const Envelopes& env, const GainDecay& g,
                           std::vector<MinorantRecord>* minorants) {
    const int n = sys.n;
    const double L = cfg.L;
    const double t0 = cfg.t0, tend = cfg.t0 + cfg.horizon;

    double M2 = env.sigma.max_on(t0, t0 + 0.5);
    if (!(M2 > 0.0)) throw SynthesisError("base_case", "majorant not positive");
    double tau2 = std::min(1.0 / M2, 1.0);

    std::vector<double> main_grid = uniform_grid(t0, tend, cfg.h_grid);
    std::vector<double> ramp_grid = uniform_grid(t0, t0 + tau2, tau2 / 8.0);
    std::vector<std::vector<double>> parts = {main_grid, ramp_grid};
    std::vector<double> grid = merge_grids(parts);

    ScalarSchedule theta = theta_ramp(t0, tau2);

    // minorant of D_{R,n-1}(t, sqrt(g/L)) along the grid
    std::vector<double> dvals(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) {
        double r = std::sqrt(g.g(grid[i]) / L);
        dvals[i] = env.dmin(n - 1, grid[i], r);
    }
    ScalarSchedule mu = minorant_mu(grid, dvals, cfg.minorant_safety);

    std::vector<double> pv(grid.size()), ps(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) {
        double t = grid[i];
        double sig = env.sigma.eval(t), sigd = env.sigma.deriv(t);
        double m = mu.eval(t), md = mu.deriv(t);
        double th = theta.eval(t), thd = theta.deriv(t);
        double num = L * (n + sig);
        pv[i] = -th * num / m;
        ps[i] = -thd * num / m - th * (L * sigd * m - num * md) / (m * m);
    }
    ScalarSchedule pR = ScalarSchedule::from_nodes(std::vector<double>(grid), std::move(pv), std::move(ps));

    MatrixSchedule Plow;
    Plow.k = 1;
    Plow.t = grid;
    Mat lm(1, 1);
    lm(0, 0) = L;
    Plow.v.assign(grid.size(), lm);
    Plow.s.assign(grid.size(), Mat(1, 1));
    ScalarSchedule pR1 = p_r1_completion(Plow, pR, L, grid, cfg.schur_margin);

    MatrixSchedule P;
    P.k = 2;
    P.t = grid;
    for (size_t i = 0; i < grid.size(); ++i) {
        Mat v(2, 2), s(2, 2);
        v(0, 0) = pR1.v[i];
        v(0, 1) = v(1, 0) = pR.v[i];
        v(1, 1) = L;
        s(0, 0) = pR1.s[i];
        s(0, 1) = s(1, 0) = pR.s[i];
        P.v.push_back(v);
        P.s.push_back(s);
    }

    // d ramps from -M2 up to n within tau2
    std::vector<double> dv(grid.size()), ds(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) {
        double t = grid[i];
        if (t <= t0 + tau2 / 2.0) {
            dv[i] = -M2;
            ds[i] = 0.0;
        } else if (t < t0 + tau2) {
            double u = (t - t0 - tau2 / 2.0) / (tau2 / 2.0);
            dv[i] = -M2 + (n + M2) * smoothstep(u);
            ds[i] = (n + M2) * smoothstep_deriv(u) / (tau2 / 2.0);
        } else {
            dv[i] = n;
            ds[i] = 0.0;
        }
    }
    ScalarSchedule d = ScalarSchedule::from_nodes(std::vector<double>(grid), std::move(dv), std::move(ds));

    // grid verification of p D + L sigma <= -L d
    double worst = std::numeric_limits<double>::infinity();
    double worst_t = t0;
    for (size_t i = 0; i < grid.size(); ++i) {
        double t = grid[i];
        double lhs = pR.v[i] * dvals[i] + L * env.sigma.eval(t);
        double margin = -L * d.v[i] - lhs;
        if (margin < worst) {
            worst = margin;
            worst_t = t;
        }
    }
    if (worst < 0.0)
        throw SynthesisError("base_case", "target inequality violated at t=" + std::to_string(worst_t) +
                                              " margin=" + std::to_string(worst));

    if (minorants) {
        MinorantRecord rec;
        rec.index = n - 1;
        std::vector<double> rv(grid.size()), rs(grid.size());
        for (size_t i = 0; i < grid.size(); ++i) {
            rv[i] = std::sqrt(g.g(grid[i]) / L);
            rs[i] = 0.5 * g.gdot(grid[i]) / (L * rv[i]);
        }
        rec.r = ScalarSchedule::from_nodes(std::vector<double>(grid), std::move(rv), std::move(rs));
        rec.mu = mu;
        minorants->push_back(std::move(rec));
    }

    LevelCertificate cert;
    cert.level = 2;
    cert.P = std::move(P);
    cert.d = d;
    cert.dbar = shifted(d, -0.5);
    cert.pR = std::move(pR);
    cert.pR1 = std::move(pR1);
    cert.M = M2;
    cert.tau = tau2;
    return cert;
}

ScalarSchedule derive_gain(const LevelCertificate& cert, const TriangularSystem& sys,
                               const SynthesisConfig& cfg, const Envelopes& env,
                               const GainDecay& g, const ScalarSchedule& margin) {
    const int k = cert.level;
    const int lq = q_lower_size(k);
    const double xi = cfg.xi;
    const double eps_floor = 1e-3 * std::sqrt(g.g(cfg.t0 + cfg.horizon));

    LevelView lv;
    lv.k = k;
    lv.sys = &sys;
    lv.beta = &env.beta;
    lv.P = &cert.P;
    lv.sigma = &env.sigma;
    lv.g = g;
    lv.R = cfg.R;
    lv.xi = xi;
    lv.t_lo = cfg.t0;
    lv.t_hi = cfg.t0 + cfg.horizon;

    const auto& grid = cert.P.t;
    std::vector<double> vals(grid.size());
    for (size_t idx = 0; idx < grid.size(); ++idx) {
        double t = grid[idx];
        const Mat& P = cert.P.v[idx];
        const Mat& Pd = cert.P.s[idx];
        double mg = margin.eval(t);
        double sig = env.sigma.eval(t);
        double bt = env.beta(t, cfg.R);
        Rng rng(Rng::derive(cfg.seed, 0xF1F1ULL + idx));

        double best = -std::numeric_limits<double>::infinity();
        for (long s = 0; s < cfg.phi_tuples; ++s) {
            auto q = rng.ball(lq, sig);
            auto x = rng.ball(sys.n, bt);
            double y = rng.uniform(-bt, bt);
            auto ehat = rng.ball(k - 1, xi);
            best = std::max(best, tuple_sup_ratio(lv, P, Pd, t, mg, q, x, y, ehat, eps_floor));
        }
        // deterministic corner probes
        std::vector<std::vector<double>> qs = {std::vector<double>(static_cast<size_t>(lq), 0.0)};
        for (int a = 0; a < lq; ++a) {
            qs.push_back(axis_vec(lq, a, sig));
            qs.push_back(axis_vec(lq, a, -sig));
        }
        std::vector<double> ones(static_cast<size_t>(lq), sig / std::sqrt(static_cast<double>(lq)));
        qs.push_back(ones);
        std::vector<std::vector<double>> ehats = {std::vector<double>(static_cast<size_t>(k - 1), 0.0)};
        for (int a = 0; a < k - 1; ++a) {
            ehats.push_back(axis_vec(k - 1, a, 0.98 * xi));
            ehats.push_back(axis_vec(k - 1, a, -0.98 * xi));
        }
        std::vector<double> x0(static_cast<size_t>(sys.n), 0.0);
        std::vector<double> xc(static_cast<size_t>(sys.n), bt / std::sqrt(static_cast<double>(sys.n)));
        for (const auto& q : qs)
            for (const auto& eh : ehats)
                for (double y2 : {0.0, bt, -bt})
                    for (const auto* xp : {&x0, &xc})
                        best = std::max(best,
                                        tuple_sup_ratio(lv, P, Pd, t, mg, q, *xp, y2, eh, eps_floor));

        vals[idx] = cfg.phi_safety * std::max(cfg.phi_min, best);
        if (!(vals[idx] <= cfg.phi_cap))
            throw SynthesisError("derive_gain",
                                 "kernel margin insufficient: gain cap exceeded at t=" + std::to_string(t));
    }
    ScalarSchedule phi = ScalarSchedule::from_values(std::vector<double>(grid), std::move(vals));
    phi.positive = true;
    phi.check_flags();

    CheckResult fresh = sampled_check(lv, nullptr, &phi, &margin, false, cfg.fresh_samples,
                                      Rng::derive(cfg.seed, 0xFE11ULL + static_cast<std::uint64_t>(k)),
                                      "derive_gain fresh");
    if (!fresh.pass())
        throw SynthesisError("derive_gain",
                             "fresh sampling found " + std::to_string(fresh.violations) +
                                 " violations of the gain inequality (worst margin " +
                                 std::to_string(fresh.worst_margin) + " at t=" +
                                 std::to_string(fresh.worst_t) + ", " + fresh.note + ")");
    return phi;
}

LevelCertificate induction_step(const LevelCertificate& cert_k, const TriangularSystem& sys,
                                const SynthesisConfig& cfg, const Envelopes& env,
                                const GainDecay& g, std::vector<MinorantRecord>* minorants) {
    const int n = sys.n;
    const int k = cert_k.level;
    if (cert_k.phi.t.empty()) throw UsageError("induction_step: certificate gain not populated");
    if (k >= n) throw UsageError("induction_step: already at full level");
    const int i = n - k; // superdiagonal index entering at this step
    const double L = cfg.L;
    const double xi = cfg.xi;
    const double t0 = cfg.t0, tend = cfg.t0 + cfg.horizon;

    // peak of |dbar| + 1/4 + xi^2 phi / g over the first half unit
    double M = 0.0;
    {
        std::vector<double> ts = uniform_grid(t0, t0 + 0.5, 0.5 / 200.0);
        for (double tt : cert_k.P.t)
            if (tt <= t0 + 0.5) ts.push_back(tt);
        for (double tt : ts) {
            double v = std::abs(cert_k.dbar.eval(tt)) + 0.25 +
                       xi * xi * cert_k.phi.eval(tt) / g.g(tt);
            M = std::max(M, v);
        }
    }
    double tau = std::min(1.0 / (4.0 * M), 0.5);

    std::vector<double> ramp_grid = uniform_grid(t0, t0 + tau, tau / 8.0);
    std::vector<std::vector<double>> parts = {cert_k.P.t, ramp_grid};
    std::vector<double> grid = merge_grids(parts);

    ScalarSchedule theta = theta_ramp(t0, tau);

    // zeta = (1/2) sqrt(g / phi_k)
    std::vector<double> zv(grid.size()), zs(grid.size());
    for (size_t idx = 0; idx < grid.size(); ++idx) {
        double t = grid[idx];
        double ph = cert_k.phi.eval(t), phd = cert_k.phi.deriv(t);
        double gv = g.g(t), gd = g.gdot(t);
        double u = gv / ph;
        double z = 0.5 * std::sqrt(u);
        zv[idx] = z;
        zs[idx] = (gd / ph - gv * phd / (ph * ph)) / (8.0 * z);
    }
    ScalarSchedule zeta = ScalarSchedule::from_nodes(std::vector<double>(grid), std::move(zv), std::move(zs));
    zeta.positive = true;

    std::vector<double> dvals(grid.size());
    for (size_t idx = 0; idx < grid.size(); ++idx) {
        double r = std::clamp(zeta.v[idx], 1e-300, xi);
        dvals[idx] = env.dmin(i, grid[idx], r);
    }
    ScalarSchedule mu = minorant_mu(grid, dvals, cfg.minorant_safety);

    std::vector<double> pv(grid.size()), ps(grid.size());
    for (size_t idx = 0; idx < grid.size(); ++idx) {
        double t = grid[idx];
        double ph = cert_k.phi.eval(t), phd = cert_k.phi.deriv(t);
        double m = mu.eval(t), md = mu.deriv(t);
        double th = theta.eval(t), thd = theta.deriv(t);
        pv[idx] = -th * ph / m;
        ps[idx] = -thd * ph / m - th * (phd * m - ph * md) / (m * m);
    }
    ScalarSchedule pR = ScalarSchedule::from_nodes(std::vector<double>(grid), std::move(pv), std::move(ps));

    // d_{k+1}: -M, then ramp onto dbar_k - 1/4
    std::vector<double> dv(grid.size()), ds(grid.size());
    for (size_t idx = 0; idx < grid.size(); ++idx) {
        double t = grid[idx];
        double c = cert_k.dbar.eval(t) - 0.25;
        double cd = cert_k.dbar.deriv(t);
        if (t <= t0 + tau / 2.0) {
            dv[idx] = -M;
            ds[idx] = 0.0;
        } else if (t < t0 + tau) {
            double u = (t - t0 - tau / 2.0) / (tau / 2.0);
            double su = smoothstep(u);
            dv[idx] = -M + (c + M) * su;
            ds[idx] = smoothstep_deriv(u) / (tau / 2.0) * (c + M) + su * cd;
        } else {
            dv[idx] = c;
            ds[idx] = cd;
        }
    }
    ScalarSchedule d = ScalarSchedule::from_nodes(std::vector<double>(grid), std::move(dv), std::move(ds));

    ScalarSchedule pR1 = p_r1_completion(cert_k.P, pR, L, grid, cfg.schur_margin);

    MatrixSchedule P;
    P.k = k + 1;
    P.t = grid;
    for (size_t idx = 0; idx < grid.size(); ++idx) {
        double t = grid[idx];
        Mat low = cert_k.P.eval(t);
        Mat lowd = cert_k.P.deriv(t);
        Mat v = bordered(low, pR1.v[idx], pR.v[idx]);
        Mat s = bordered(lowd, pR1.s[idx], pR.s[idx]);
        P.v.push_back(v);
        P.s.push_back(s);
    }

    // reduced inequality on the (t, r) grid
    {
        double worst = std::numeric_limits<double>::infinity();
        double worst_t = t0, worst_r = 0.0;
        std::vector<double> tt = uniform_grid(t0, tend, (tend - t0) / (cfg.tr_grid_t - 1));
        for (double t : tt) {
            for (int jr = 0; jr < cfg.tr_grid_r; ++jr) {
                double r = xi * std::pow(1e-4, 1.0 - static_cast<double>(jr) / (cfg.tr_grid_r - 1));
                double dv_t = d.eval(t);
                double lhs = r * r * (pR.eval(t) * env.dmin(i, t, r) + cert_k.phi.eval(t));
                double rhs = (cert_k.dbar.eval(t) - dv_t) * g.g(t);
                double margin = rhs - lhs;
                if (margin < worst) {
                    worst = margin;
                    worst_t = t;
                    worst_r = r;
                }
            }
        }
        if (worst < 0.0)
            throw SynthesisError("induction_step",
                                 "reduced inequality violated at t=" + std::to_string(worst_t) +
                                     " r=" + std::to_string(worst_r) + " margin=" + std::to_string(worst));
    }

    // level k+1 bound checks on d
    for (size_t idx = 0; idx < grid.size(); ++idx) {
        if (grid[idx] >= t0 + 1.0 - 1e-12 && !(d.v[idx] > n - k))
            throw SynthesisError("induction_step", "d bound fails at t=" + std::to_string(grid[idx]));
    }
    {
        std::vector<double> knots;
        for (double tk : grid)
            if (tk <= t0 + 1.0 + 1e-12) knots.push_back(tk);
        if (knots.empty() || knots.back() < t0 + 1.0) knots.push_back(t0 + 1.0);
        for (size_t a = 0; a < knots.size(); ++a)
            for (size_t b = a; b < knots.size(); ++b)
                if (!(d.integrate_trapezoid(knots[a], knots[b]) > -(k + 1.0)))
                    throw SynthesisError("induction_step", "d integral bound fails");
    }

    if (minorants) {
        MinorantRecord rec;
        rec.index = i;
        rec.mu = mu;
        rec.r = zeta;
        minorants->push_back(std::move(rec));
    }

    LevelCertificate out;
    out.level = k + 1;
    out.P = std::move(P);
    out.d = d;
    out.dbar = shifted(d, -0.5);
    out.pR = std::move(pR);
    out.pR1 = std::move(pR1);
    out.M = M;
    out.tau = tau;
    return out;
}

ObserverGainSchedule synthesize(const TriangularSystem& sys, const GrowthEnvelope& beta,
                                const SynthesisConfig& cfg) {
    cfg.validate();
    for (int m : sys.mono)
        if (m != 1) throw UsageError("synthesize: system must be normalized increasing");

    GainDecay g = make_gain_decay(cfg.t0, cfg.lambda);
    std::vector<double> main_grid = uniform_grid(cfg.t0, cfg.t0 + cfg.horizon, cfg.h_grid);
    Envelopes env = make_envelopes(sys, beta, cfg.envelope_config(), main_grid);

    std::vector<MinorantRecord> minorants;
    LevelCertificate cert = base_case(sys, cfg, env, g, &minorants);

    for (int k = 2; k < sys.n; ++k) {
        cert.phi = derive_gain(cert, sys, cfg, env, g, cert.dbar);
        cert = induction_step(cert, sys, cfg, env, g, &minorants);
    }

    ScalarSchedule final_margin = shifted(cert.d, -cfg.final_margin);
    cert.phi = derive_gain(cert, sys, cfg, env, g, final_margin);

    ObserverGainSchedule sched;
    sched.n = sys.n;
    sched.system = sys.name;
    sched.R = cfg.R;
    sched.xi = cfg.xi;
    sched.L = cfg.L;
    sched.t0bar = cfg.t0;
    sched.horizon = cfg.horizon;
    sched.h_grid = cfg.h_grid;
    sched.margin = cfg.final_margin;
    sched.gain = g;
    sched.sigma = env.sigma;
    sched.d = cert.d;
    sched.phi = cert.phi;
    sched.P = cert.P;
    sched.minorants = std::move(minorants);

    auto checks = run_all_checks(sched, sys, beta, cfg.fresh_samples, Rng::derive(cfg.seed, 0xA2A2ULL));
    for (const auto& c : checks)
        if (!c.pass())
            throw SynthesisError("synthesize", c.name + " failed with " +
                                                   std::to_string(c.violations) + " violations");
    return sched;
}

namespace {

LevelView top_view(const ObserverGainSchedule& sched, const TriangularSystem& sys,
                   const GrowthEnvelope& beta) {
    LevelView lv;
    lv.k = sched.n;
    lv.sys = &sys;
    lv.beta = &beta;
    lv.P = &sched.P;
    lv.sigma = &sched.sigma;
    lv.g = sched.gain;
    lv.R = sched.R;
    lv.xi = sched.xi;
    lv.t_lo = sched.t0bar;
    lv.t_hi = sched.t_end();
    return lv;
}

} // namespace

CheckResult check_kernel_inequality(const ObserverGainSchedule& sched, const TriangularSystem& sys,
                                    const GrowthEnvelope& beta, long samples, std::uint64_t seed) {
    LevelView lv = top_view(sched, sys, beta);
    return sampled_check(lv, &sched.d, nullptr, nullptr, true, samples, seed, "kernel inequality");
}

CheckResult check_full_inequality(const ObserverGainSchedule& sched, const TriangularSystem& sys,
                                  const GrowthEnvelope& beta, long samples, std::uint64_t seed) {
    LevelView lv = top_view(sched, sys, beta);
    ScalarSchedule margin = shifted(sched.d, -sched.margin);
    return sampled_check(lv, nullptr, &sched.phi, &margin, false, samples, seed, "full inequality");
}

CheckResult check_P_bounds(const ObserverGainSchedule& sched) {
    CheckResult res;
    res.name = "P bounds";
    for (size_t idx = 0; idx < sched.P.t.size(); ++idx) {
        res.samples++;
        if (!sym_psd(sched.P.v[idx] - Mat::identity(sched.n), 1e-9)) {
            res.violations++;
            res.worst_t = sched.P.t[idx];
        }
    }
    res.samples++;
    double norm0 = sym_norm(sched.P.eval(sched.t0bar));
    res.worst_margin = sched.L - norm0;
    if (norm0 > sched.L * (1.0 + 1e-12)) {
        res.violations++;
        res.worst_t = sched.t0bar;
        res.note = "norm at start " + std::to_string(norm0);
    }
    return res;
}

CheckResult check_d_bounds(const ObserverGainSchedule& sched) {
    CheckResult res;
    res.name = "d bounds";
    const double c1 = 1.0;
    for (size_t idx = 0; idx < sched.d.t.size(); ++idx) {
        double t = sched.d.t[idx];
        if (t < sched.t0bar + 1.0 - 1e-12) continue;
        res.samples++;
        double m = sched.d.v[idx] - c1;
        if (m < res.worst_margin) {
            res.worst_margin = m;
            res.worst_t = t;
        }
        if (!(m > 0.0)) res.violations++;
    }
    return res;
}

CheckResult check_d_integrals(const ObserverGainSchedule& sched) {
    CheckResult res;
    res.name = "d integrals";
    const double c2 = static_cast<double>(sched.n);
    std::vector<double> knots;
    knots.push_back(sched.t0bar);
    for (double tk : sched.d.t)
        if (tk > sched.t0bar && tk < sched.t0bar + 1.0) knots.push_back(tk);
    knots.push_back(sched.t0bar + 1.0);
    for (size_t a = 0; a < knots.size(); ++a) {
        for (size_t b = a; b < knots.size(); ++b) {
            res.samples++;
            double m = sched.d.integrate_trapezoid(knots[a], knots[b]) + c2;
            if (m < res.worst_margin) {
                res.worst_margin = m;
                res.worst_t = knots[a];
            }
            if (!(m > 0.0)) res.violations++;
        }
    }
    return res;
}

CheckResult check_gain_conditions(const ObserverGainSchedule& sched) {
    CheckResult res;
    res.name = "gain decay conditions";
    std::vector<double> grid = uniform_grid(sched.t0bar, sched.t_end(), sched.h_grid);
    for (double t : grid) {
        res.samples++;
        double gv = sched.gain.g(t);
        double gd = sched.gain.gdot(t);
        double m = std::min({gv, 1.0 - gv, gd + gv});
        if (m < res.worst_margin) {
            res.worst_margin = m;
            res.worst_t = t;
        }
        if (!(gv > 0.0 && gv < 1.0 && gd >= -gv)) res.violations++;
    }
    return res;
}

CheckResult check_sigma_holdout(const ObserverGainSchedule& sched, const TriangularSystem& sys,
                                const GrowthEnvelope& beta, long samples, std::uint64_t seed) {
    CheckResult res;
    res.name = "sigma hold-out";
    Rng rng(seed);
    for (long s = 0; s < samples; ++s) {
        double t = rng.uniform(sched.t0bar, sched.t_end());
        double bt = beta(t, sched.R);
        double total = 0.0;
        for (int i = 2; i <= sys.n; ++i) {
            for (int j = 2; j <= i; ++j) {
                auto x = rng.ball(sys.arity(i) - 1, bt);
                auto e = rng.ball(j - 1, sched.xi);
                double y = rng.uniform(-bt, bt);
                total += std::abs(delta(sys, i, j, t, y, x, e));
            }
        }
        res.samples++;
        double m = sched.sigma.eval(t) - total;
        if (m < res.worst_margin) {
            res.worst_margin = m;
            res.worst_t = t;
        }
        if (m < 0.0) res.violations++;
    }
    return res;
}

CheckResult check_mu_holdout(const ObserverGainSchedule& sched, const TriangularSystem& sys,
                             const GrowthEnvelope& beta, long samples, std::uint64_t seed) {
    CheckResult res;
    res.name = "mu hold-out";
    Rng rng(seed);
    for (const auto& rec : sched.minorants) {
        const int i = rec.index;
        for (long s = 0; s < samples; ++s) {
            double t = rng.uniform(sched.t0bar, sched.t_end());
            double r = std::clamp(rec.r.eval(t), 1e-300, sched.xi);
            double bt = beta(t, sched.R);
            double y = rng.uniform(-bt, bt);
            auto x = rng.ball(i, bt);
            auto e = rng.ball(i, sched.xi);
            double rest2 = 0.0;
            for (int c = 0; c + 1 < i; ++c) rest2 += e[static_cast<size_t>(c)] * e[static_cast<size_t>(c)];
            double cap2 = sched.xi * sched.xi - r * r;
            if (rest2 > cap2 && i > 1) {
                double f = std::sqrt(std::max(cap2, 0.0) / rest2) * 0.999;
                for (int c = 0; c + 1 < i; ++c) e[static_cast<size_t>(c)] *= f;
                rest2 *= f * f;
            }
            double hi = std::sqrt(std::max(sched.xi * sched.xi - rest2, r * r));
            double sign = e[static_cast<size_t>(i - 1)] < 0.0 ? -1.0 : 1.0;
            e[static_cast<size_t>(i - 1)] = sign * rng.uniform(r, hi);
            res.samples++;
            double val = delta(sys, i, i + 1, t, y, x, e);
            double m = val - rec.mu.eval(t);
            if (m < res.worst_margin) {
                res.worst_margin = m;
                res.worst_t = t;
            }
            if (m < 0.0) res.violations++;
        }
    }
    return res;
}

std::vector<CheckResult> run_all_checks(const ObserverGainSchedule& sched,
                                        const TriangularSystem& sys, const GrowthEnvelope& beta,
                                        long fresh_samples, std::uint64_t seed) {
    std::vector<CheckResult> out;
    out.push_back(check_kernel_inequality(sched, sys, beta, fresh_samples, Rng::derive(seed, 1)));
    out.push_back(check_full_inequality(sched, sys, beta, fresh_samples, Rng::derive(seed, 2)));
    out.push_back(check_P_bounds(sched));
    out.push_back(check_d_bounds(sched));
    out.push_back(check_d_integrals(sched));
    out.push_back(check_gain_conditions(sched));
    out.push_back(check_sigma_holdout(sched, sys, beta, 1000, Rng::derive(seed, 3)));
    out.push_back(check_mu_holdout(sched, sys, beta, 1000, Rng::derive(seed, 4)));
    return out;
}

// ---------------------------------------------------------------------------
// schedule file round-trip

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_scalar(std::ostream& os, const std::string& name, const ScalarSchedule& s) {
    os << "[scalar " << name << "]\n"
       << "t,value,slope\n";
    for (size_t i = 0; i < s.t.size(); ++i)
        os << fmt(s.t[i]) << "," << fmt(s.v[i]) << "," << fmt(s.s[i]) << "\n";
}

void write_matrix(std::ostream& os, const std::string& name, const MatrixSchedule& m) {
    os << "[matrix " << name << " " << m.k << "]\n"
       << "t,values,slopes\n";
    for (size_t i = 0; i < m.t.size(); ++i) {
        os << fmt(m.t[i]);
        for (double x : m.v[i].a) os << "," << fmt(x);
        for (double x : m.s[i].a) os << "," << fmt(x);
        os << "\n";
    }
}

std::vector<double> split_csv(const std::string& line) {
    std::vector<double> out;
    size_t pos = 0;
    while (pos <= line.size()) {
        size_t next = line.find(',', pos);
        if (next == std::string::npos) next = line.size();
        out.push_back(std::strtod(line.substr(pos, next - pos).c_str(), nullptr));
        pos = next + 1;
        if (next == line.size()) break;
    }
    return out;
}

// line-buffered reader with one block of lookahead for the data rows
struct LineReader {
    std::vector<std::string> lines;
    size_t pos = 0;

    explicit LineReader(std::istream& is) {
        std::string line;
        while (std::getline(is, line))
            if (!line.empty()) lines.push_back(line);
    }
    bool done() const { return pos >= lines.size(); }
    const std::string& peek() const { return lines[pos]; }
    std::string next() { return lines[pos++]; }
};

ScalarSchedule read_scalar(LineReader& lr) {
    if (lr.done() || lr.next() != "t,value,slope")
        throw UsageError("schedule file: missing scalar header row");
    ScalarSchedule s;
    while (!lr.done() && lr.peek()[0] != '[') {
        auto f = split_csv(lr.next());
        if (f.size() != 3) throw UsageError("schedule file: bad scalar row");
        s.t.push_back(f[0]);
        s.v.push_back(f[1]);
        s.s.push_back(f[2]);
    }
    return s;
}

MatrixSchedule read_matrix(LineReader& lr, int k) {
    if (lr.done() || lr.next() != "t,values,slopes")
        throw UsageError("schedule file: missing matrix header row");
    MatrixSchedule m;
    m.k = k;
    while (!lr.done() && lr.peek()[0] != '[') {
        auto f = split_csv(lr.next());
        if (static_cast<int>(f.size()) != 1 + 2 * k * k)
            throw UsageError("schedule file: bad matrix row");
        m.t.push_back(f[0]);
        Mat v(k, k), s(k, k);
        for (int e = 0; e < k * k; ++e) v.a[static_cast<size_t>(e)] = f[static_cast<size_t>(1 + e)];
        for (int e = 0; e < k * k; ++e)
            s.a[static_cast<size_t>(e)] = f[static_cast<size_t>(1 + k * k + e)];
        m.v.push_back(v);
        m.s.push_back(s);
    }
    return m;
}

} // namespace

void save_schedule(const ObserverGainSchedule& sched, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw UsageError("cannot open schedule file for writing: " + path);
    os << "hgo-schedule v1\n";
    os << "n " << sched.n << "\n";
    os << "system " << sched.system << "\n";
    os << "R " << fmt(sched.R) << "\n";
    os << "xi " << fmt(sched.xi) << "\n";
    os << "L " << fmt(sched.L) << "\n";
    os << "t0bar " << fmt(sched.t0bar) << "\n";
    os << "horizon " << fmt(sched.horizon) << "\n";
    os << "h_grid " << fmt(sched.h_grid) << "\n";
    os << "margin " << fmt(sched.margin) << "\n";
    os << "lambda " << fmt(sched.gain.lambda) << "\n";
    os << "g_t0 " << fmt(sched.gain.t0) << "\n";
    os << "minorants " << sched.minorants.size() << "\n";
    write_scalar(os, "sigma", sched.sigma);
    write_scalar(os, "d", sched.d);
    write_scalar(os, "phi", sched.phi);
    write_matrix(os, "P", sched.P);
    for (const auto& rec : sched.minorants) {
        os << "[minorant " << rec.index << "]\n";
        write_scalar(os, "mu", rec.mu);
        write_scalar(os, "r", rec.r);
    }
}

ObserverGainSchedule load_schedule(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot open schedule file: " + path);
    LineReader lr(is);
    if (lr.done() || lr.next() != "hgo-schedule v1")
        throw UsageError("not a schedule file: " + path);
    ObserverGainSchedule s;
    size_t n_minorants = 0;
    while (!lr.done()) {
        std::string line = lr.next();
        if (line[0] == '[') {
            std::istringstream hs(line);
            std::string tag, name;
            hs >> tag;
            tag = tag.substr(1);
            if (tag == "scalar") {
                hs >> name;
                name.pop_back();
                ScalarSchedule sc = read_scalar(lr);
                if (name == "sigma") {
                    sc.nondecreasing = true;
                    sc.positive = true;
                    s.sigma = sc;
                } else if (name == "d")
                    s.d = sc;
                else if (name == "phi") {
                    sc.positive = true;
                    s.phi = sc;
                } else
                    throw UsageError("schedule file: unknown scalar block " + name);
            } else if (tag == "matrix") {
                int k = 0;
                hs >> name >> k;
                s.P = read_matrix(lr, k);
            } else if (tag == "minorant") {
                MinorantRecord rec;
                hs >> rec.index;
                if (lr.done() || lr.next().rfind("[scalar mu", 0) != 0)
                    throw UsageError("schedule file: minorant block misses mu");
                rec.mu = read_scalar(lr);
                rec.mu.positive = true;
                if (lr.done() || lr.next().rfind("[scalar r", 0) != 0)
                    throw UsageError("schedule file: minorant block misses r");
                rec.r = read_scalar(lr);
                s.minorants.push_back(std::move(rec));
            } else {
                throw UsageError("schedule file: unknown block " + tag);
            }
            continue;
        }
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "n")
            ls >> s.n;
        else if (key == "system")
            ls >> s.system;
        else if (key == "R")
            ls >> s.R;
        else if (key == "xi")
            ls >> s.xi;
        else if (key == "L")
            ls >> s.L;
        else if (key == "t0bar")
            ls >> s.t0bar;
        else if (key == "horizon")
            ls >> s.horizon;
        else if (key == "h_grid")
            ls >> s.h_grid;
        else if (key == "margin")
            ls >> s.margin;
        else if (key == "lambda")
            ls >> s.gain.lambda;
        else if (key == "g_t0")
            ls >> s.gain.t0;
        else if (key == "minorants")
            ls >> n_minorants;
        else
            throw UsageError("schedule file: unknown key " + key);
    }
    if (s.minorants.size() != n_minorants)
        throw UsageError("schedule file: minorant count mismatch");
    return s;
}

} // namespace hgo
