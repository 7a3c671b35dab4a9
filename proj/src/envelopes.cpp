#include "hgo/envelopes.hpp"

#include "hgo/errors.hpp"
#include "hgo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hgo {

namespace {

// Coordinate layout for the delta sample space: [y, x block, e block].
struct DeltaDomain {
    double y_rad = 0.0;   // |y| <= y_rad
    int dx = 0;           // x block dimension, |x| <= x_rad
    double x_rad = 0.0;
    int de = 0;           // e block dimension, |e| <= e_rad
    double e_rad = 0.0;
    double e_floor = 0.0; // |e_last| >= e_floor (0 disables)

    int dim() const { return 1 + dx + de; }

    // feasible interval(s) of coordinate c with the rest of the point fixed
    void intervals(const std::vector<double>& p, int c, double out[2][2], int& count) const {
        auto ball_halfwidth = [](double rad, double rest2) {
            double w2 = rad * rad - rest2;
            return w2 > 0.0 ? std::sqrt(w2) : 0.0;
        };
        if (c == 0) {
            out[0][0] = -y_rad;
            out[0][1] = y_rad;
            count = 1;
            return;
        }
        if (c < 1 + dx) {
            double rest2 = 0.0;
            for (int k = 1; k < 1 + dx; ++k)
                if (k != c) rest2 += p[static_cast<size_t>(k)] * p[static_cast<size_t>(k)];
            double w = ball_halfwidth(x_rad, rest2);
            out[0][0] = -w;
            out[0][1] = w;
            count = 1;
            return;
        }
        double rest2 = 0.0;
        for (int k = 1 + dx; k < dim(); ++k)
            if (k != c) rest2 += p[static_cast<size_t>(k)] * p[static_cast<size_t>(k)];
        double w = ball_halfwidth(e_rad, rest2);
        if (c == dim() - 1 && e_floor > 0.0) {
            double lo = std::min(e_floor, w);
            out[0][0] = -w;
            out[0][1] = -lo;
            out[1][0] = lo;
            out[1][1] = w;
            count = 2;
            return;
        }
        out[0][0] = -w;
        out[0][1] = w;
        count = 1;
    }

    std::vector<double> random_point(Rng& rng) const {
        std::vector<double> p;
        p.push_back(rng.uniform(-y_rad, y_rad));
        auto xb = rng.ball(dx, x_rad);
        p.insert(p.end(), xb.begin(), xb.end());
        auto eb = rng.ball(de, e_rad);
        if (e_floor > 0.0 && de > 0) {
            double& last = eb[static_cast<size_t>(de - 1)];
            double rest2 = 0.0;
            for (int k = 0; k < de - 1; ++k) rest2 += eb[static_cast<size_t>(k)] * eb[static_cast<size_t>(k)];
            double w = std::sqrt(std::max(e_rad * e_rad - rest2, e_floor * e_floor));
            double mag = rng.uniform(e_floor, std::max(w, e_floor));
            last = (rng.uniform() < 0.5 ? -1.0 : 1.0) * mag;
        }
        p.insert(p.end(), eb.begin(), eb.end());
        return p;
    }
};

double golden_min(const std::function<double(double)>& f, double a, double b, int iters,
                  double& xbest) {
    const double gr = 0.6180339887498949;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    for (int k = 0; k < iters; ++k) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    if (fc < fd) {
        xbest = c;
        return fc;
    }
    xbest = d;
    return fd;
}

// scan + golden refinement of fn along one coordinate interval
double line_min(const std::function<double(double)>& f, double lo, double hi,
                const OptBudget& budget, double& xbest) {
    if (hi <= lo) {
        xbest = lo;
        return f(lo);
    }
    int npts = std::max(budget.scan_points, 3);
    double best = 0.0, bx = lo;
    for (int k = 0; k < npts; ++k) {
        double x = lo + (hi - lo) * static_cast<double>(k) / (npts - 1);
        double fx = f(x);
        if (k == 0 || fx < best) {
            best = fx;
            bx = x;
        }
    }
    double step = (hi - lo) / (npts - 1);
    double a = std::max(lo, bx - step), b = std::min(hi, bx + step);
    double gx;
    double gbest = golden_min(f, a, b, budget.golden_iters, gx);
    if (gbest < best) {
        best = gbest;
        bx = gx;
    }
    xbest = bx;
    return best;
}

// multistart coordinate descent over a DeltaDomain
double minimize(const DeltaDomain& dom, const std::function<double(const std::vector<double>&)>& fn,
                const OptBudget& budget, std::uint64_t seed,
                const std::vector<std::vector<double>>& extra_starts) {
    Rng rng(seed);
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> starts = extra_starts;
    starts.push_back(std::vector<double>(static_cast<size_t>(dom.dim()), 0.0));
    if (dom.e_floor > 0.0 && dom.de > 0) {
        auto& c = starts.back();
        c[static_cast<size_t>(dom.dim() - 1)] = dom.e_floor; // center is infeasible then
    }
    for (int s = 0; s < budget.starts; ++s) starts.push_back(dom.random_point(rng));

    std::vector<double> p;
    for (auto& start : starts) {
        p = start;
        double cur = fn(p);
        for (int sweep = 0; sweep < budget.sweeps; ++sweep) {
            double before = cur;
            for (int c = 0; c < dom.dim(); ++c) {
                double iv[2][2];
                int count = 0;
                dom.intervals(p, c, iv, count);
                double keep = p[static_cast<size_t>(c)];
                double bestx = keep, bestf = cur;
                for (int q = 0; q < count; ++q) {
                    double x;
                    double f = line_min(
                        [&](double xx) {
                            p[static_cast<size_t>(c)] = xx;
                            return fn(p);
                        },
                        iv[q][0], iv[q][1], budget, x);
                    if (f < bestf) {
                        bestf = f;
                        bestx = x;
                    }
                }
                p[static_cast<size_t>(c)] = bestx;
                cur = bestf;
            }
            if (before - cur <= 1e-12 * (std::abs(before) + 1.0)) break;
        }
        best = std::min(best, cur);
    }
    return best;
}

double sup_abs_delta(const TriangularSystem& sys, int i, int j, double t, double y_rad,
                     double x_rad, double e_rad, const OptBudget& budget, std::uint64_t seed) {
    DeltaDomain dom;
    dom.y_rad = y_rad;
    dom.dx = sys.arity(i) - 1;
    dom.x_rad = x_rad;
    dom.de = j - 1;
    dom.e_rad = e_rad;
    // The raw quotient amplifies roundoff of the cancelled terms as the
    // divisor shrinks, and a maximizer homes in on exactly that noise. Below
    // this resolution the clamped quotient reads the local slope instead,
    // which is what the limit is.
    const double eps_quot = 1e-6 * (1.0 + e_rad);
    auto eval_abs_neg = [&](const std::vector<double>& p) {
        std::span<const double> xs(p.data() + 1, static_cast<size_t>(dom.dx));
        std::vector<double> es(p.begin() + 1 + dom.dx, p.end());
        if (std::abs(es.back()) < eps_quot)
            es.back() = es.back() < 0.0 ? -eps_quot : eps_quot;
        return -std::abs(delta(sys, i, j, t, p[0], xs, es));
    };
    // corner starts: extreme e_j with extreme x coordinates
    std::vector<std::vector<double>> corners;
    for (int sy = -1; sy <= 1; sy += 2)
        for (int se = -1; se <= 1; se += 2) {
            std::vector<double> c(static_cast<size_t>(dom.dim()), 0.0);
            c[0] = sy * y_rad;
            if (dom.dx > 0) c[1] = sy * x_rad;
            c[static_cast<size_t>(dom.dim() - 1)] = se * e_rad;
            corners.push_back(c);
        }
    double neg = minimize(dom, eval_abs_neg, budget, seed, corners);
    return -neg;
}

} // namespace

ScalarSchedule sigma_majorant(const TriangularSystem& sys, const GrowthEnvelope& beta,
                              const EnvelopeConfig& cfg, const std::vector<double>& grid) {
    if (!(cfg.xi >= 1.0)) throw UsageError("sigma_majorant: xi must be >= 1");
    if (!(cfg.R > 0.0)) throw UsageError("sigma_majorant: R must be > 0");
    std::vector<double> vals(grid.size());
    double running = 0.0;
    for (size_t gi = 0; gi < grid.size(); ++gi) {
        double t = grid[gi];
        double b = beta(t, cfg.R);
        double sum = 0.0;
        for (int i = 2; i <= sys.n; ++i) {
            for (int j = 2; j <= i; ++j) {
                std::uint64_t s = Rng::derive(cfg.seed, 1000003ULL * gi + 97ULL * i + j);
                try {
                    sum += sup_abs_delta(sys, i, j, t, b, b, cfg.xi, cfg.budget, s);
                } catch (const EvalError& err) {
                    throw EvalError("sigma_majorant: overflow at (i=" + std::to_string(i) +
                                    ", j=" + std::to_string(j) + ", t=" + std::to_string(t) +
                                    "): " + err.what());
                }
            }
        }
        running = std::max(running, cfg.majorant_safety * sum);
        vals[gi] = running;
    }
    ScalarSchedule out = ScalarSchedule::from_values(grid, vals);
    out.nondecreasing = true;
    out.positive = true;
    out.check_flags();
    return out;
}

double d_min_estimate(const TriangularSystem& sys, const GrowthEnvelope& beta,
                      const EnvelopeConfig& cfg, int i, double t, double r) {
    if (!(r > 0.0 && r <= cfg.xi)) throw UsageError("d_min: need 0 < r <= xi");
    if (i < 1 || i >= sys.n) throw UsageError("d_min: index out of range");
    double b = beta(t, cfg.R);
    DeltaDomain dom;
    dom.y_rad = b;
    dom.dx = i;
    dom.x_rad = b;
    dom.de = i;
    dom.e_rad = cfg.xi;
    dom.e_floor = r;
    auto eval = [&](const std::vector<double>& p) {
        std::span<const double> xs(p.data() + 1, static_cast<size_t>(i));
        std::span<const double> es(p.data() + 1 + i, static_cast<size_t>(i));
        return delta(sys, i, i + 1, t, p[0], xs, es);
    };
    std::vector<std::vector<double>> corners;
    for (int se = -1; se <= 1; se += 2) {
        std::vector<double> c(static_cast<size_t>(dom.dim()), 0.0);
        c[static_cast<size_t>(dom.dim() - 1)] = se * r;
        corners.push_back(c);
        c[static_cast<size_t>(dom.dim() - 1)] = se * cfg.xi;
        corners.push_back(c);
    }
    std::uint64_t s = Rng::derive(cfg.seed, 7777ULL + 131ULL * static_cast<std::uint64_t>(i) +
                                                static_cast<std::uint64_t>(t * 4096.0) * 13ULL);
    return minimize(dom, eval, cfg.budget, s, corners);
}

double d_min(const TriangularSystem& sys, const GrowthEnvelope& beta, const EnvelopeConfig& cfg,
             int i, double t, double r) {
    double est = d_min_estimate(sys, beta, cfg, i, t, r);
    if (!(est > 0.0))
        throw SynthesisError("d_min", "H1 margin violated: sampled superdiagonal minimum " +
                                          std::to_string(est) + " at t=" + std::to_string(t));
    return cfg.min_safety * est;
}

ScalarSchedule minorant_mu(const std::vector<double>& ts, const std::vector<double>& vs,
                           double minorant_safety) {
    if (ts.empty() || ts.size() != vs.size()) throw UsageError("minorant_mu: bad samples");
    for (double v : vs)
        if (!(v > 0.0)) throw UsageError("minorant_mu: non-positive sample");
    std::vector<double> w(vs.size());
    for (size_t k = 0; k < vs.size(); ++k) {
        double m = vs[k];
        if (k > 0) m = std::min(m, vs[k - 1]);
        if (k + 1 < vs.size()) m = std::min(m, vs[k + 1]);
        w[k] = minorant_safety * m;
    }
    ScalarSchedule out = ScalarSchedule::from_values(ts, w);
    out.positive = true;
    out.check_flags();
    return out;
}

Envelopes make_envelopes(const TriangularSystem& sys, const GrowthEnvelope& beta,
                         const EnvelopeConfig& cfg, const std::vector<double>& grid) {
    Envelopes env;
    env.beta = beta;
    env.sigma = sigma_majorant(sys, beta, cfg, grid);
    env.dmin_raw = [sys, beta, cfg](int i, double t, double r) {
        return d_min_estimate(sys, beta, cfg, i, t, r);
    };
    env.dmin = [sys, beta, cfg](int i, double t, double r) {
        return d_min(sys, beta, cfg, i, t, r);
    };
    return env;
}

} // namespace hgo
