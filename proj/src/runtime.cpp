#include "hgo/runtime.hpp"

#include "hgo/errors.hpp"
#include "hgo/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>

namespace hgo {

namespace {

bool finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

long step_count(double t0, double t_end, double h) {
    long n = std::lround(std::ceil((t_end - t0) / h - 1e-9));
    return std::max<long>(n, 1);
}

} // namespace

Trace integrate_plant(const TriangularSystem& sys, double t0, std::span<const double> x0,
                      double t_end, double h) {
    if (!(h > 0.0) || !(t_end > t0)) throw UsageError("integrate_plant: need h > 0 and t_end > t0");
    if (static_cast<int>(x0.size()) != sys.n) throw UsageError("integrate_plant: state size mismatch");

    Trace tr;
    tr.t0 = t0;
    tr.h = h;
    std::vector<double> x(x0.begin(), x0.end());
    const long n = step_count(t0, t_end, h);
    tr.t.reserve(n + 1);
    tr.state.reserve(n + 1);
    tr.y.reserve(n + 1);
    tr.t.push_back(t0);
    tr.state.push_back(x);
    tr.y.push_back(x[0]);

    std::vector<double> k1, k2, k3, k4, tmp(x.size());
    for (long s = 0; s < n; ++s) {
        double t = t0 + static_cast<double>(s) * h;
        try {
            k1 = eval_rhs(sys, t, x);
            for (size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
            k2 = eval_rhs(sys, t + 0.5 * h, tmp);
            for (size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
            k3 = eval_rhs(sys, t + 0.5 * h, tmp);
            for (size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + h * k3[i];
            k4 = eval_rhs(sys, t + h, tmp);
        } catch (const EvalError&) {
            throw DivergenceError(t, "plant state diverged");
        }
        for (size_t i = 0; i < x.size(); ++i)
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!finite(x)) throw DivergenceError(t, "plant state diverged");
        tr.t.push_back(t0 + static_cast<double>(s + 1) * h);
        tr.state.push_back(x);
        tr.y.push_back(x[0]);
    }
    return tr;
}

double YSource::operator()(double tt) const {
    if (callback) return callback(tt);
    if (t.empty()) throw UsageError("y source is empty");
    if (tt <= t.front()) return y.front();
    if (tt >= t.back()) return y.back();
    auto it = std::upper_bound(t.begin(), t.end(), tt);
    size_t i = static_cast<size_t>(it - t.begin()) - 1;
    if (i >= t.size() - 1) i = t.size() - 2;
    double h = t[i + 1] - t[i];
    double u = (tt - t[i]) / h;
    double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * y[i] + (u3 - 2 * u2 + u) * h * ydot[i] +
           (-2 * u3 + 3 * u2) * y[i + 1] + (u3 - u2) * h * ydot[i + 1];
}

bool YSource::covers(double a, double b) const {
    if (callback) return true;
    return !t.empty() && t.front() <= a + 1e-9 && t.back() >= b - 1e-9;
}

YSource YSource::from_trace(const Trace& tr, const TriangularSystem& sys) {
    YSource src;
    src.t = tr.t;
    src.y = tr.y;
    src.ydot.resize(tr.size());
    for (size_t i = 0; i < tr.size(); ++i) {
        auto dx = eval_rhs(sys, tr.t[i], tr.state[i]);
        src.ydot[i] = dx[0];
    }
    return src;
}

YSource YSource::from_callback(std::function<double(double)> fn) {
    YSource src;
    src.callback = std::move(fn);
    return src;
}

namespace {

// observer right-hand side and the exact Jacobian of the injection term
struct ObserverRhs {
    const ObserverGainSchedule* sched;
    const TriangularSystem* sys;
    const YSource* ys;

    std::vector<double> correction(double t, double z1, double y, Mat* P_out = nullptr) const {
        Mat P = sched->P.eval(t);
        double phi = sched->phi.eval(t);
        std::vector<double> rhs(static_cast<size_t>(sched->n), 0.0);
        rhs[0] = phi * (y - z1);
        auto c = spd_solve(P, rhs);
        if (P_out) *P_out = P;
        return c;
    }

    std::vector<double> operator()(double t, std::span<const double> z) const {
        double y = (*ys)(t);
        auto f = eval_rhs_output_form(*sys, t, z, y);
        auto c = correction(t, z[0], y);
        for (size_t i = 0; i < f.size(); ++i) f[i] += c[i];
        return f;
    }

    // d(rhs)/dz: finite differences on F plus the analytic injection part
    Mat jacobian(double t, std::span<const double> z) const {
        const int n = sched->n;
        double y = (*ys)(t);
        auto f0 = eval_rhs_output_form(*sys, t, z, y);
        Mat j(n, n);
        std::vector<double> zp(z.begin(), z.end());
        for (int c = 0; c < n; ++c) {
            double dz = 1e-7 * (1.0 + std::abs(zp[static_cast<size_t>(c)]));
            double keep = zp[static_cast<size_t>(c)];
            zp[static_cast<size_t>(c)] = keep + dz;
            auto f1 = eval_rhs_output_form(*sys, t, zp, y);
            zp[static_cast<size_t>(c)] = keep;
            for (int r = 0; r < n; ++r) j(r, c) = (f1[static_cast<size_t>(r)] - f0[static_cast<size_t>(r)]) / dz;
        }
        // injection: -phi P^{-1} e_1 e_1'
        Mat P = sched->P.eval(t);
        double phi = sched->phi.eval(t);
        std::vector<double> e1(static_cast<size_t>(n), 0.0);
        e1[0] = phi;
        auto col = spd_solve(P, e1);
        for (int r = 0; r < n; ++r) j(r, 0) -= col[static_cast<size_t>(r)];
        return j;
    }
};

void lu_solve_inplace(Mat m, std::vector<double>& b, double ts) {
    const int n = m.rows;
    std::vector<int> piv(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) piv[static_cast<size_t>(i)] = i;
    for (int c = 0; c < n; ++c) {
        int pr = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(m(r, c)) > std::abs(m(pr, c))) pr = r;
        if (pr != c) {
            for (int cc = 0; cc < n; ++cc) std::swap(m(c, cc), m(pr, cc));
            std::swap(piv[static_cast<size_t>(c)], piv[static_cast<size_t>(pr)]);
        }
        if (m(c, c) == 0.0) throw DivergenceError(ts, "singular stage matrix");
        for (int r = c + 1; r < n; ++r) {
            m(r, c) /= m(c, c);
            for (int cc = c + 1; cc < n; ++cc) m(r, cc) -= m(r, c) * m(c, cc);
        }
    }
    std::vector<double> pb(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) pb[static_cast<size_t>(i)] = b[static_cast<size_t>(piv[static_cast<size_t>(i)])];
    for (int r = 1; r < n; ++r)
        for (int c = 0; c < r; ++c) pb[static_cast<size_t>(r)] -= m(r, c) * pb[static_cast<size_t>(c)];
    for (int r = n - 1; r >= 0; --r) {
        for (int c = r + 1; c < n; ++c) pb[static_cast<size_t>(r)] -= m(r, c) * pb[static_cast<size_t>(c)];
        pb[static_cast<size_t>(r)] /= m(r, r);
    }
    b = pb;
}

// Solve the SDIRK stage equation Z = base + h*gamma*f(ts, Z). Damped Newton
// with a fresh Jacobian per iteration: the injection gain makes the system
// extremely stiff and the plant polynomial grows fast, so undamped steps
// can leave the representable range.
std::vector<double> solve_stage(const ObserverRhs& rhs, double ts, double hg,
                                std::span<const double> base, std::span<const double> guess) {
    const int n = static_cast<int>(base.size());
    const double y = (*rhs.ys)(ts);
    std::vector<double> z(guess.begin(), guess.end());
    z[0] = y; // slaved coordinate: start on the measured output

    std::vector<double> best_z = z;
    double best_res = std::numeric_limits<double>::infinity();
    double prev_step = std::numeric_limits<double>::infinity();
    int stalls = 0;
    for (int it = 0; it < 60; ++it) {
        auto f = rhs(ts, z);
        std::vector<double> g(static_cast<size_t>(n));
        double zmax = 0.0, res = 0.0;
        for (int i = 0; i < n; ++i) {
            g[static_cast<size_t>(i)] = z[static_cast<size_t>(i)] - base[static_cast<size_t>(i)] -
                                        hg * f[static_cast<size_t>(i)];
            zmax = std::max(zmax, std::abs(z[static_cast<size_t>(i)]));
            res = std::max(res, std::abs(g[static_cast<size_t>(i)]));
        }
        if (res < best_res) {
            best_res = res;
            best_z = z;
        }
        Mat j = rhs.jacobian(ts, z);
        Mat m(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) m(r, c) = (r == c ? 1.0 : 0.0) - hg * j(r, c);
        lu_solve_inplace(m, g, ts);
        double step = 0.0;
        for (int i = 0; i < n; ++i) step = std::max(step, std::abs(g[static_cast<size_t>(i)]));
        double cap = 2.0 * (1.0 + zmax + std::abs(y));
        double scale = step > cap ? cap / step : 1.0;
        for (int i = 0; i < n; ++i) z[static_cast<size_t>(i)] -= scale * g[static_cast<size_t>(i)];
        if (!finite(z)) throw DivergenceError(ts, "observer stage diverged");
        if (step * scale <= 1e-13 * (1.0 + zmax)) return z;
        if (scale == 1.0 && step >= prev_step) {
            if (++stalls >= 3) break; // quantized correction keeps it hovering
        } else {
            stalls = 0;
        }
        prev_step = step * scale;
    }
    return best_res < std::numeric_limits<double>::infinity() ? best_z : z;
}

} // namespace

Trace run_observer(const ObserverGainSchedule& sched, const YSource& y_source,
                   const TriangularSystem& sys, double t0bar, double t_end, double h,
                   std::span<const double> z0) {
    if (!(h > 0.0) || !(t_end > t0bar)) throw UsageError("run_observer: need h > 0 and t_end > t0bar");
    if (static_cast<int>(z0.size()) != sched.n) throw UsageError("run_observer: z0 size mismatch");
    if (!y_source.covers(t0bar, t_end))
        throw UsageError("run_observer: output source does not cover the integration window");

    const double gamma = 1.0 - 1.0 / std::sqrt(2.0); // L-stable two-stage SDIRK
    ObserverRhs rhs{&sched, &sys, &y_source};

    Trace tr;
    tr.t0 = t0bar;
    tr.h = h;
    std::vector<double> z(z0.begin(), z0.end());
    const long n = step_count(t0bar, t_end, h);
    tr.t.push_back(t0bar);
    tr.state.push_back(z);
    tr.y.push_back(y_source(t0bar));

    std::vector<double> base(z.size()), k1(z.size());
    for (long s = 0; s < n; ++s) {
        double t = t0bar + static_cast<double>(s) * h;
        try {
            double t1 = t + gamma * h;
            auto z1 = solve_stage(rhs, t1, gamma * h, z, z);
            auto f1 = rhs(t1, z1);
            for (size_t i = 0; i < z.size(); ++i) base[i] = z[i] + h * (1.0 - gamma) * f1[i];
            double t2 = t + h;
            z = solve_stage(rhs, t2, gamma * h, base, z1);
        } catch (const EvalError&) {
            throw DivergenceError(t, "observer state diverged");
        }
        if (!finite(z)) throw DivergenceError(t, "observer state diverged");

        double tn = t0bar + static_cast<double>(s + 1) * h;
        // innovation consistency: the injected correction must satisfy
        // P c = phi H' (y - z1) up to solver roundoff
        {
            Mat P;
            double y = y_source(tn);
            auto c = rhs.correction(tn, z[0], y, &P);
            double bnorm = std::abs(sched.phi.eval(tn) * (y - z[0]));
            auto pc = std::vector<double>(c.size(), 0.0);
            for (int r = 0; r < P.rows; ++r) {
                double acc = 0.0;
                for (int cc = 0; cc < P.cols; ++cc) acc += P(r, cc) * c[static_cast<size_t>(cc)];
                pc[static_cast<size_t>(r)] = acc;
            }
            pc[0] -= sched.phi.eval(tn) * (y - z[0]);
            double cnorm = norm2(c);
            double scale = bnorm + sym_norm(P) * cnorm + 1e-300;
            if (norm2(pc) > 1e-10 * scale)
                throw EvalError("observer correction residual out of tolerance");
        }
        tr.t.push_back(tn);
        tr.state.push_back(z);
        tr.y.push_back(y_source(tn));
    }
    return tr;
}

EnvelopeReport check_error_envelope(const Trace& x_trace, const Trace& z_trace,
                                    const ObserverGainSchedule& sched, double rate) {
    EnvelopeReport rep;
    if (x_trace.size() != z_trace.size())
        throw UsageError("check_error_envelope: misaligned traces");
    const double t0 = sched.t0bar;
    for (size_t i = 0; i < x_trace.size(); ++i) {
        if (std::abs(x_trace.t[i] - z_trace.t[i]) > 1e-9)
            throw UsageError("check_error_envelope: misaligned grids");
        double t = x_trace.t[i];
        double err = 0.0;
        for (int c = 0; c < x_trace.dim(); ++c) {
            double d = x_trace.state[i][static_cast<size_t>(c)] - z_trace.state[i][static_cast<size_t>(c)];
            err += d * d;
        }
        err = std::sqrt(err);
        rep.nodes_checked++;
        if (!(err < sched.xi)) rep.violations_13a++;
        double bound = sched.xi;
        if (t >= t0 + 1.0 - 1e-12) {
            bound = std::max(sched.xi * std::exp(-rate * (t - (t0 + 1.0))),
                             std::sqrt(sched.gain.g(t)));
            if (err > bound) rep.violations_13b++;
        }
        double ratio = err / bound;
        if (ratio > rep.max_ratio) {
            rep.max_ratio = ratio;
            rep.worst_t = t;
        }
    }
    return rep;
}

namespace {
std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}
} // namespace

void write_trace_csv(const Trace& tr, const std::string& path, bool observer_columns) {
    std::ofstream os(path);
    if (!os) throw UsageError("cannot open trace file for writing: " + path);
    const int n = tr.dim();
    if (!observer_columns) {
        os << "t";
        for (int c = 1; c <= n; ++c) os << ",x" << c;
        os << "\n";
        for (size_t i = 0; i < tr.size(); ++i) {
            os << fmt17(tr.t[i]);
            for (int c = 0; c < n; ++c) os << "," << fmt17(tr.state[i][static_cast<size_t>(c)]);
            os << "\n";
        }
        return;
    }
    os << "t";
    for (int c = 1; c <= n; ++c) os << ",z" << c;
    os << ",y,abs_e,bound_exp,bound_g,window\n";
    for (size_t i = 0; i < tr.size(); ++i) {
        os << fmt17(tr.t[i]);
        for (int c = 0; c < n; ++c) os << "," << fmt17(tr.state[i][static_cast<size_t>(c)]);
        os << "," << fmt17(i < tr.y.size() ? tr.y[i] : 0.0);
        os << "," << fmt17(i < tr.abs_e.size() ? tr.abs_e[i] : 0.0);
        os << "," << fmt17(i < tr.bound_exp.size() ? tr.bound_exp[i] : 0.0);
        os << "," << fmt17(i < tr.bound_g.size() ? tr.bound_g[i] : 0.0);
        os << "," << (i < tr.window.size() ? tr.window[i] : 0) << "\n";
    }
}

Trace read_trace_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot open trace file: " + path);
    std::string line;
    if (!std::getline(is, line)) throw UsageError("empty trace file: " + path);
    bool observer = line.find(",z1") != std::string::npos;
    int n = 0;
    {
        size_t pos = 0;
        int cols = 1;
        while ((pos = line.find(',', pos)) != std::string::npos) {
            cols++;
            pos++;
        }
        n = observer ? cols - 6 : cols - 1;
    }
    Trace tr;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> f;
        size_t pos = 0;
        while (pos <= line.size()) {
            size_t next = line.find(',', pos);
            if (next == std::string::npos) next = line.size();
            f.push_back(std::strtod(line.substr(pos, next - pos).c_str(), nullptr));
            pos = next + 1;
            if (next == line.size()) break;
        }
        tr.t.push_back(f[0]);
        tr.state.emplace_back(f.begin() + 1, f.begin() + 1 + n);
        if (observer) {
            tr.y.push_back(f[static_cast<size_t>(1 + n)]);
            tr.abs_e.push_back(f[static_cast<size_t>(2 + n)]);
            tr.bound_exp.push_back(f[static_cast<size_t>(3 + n)]);
            tr.bound_g.push_back(f[static_cast<size_t>(4 + n)]);
            tr.window.push_back(static_cast<int>(f[static_cast<size_t>(5 + n)]));
        } else {
            tr.y.push_back(f[1]);
        }
    }
    if (tr.size() >= 2) {
        tr.t0 = tr.t.front();
        tr.h = tr.t[1] - tr.t[0];
    }
    return tr;
}

} // namespace hgo
