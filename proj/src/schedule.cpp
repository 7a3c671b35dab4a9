#include "hgo/schedule.hpp"

#include "hgo/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hgo {

namespace {

// index of the interval containing x, clamped
size_t locate(const std::vector<double>& t, double x) {
    auto it = std::upper_bound(t.begin(), t.end(), x);
    if (it == t.begin()) return 0;
    size_t idx = static_cast<size_t>(it - t.begin()) - 1;
    if (idx >= t.size() - 1) idx = t.size() - 2;
    return idx;
}

void hermite_weights(double u, double& h00, double& h10, double& h01, double& h11) {
    double u2 = u * u, u3 = u2 * u;
    h00 = 2 * u3 - 3 * u2 + 1;
    h10 = u3 - 2 * u2 + u;
    h01 = -2 * u3 + 3 * u2;
    h11 = u3 - u2;
}

} // namespace

double ScalarSchedule::eval(double x) const {
    if (t.size() == 1 || x <= t.front()) return v.front();
    if (x >= t.back()) return v.back();
    size_t i = locate(t, x);
    double h = t[i + 1] - t[i];
    double u = (x - t[i]) / h;
    double h00, h10, h01, h11;
    hermite_weights(u, h00, h10, h01, h11);
    return h00 * v[i] + h10 * h * s[i] + h01 * v[i + 1] + h11 * h * s[i + 1];
}

double ScalarSchedule::deriv(double x) const {
    if (t.size() == 1 || x < t.front() || x > t.back()) return 0.0;
    if (x == t.front()) return s.front();
    if (x == t.back()) return s.back();
    size_t i = locate(t, x);
    double h = t[i + 1] - t[i];
    double u = (x - t[i]) / h;
    double u2 = u * u;
    double d00 = (6 * u2 - 6 * u) / h;
    double d10 = 3 * u2 - 4 * u + 1;
    double d01 = (-6 * u2 + 6 * u) / h;
    double d11 = 3 * u2 - 2 * u;
    return d00 * v[i] + d10 * s[i] + d01 * v[i + 1] + d11 * s[i + 1];
}

double ScalarSchedule::integrate_trapezoid(double a, double b) const {
    if (b < a) return -integrate_trapezoid(b, a);
    std::vector<double> knots;
    knots.push_back(a);
    for (double tk : t)
        if (tk > a && tk < b) knots.push_back(tk);
    knots.push_back(b);
    double acc = 0.0;
    for (size_t i = 0; i + 1 < knots.size(); ++i)
        acc += 0.5 * (eval(knots[i]) + eval(knots[i + 1])) * (knots[i + 1] - knots[i]);
    return acc;
}

double ScalarSchedule::max_on(double a, double b) const {
    double m = std::max(eval(a), eval(b));
    for (size_t i = 0; i < t.size(); ++i)
        if (t[i] >= a && t[i] <= b) m = std::max(m, v[i]);
    return m;
}

void ScalarSchedule::check_flags() const {
    if (t.empty() || t.size() != v.size() || t.size() != s.size())
        throw UsageError("schedule: inconsistent node arrays");
    for (size_t i = 0; i + 1 < t.size(); ++i)
        if (!(t[i] < t[i + 1])) throw UsageError("schedule: nodes not strictly increasing");
    if (nondecreasing)
        for (size_t i = 0; i + 1 < v.size(); ++i)
            if (v[i] > v[i + 1]) throw UsageError("schedule: nondecreasing flag violated");
    if (positive)
        for (double  x : v)
            if (!(x > 0.0)) throw UsageError("schedule: positivity flag violated");
}

ScalarSchedule ScalarSchedule::constant(double t0, double t1, double value) {
    ScalarSchedule out;
    out.t = {t0, t1};
    out.v = {value, value};
    out.s = {0.0, 0.0};
    return out;
}

ScalarSchedule ScalarSchedule::from_values(std::vector<double> tt, std::vector<double> vv) {
    ScalarSchedule out;
    const size_t n = tt.size();
    out.t = std::move(tt);
    out.v = std::move(vv);
    out.s.assign(n, 0.0);
    if (n == 1) return out;
    std::vector<double> d(n - 1);
    for (size_t i = 0; i + 1 < n; ++i)
        d[i] = (out.v[i + 1] - out.v[i]) / (out.t[i + 1] - out.t[i]);
    out.s[0] = d[0];
    out.s[n - 1] = d[n - 2];
    for (size_t i = 1; i + 1 < n; ++i) {
        if (d[i - 1] * d[i] <= 0.0)
            out.s[i] = 0.0;
        else
            out.s[i] = 2.0 / (1.0 / d[i - 1] + 1.0 / d[i]); // harmonic mean keeps monotone shape
    }
    // Fritsch-Carlson limiting
    for (size_t i = 0; i + 1 < n; ++i) {
        if (d[i] == 0.0) {
            out.s[i] = 0.0;
            out.s[i + 1] = 0.0;
            continue;
        }
        double a = out.s[i] / d[i], b = out.s[i + 1] / d[i];
        double r = a * a + b * b;
        if (r > 9.0) {
            double f = 3.0 / std::sqrt(r);
            out.s[i] = f * a * d[i];
            out.s[i + 1] = f * b * d[i];
        }
    }
    return out;
}

ScalarSchedule ScalarSchedule::from_nodes(std::vector<double> tt, std::vector<double> vv,
                                          std::vector<double> ss) {
    ScalarSchedule out;
    out.t = std::move(tt);
    out.v = std::move(vv);
    out.s = std::move(ss);
    return out;
}

std::vector<double> merge_grids(std::span<const std::vector<double>> grids) {
    std::vector<double> all;
    for (const auto& g : grids) all.insert(all.end(), g.begin(), g.end());
    std::sort(all.begin(), all.end());
    std::vector<double> out;
    for (double x : all) {
        if (out.empty() || x - out.back() > 1e-12 * std::max(1.0, std::abs(x)))
            out.push_back(x);
    }
    return out;
}

std::vector<double> uniform_grid(double t0, double t1, double h) {
    std::vector<double> g;
    long n = std::lround(std::ceil((t1 - t0) / h - 1e-9));
    if (n < 1) n = 1;
    for (long i = 0; i <= n; ++i) {
        double x = t0 + static_cast<double>(i) * h;
        g.push_back(std::min(x, t1));
    }
    g.back() = t1;
    return g;
}

Mat MatrixSchedule::eval(double x) const {
    if (x <= t.front()) return v.front();
    if (x >= t.back()) return v.back();
    size_t i = locate(t, x);
    double h = t[i + 1] - t[i];
    double u = (x - t[i]) / h;
    double h00, h10, h01, h11;
    hermite_weights(u, h00, h10, h01, h11);
    Mat out(k, k);
    for (size_t e = 0; e < out.a.size(); ++e)
        out.a[e] = h00 * v[i].a[e] + h10 * h * s[i].a[e] + h01 * v[i + 1].a[e] + h11 * h * s[i + 1].a[e];
    return out;
}

Mat MatrixSchedule::deriv(double x) const {
    if (x < t.front() || x > t.back()) return Mat(k, k);
    if (x == t.front()) return s.front();
    if (x == t.back()) return s.back();
    size_t i = locate(t, x);
    double h = t[i + 1] - t[i];
    double u = (x - t[i]) / h;
    double u2 = u * u;
    double d00 = (6 * u2 - 6 * u) / h;
    double d10 = 3 * u2 - 4 * u + 1;
    double d01 = (-6 * u2 + 6 * u) / h;
    double d11 = 3 * u2 - 2 * u;
    Mat out(k, k);
    for (size_t e = 0; e < out.a.size(); ++e)
        out.a[e] = d00 * v[i].a[e] + d10 * s[i].a[e] + d01 * v[i + 1].a[e] + d11 * s[i + 1].a[e];
    return out;
}

} // namespace hgo
