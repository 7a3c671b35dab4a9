#include "hgo/linalg.hpp"

#include "hgo/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hgo {

Mat Mat::identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Mat::finite() const {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

Mat operator+(const Mat& x, const Mat& y) {
    Mat r = x;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] += y.a[i];
    return r;
}

Mat operator-(const Mat& x, const Mat& y) {
    Mat r = x;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] -= y.a[i];
    return r;
}

Mat operator*(const Mat& x, double s) {
    Mat r = x;
    for (auto& v : r.a) v *= s;
    return r;
}

double quad_form(const Mat& m, std::span<const double> y, std::span<const double> x) {
    double acc = 0.0;
    for (int r = 0; r < m.rows; ++r) {
        double row = 0.0;
        for (int c = 0; c < m.cols; ++c) row += m(r, c) * x[static_cast<size_t>(c)];
        acc += y[static_cast<size_t>(r)] * row;
    }
    return acc;
}

std::vector<double> sym_eigenvalues(const Mat& m) {
    const int n = m.rows;
    Mat a = m;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        double scale = 0.0;
        for (int p = 0; p < n; ++p) scale = std::max(scale, std::abs(a(p, p)));
        if (off <= 1e-30 * std::max(1.0, scale * scale)) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ev[static_cast<size_t>(i)] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

double sym_norm(const Mat& m) {
    auto ev = sym_eigenvalues(m);
    double r = 0.0;
    for (double e : ev) r = std::max(r, std::abs(e));
    return r;
}

std::vector<double> spd_solve(const Mat& m, std::span<const double> rhs) {
    const int n = m.rows;
    Mat l(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = m(i, j);
            for (int k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
            if (i == j) {
                if (!(sum > 0.0)) throw EvalError("spd_solve: matrix not positive definite");
                l(i, i) = std::sqrt(sum);
            } else {
                l(i, j) = sum / l(j, j);
            }
        }
    }
    std::vector<double> y(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double sum = rhs[static_cast<size_t>(i)];
        for (int k = 0; k < i; ++k) sum -= l(i, k) * y[static_cast<size_t>(k)];
        y[static_cast<size_t>(i)] = sum / l(i, i);
    }
    std::vector<double> x(static_cast<size_t>(n));
    for (int i = n - 1; i >= 0; --i) {
        double sum = y[static_cast<size_t>(i)];
        for (int k = i + 1; k < n; ++k) sum -= l(k, i) * x[static_cast<size_t>(k)];
        x[static_cast<size_t>(i)] = sum / l(i, i);
    }
    return x;
}

bool sym_psd(const Mat& m, double rel_tol) {
    const int n = m.rows;
    // scale rows/cols by 1/sqrt(diag); definiteness is invariant under
    // congruence, and the scaled matrix has O(1) entries
    std::vector<double> d(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double v = m(i, i);
        if (v < 0.0) return false;
        d[static_cast<size_t>(i)] = (v > 0.0) ? 1.0 / std::sqrt(v) : 1.0;
    }
    Mat sm(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            sm(i, j) = m(i, j) * d[static_cast<size_t>(i)] * d[static_cast<size_t>(j)];
    // Cholesky with a small relative slack on the pivots
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = sm(i, j);
            for (int k = 0; k < j; ++k) sum -= sm(i, k) * sm(j, k);
            if (i == j) {
                if (sum < -rel_tol) return false;
                sm(i, i) = std::sqrt(std::max(sum, 0.0));
            } else {
                sm(i, j) = (sm(j, j) > 0.0) ? sum / sm(j, j) : 0.0;
            }
        }
    }
    return true;
}

double norm2(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double dot(std::span<const double> x, std::span<const double> y) {
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
}

} // namespace hgo
