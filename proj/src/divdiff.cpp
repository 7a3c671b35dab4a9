#include "hgo/divdiff.hpp"

#include "hgo/errors.hpp"

#include <cmath>

namespace hgo {

double delta(const TriangularSystem& sys, int i, int j, double t, double y,
             std::span<const double> x_tail, std::span<const double> e) {
    const int n = sys.n;
    const int m = sys.arity(i); // slots 1..m, slot 1 carries y
    if (i < 1 || i > n || j < 2 || j > m)
        throw UsageError("delta: invalid index pair (i, j)");
    if (static_cast<int>(x_tail.size()) != m - 1)
        throw UsageError("delta: x tail length mismatch");
    if (static_cast<int>(e.size()) != j - 1)
        throw UsageError("delta: error tail length mismatch");

    const double ej = e[static_cast<size_t>(j - 2)];
    if (ej == 0.0) return 0.0;

    std::vector<double> hi(static_cast<size_t>(m));
    hi[0] = y;
    for (int s = 2; s <= m; ++s) {
        double xs = x_tail[static_cast<size_t>(s - 2)];
        if (s < j) xs -= e[static_cast<size_t>(s - 2)];
        hi[static_cast<size_t>(s - 1)] = xs;
    }
    std::vector<double> lo = hi;
    lo[static_cast<size_t>(j - 1)] -= ej;
    return (eval_f(sys, i, t, hi) - eval_f(sys, i, t, lo)) / ej;
}

DifferenceDecomposition decompose(const TriangularSystem& sys, int i, double t, double y,
                                  std::span<const double> x_tail,
                                  std::span<const double> z_tail) {
    const int m = sys.arity(i);
    if (x_tail.size() != z_tail.size() || static_cast<int>(x_tail.size()) != m - 1)
        throw UsageError("decompose: tail length mismatch");
    DifferenceDecomposition d;
    d.i = i;
    std::vector<double> e(x_tail.size());
    for (size_t k = 0; k < e.size(); ++k) e[k] = x_tail[k] - z_tail[k];
    for (int j = 2; j <= m; ++j)
        d.coeffs.push_back(delta(sys, i, j, t, y, x_tail,
                                 std::span<const double>(e.data(), static_cast<size_t>(j - 1))));
    return d;
}

Mat assemble_A(const TriangularSystem& sys, int k, double t, std::span<const double> q_lower,
               std::span<const double> x, std::span<const double> e_level, double y) {
    const int n = sys.n;
    if (k < 2 || k > n) throw UsageError("assemble_A: level out of range");
    if (static_cast<int>(e_level.size()) != k) throw UsageError("assemble_A: error vector length mismatch");
    if (static_cast<int>(x.size()) != n) throw UsageError("assemble_A: state length mismatch");
    if (static_cast<int>(q_lower.size()) != q_lower_size(k))
        throw UsageError("assemble_A: q block length mismatch");

    const int off = n - k; // global index shift
    Mat a(k, k);
    size_t qi = 0;
    for (int i = 1; i <= k; ++i) {
        for (int j = 1; j <= i; ++j) a(i - 1, j - 1) = q_lower[qi++];
        if (i < k) {
            // superdiagonal: delta_{gi, gi+1} with zero-padded error prefix
            const int gi = off + i;
            std::vector<double> xt(static_cast<size_t>(gi));
            for (int s = 2; s <= gi + 1; ++s) xt[static_cast<size_t>(s - 2)] = x[static_cast<size_t>(s - 1)];
            std::vector<double> e(static_cast<size_t>(gi));
            for (int s = 2; s <= gi + 1; ++s)
                e[static_cast<size_t>(s - 2)] = (s > off) ? e_level[static_cast<size_t>(s - off - 1)] : 0.0;
            a(i - 1, i) = delta(sys, gi, gi + 1, t, y, xt, e);
        }
        // entries strictly above the superdiagonal stay exactly 0
    }
    return a;
}

} // namespace hgo
