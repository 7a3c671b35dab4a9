#pragma once

#include <span>
#include <vector>

namespace hgo {

// Small dense matrix, row-major. Everything in this project is n x n with
// n <= a handful, so no effort is spent on blocking or expression templates.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

    static Mat identity(int n);
    bool finite() const;
};

Mat operator+(const Mat& x, const Mat& y);
Mat operator-(const Mat& x, const Mat& y);
Mat operator*(const Mat& x, double s);

// y' M x
double quad_form(const Mat& m, std::span<const double> y, std::span<const double> x);

// eigenvalues of a symmetric matrix (cyclic Jacobi), ascending
std::vector<double> sym_eigenvalues(const Mat& m);

// spectral norm of a symmetric matrix
double sym_norm(const Mat& m);

// Cholesky solve of an SPD system; throws EvalError if not positive definite
std::vector<double> spd_solve(const Mat& m, std::span<const double> rhs);

// positive semidefiniteness of a symmetric matrix via diagonally scaled
// Cholesky; meaningful even when entries span many orders of magnitude
bool sym_psd(const Mat& m, double rel_tol = 1e-12);

double norm2(std::span<const double> v);
double dot(std::span<const double> x, std::span<const double> y);

} // namespace hgo
