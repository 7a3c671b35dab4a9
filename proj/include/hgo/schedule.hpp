#pragma once

#include "hgo/linalg.hpp"

#include <span>
#include <vector>

namespace hgo {

// Time-gridded C^1 scalar function: node values plus node slopes, cubic
// Hermite in between, constant (slope zero) outside the node range. Grids
// are sorted and may be non-uniform; ramp constructions insert fine nodes
// only where the function actually moves.
struct ScalarSchedule {
    std::vector<double> t;
    std::vector<double> v;
    std::vector<double> s;
    bool nondecreasing = false;
    bool positive = false;

    double eval(double x) const;
    double deriv(double x) const;
    double operator()(double x) const { return eval(x); }

    double t_front() const { return t.front(); }
    double t_back() const { return t.back(); }
    size_t size() const { return t.size(); }

    // trapezoid over the node refinement of [a, b]
    double integrate_trapezoid(double a, double b) const;
    // maximum of node values restricted to [a, b] (plus the endpoint values)
    double max_on(double a, double b) const;

    void check_flags() const; // throws if a declared flag fails at the nodes

    static ScalarSchedule constant(double t0, double t1, double value);
    // monotonicity-limited (Fritsch-Carlson) slopes from values alone
    static ScalarSchedule from_values(std::vector<double> t, std::vector<double> v);
    // explicit values and slopes
    static ScalarSchedule from_nodes(std::vector<double> t, std::vector<double> v,
                                     std::vector<double> s);
};

// merge sorted node sets, dropping near-duplicates
std::vector<double> merge_grids(std::span<const std::vector<double>> grids);
std::vector<double> uniform_grid(double t0, double t1, double h);

// Entrywise-Hermite symmetric matrix schedule.
struct MatrixSchedule {
    int k = 0;
    std::vector<double> t;
    std::vector<Mat> v;
    std::vector<Mat> s;

    Mat eval(double x) const;
    Mat deriv(double x) const;
    size_t size() const { return t.size(); }
};

} // namespace hgo
