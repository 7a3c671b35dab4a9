#pragma once

#include "hgo/model.hpp"
#include "hgo/synthesis.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hgo {

// Fixed-step trajectory record. Column layout is t, state..., y plus the
// optional observer bookkeeping columns.
struct Trace {
    double t0 = 0.0;
    double h = 0.0;
    std::vector<double> t;
    std::vector<std::vector<double>> state;
    std::vector<double> y;
    // observer traces carry these, aligned with t
    std::vector<double> abs_e, bound_exp, bound_g;
    std::vector<int> window;

    size_t size() const { return t.size(); }
    int dim() const { return state.empty() ? 0 : static_cast<int>(state.front().size()); }
};

// classical fixed-step 4th order integration of the plant
Trace integrate_plant(const TriangularSystem& sys, double t0, std::span<const double> x0,
                      double t_end, double h);

// Output signal with derivative data for stage-time interpolation.
struct YSource {
    std::vector<double> t, y, ydot;
    std::function<double(double)> callback; // exact signal when set

    double operator()(double tt) const;
    bool covers(double a, double b) const;
    static YSource from_trace(const Trace& tr, const TriangularSystem& sys);
    static YSource from_callback(std::function<double(double)> fn);
};

// Observer integration z' = F(t, z, y) + phi P^{-1} H' (y - z_1).
// The correction makes the system stiff in proportion to the synthesized
// gain, so the stepper is a fixed-step L-stable two-stage SDIRK with an
// exact Jacobian for the injection term. Deterministic for fixed inputs.
Trace run_observer(const ObserverGainSchedule& sched, const YSource& y_source,
                   const TriangularSystem& sys, double t0bar, double t_end, double h,
                   std::span<const double> z0);

struct EnvelopeReport {
    long nodes_checked = 0;
    long violations_13a = 0; // |e| < xi everywhere
    long violations_13b = 0; // decay envelope from one unit after start
    double max_ratio = 0.0;  // worst |e| / bound
    double worst_t = 0.0;
    bool pass() const { return violations_13a == 0 && violations_13b == 0; }
};

// Compares aligned plant/observer traces against the error envelopes with
// decay rate c (default 1/2).
EnvelopeReport check_error_envelope(const Trace& x_trace, const Trace& z_trace,
                                    const ObserverGainSchedule& sched, double rate = 0.5);

void write_trace_csv(const Trace& tr, const std::string& path, bool observer_columns);
Trace read_trace_csv(const std::string& path);

} // namespace hgo
