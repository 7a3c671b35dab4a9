#pragma once

#include "hgo/model.hpp"
#include "hgo/runtime.hpp"
#include "hgo/synthesis.hpp"

#include <string>
#include <vector>

namespace hgo {

struct SwitchingPolicy {
    double rho = 1.0;     // radius growth R_k = k * rho
    double c_eff = 0.5;   // decay rate used to size the windows
    double horizon = 60.0;
    double step = 1e-3;   // integration step; switch times snap to this grid
    SynthesisConfig base; // per-window synthesis parameters (R, xi, t0, horizon overridden)
};

struct WindowPlan {
    int k = 0;
    double t_start = 0.0; // integration start t_{k-1}
    double t_pub = 0.0;   // publication start t_k
    double t_end = 0.0;   // window end t_{k+1}
    double R = 0.0;
    double xi = 0.0;
    ObserverGainSchedule schedule;
};

struct SwitchingPlan {
    double t0 = 0.0;
    double horizon = 0.0;
    SwitchingPolicy policy;
    std::vector<double> times; // t_1 = t0 < t_2 < ... (grid-snapped)
    std::vector<WindowPlan> windows;

    std::string manifest_json() const;
};

// Switch-time arithmetic alone (no synthesis): times t_1 = t0 < t_2 < ...,
// window radii R_k = k rho and admissible thresholds xi_k. Times are snapped
// up onto the integration grid.
struct SwitchTimetable {
    std::vector<double> times;
    std::vector<double> radii;
    std::vector<double> xis;
};
SwitchTimetable compute_switching_times(const GrowthEnvelope& beta, int n, double t0,
                                        const SwitchingPolicy& policy);

// Builds the switching schedule: R_k = k rho, xi_k admissible for
// (t_{k-1}, R_k), window lengths sized so the decay envelope contracts by
// 1/(k+1) across consecutive windows, one gain synthesis per window.
SwitchingPlan plan_switching(const TriangularSystem& sys, const GrowthEnvelope& beta, double t0,
                             const SwitchingPolicy& policy);

struct SwitchingRun {
    Trace x;                      // hidden plant trace (global grid)
    Trace Z;                      // published piecewise estimate
    std::vector<Trace> window_z;  // per-window observer traces
    std::vector<bool> window_ok;  // false if the window diverged
};

SwitchingRun run_switching(const TriangularSystem& sys, std::span<const double> x0_hidden,
                           const SwitchingPlan& plan);

// envelope check of window k against the hidden trace, restricted to the
// window's integration interval
EnvelopeReport check_window_envelope(const SwitchingRun& run, const SwitchingPlan& plan, int k,
                                     double rate = 0.5);

} // namespace hgo
