#pragma once

#include "hgo/divdiff.hpp"
#include "hgo/model.hpp"
#include "hgo/schedule.hpp"

#include <cstdint>
#include <functional>

namespace hgo {

struct OptBudget {
    int starts = 64;
    int sweeps = 12;
    int scan_points = 13;
    int golden_iters = 36;
};

struct EnvelopeConfig {
    double R = 1.0;
    double xi = 1.0;
    double majorant_safety = 1.1;
    double minorant_safety = 0.95;
    double min_safety = 0.9;
    OptBudget budget;
    std::uint64_t seed = 1;
};

// Majorant sigma_R of the summed slope magnitudes: at every node, value is
// the running maximum over earlier nodes of
//   safety * sum_{i=2..n} sum_{j=2..i} sup |delta_{i,j}|
// with the sup estimated over |y| <= beta(t,R), |x block| <= beta(t,R),
// |e block| <= xi. Nondecreasing and positive by construction.
ScalarSchedule sigma_majorant(const TriangularSystem& sys, const GrowthEnvelope& beta,
                              const EnvelopeConfig& cfg, const std::vector<double>& grid);

// Estimated minimum of delta_{i,i+1} over the constraint set
//   |y| <= beta(t,R), |(x_2..x_{i+1})| <= beta(t,R),
//   |(e_2..e_{i+1})| <= xi, |e_{i+1}| >= r.
// Raw multistart + per-coordinate golden-section estimate; d_min applies the
// min_safety factor and fails if the estimate is not positive.
double d_min_estimate(const TriangularSystem& sys, const GrowthEnvelope& beta,
                      const EnvelopeConfig& cfg, int i, double t, double r);
double d_min(const TriangularSystem& sys, const GrowthEnvelope& beta, const EnvelopeConfig& cfg,
             int i, double t, double r);

// Positive C^1 minorant of positive samples (t_k, v_k): node values sit at
// minorant_safety times the local lower envelope of the samples.
ScalarSchedule minorant_mu(const std::vector<double>& ts, const std::vector<double>& vs,
                           double minorant_safety = 0.95);

// Bundle handed to the synthesis stages.
struct Envelopes {
    GrowthEnvelope beta;
    ScalarSchedule sigma;
    std::function<double(int i, double t, double r)> dmin_raw;
    std::function<double(int i, double t, double r)> dmin;
};

Envelopes make_envelopes(const TriangularSystem& sys, const GrowthEnvelope& beta,
                         const EnvelopeConfig& cfg, const std::vector<double>& grid);

} // namespace hgo
