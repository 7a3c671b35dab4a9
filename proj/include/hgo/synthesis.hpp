#pragma once

#include "hgo/envelopes.hpp"
#include "hgo/model.hpp"
#include "hgo/schedule.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace hgo {

struct SynthesisConfig {
    double R = 1.0;
    double xi = 1.0;   // >= 1; observer runs require the admissibility threshold
    double L = 2.0;    // > 1
    double t0 = 0.0;
    double horizon = 40.0;
    double h_grid = 0.05;
    double lambda = 0.5; // gain decay rate, in (0, 1]

    double majorant_safety = 1.1;
    double minorant_safety = 0.95;
    double min_safety = 0.9;
    double schur_margin = 1.1;
    double phi_safety = 1.25;
    double phi_min = 1e-6;
    double phi_cap = 1e200;
    double final_margin = 0.25; // decay margin used for the top-level gain

    OptBudget budget;
    long phi_tuples = 2000;      // per grid node
    long fresh_samples = 100000; // per sampled certificate
    int tr_grid_t = 200, tr_grid_r = 50;
    std::uint64_t seed = 1;

    double c1() const { return 1.0; }
    double c2(int n) const { return static_cast<double>(n); }

    void validate() const;
    EnvelopeConfig envelope_config() const;
};

// admissibility threshold sqrt(L) * exp(2 c2) * beta(t0bar, R + 1)
double admissible_xi(const GrowthEnvelope& beta, double t0bar, double R, double L, int n);

struct LevelCertificate {
    int level = 0;
    MatrixSchedule P;
    ScalarSchedule d;
    ScalarSchedule dbar; // d - 1/2
    ScalarSchedule pR;
    ScalarSchedule pR1;
    ScalarSchedule phi; // empty until derive_gain runs
    double M = 0.0;
    double tau = 0.0;
};

// minorant record kept for hold-out verification: mu(t) <= delta_{i,i+1}
// samples over the constraint set with floor r(t)
struct MinorantRecord {
    int index = 0; // i
    ScalarSchedule mu;
    ScalarSchedule r;
};

struct ObserverGainSchedule {
    int n = 0;
    std::string system;
    double R = 0.0, xi = 0.0, L = 0.0;
    double t0bar = 0.0, horizon = 0.0, h_grid = 0.0;
    double margin = 0.25; // gain was built against d - margin
    GainDecay gain;
    ScalarSchedule sigma;
    ScalarSchedule d;
    ScalarSchedule phi;
    MatrixSchedule P;
    std::vector<MinorantRecord> minorants;

    double t_end() const { return t0bar + horizon; }
};

// C^1 ramp: 0 at t0, 1 from t0 + tau/2 on, values in [0, 1], flat ends
ScalarSchedule theta_ramp(double t0, double tau);

LevelCertificate base_case(const TriangularSystem& sys, const SynthesisConfig& cfg,
                           const Envelopes& env, const GainDecay& g,
                           std::vector<MinorantRecord>* minorants = nullptr);

// Border completion: top-left entry making the bordered matrix
// [[p_{R,1}, p_R e_1'], [p_R e_1, P_lower]] stay above the identity with
// norm at most L at t0.
ScalarSchedule p_r1_completion(const MatrixSchedule& P_lower, const ScalarSchedule& pR, double L,
                               const std::vector<double>& grid, double schur_margin);

// Positive C^1 gain dominating the sampled ratio
//   [e'PAe + 1/2 e'P'e + margin e'Pe] / e_1^2
// over feasible tuples with |e_1| >= eps_floor.
ScalarSchedule derive_gain(const LevelCertificate& cert, const TriangularSystem& sys,
                               const SynthesisConfig& cfg, const Envelopes& env,
                               const GainDecay& g, const ScalarSchedule& margin);

LevelCertificate induction_step(const LevelCertificate& cert_k, const TriangularSystem& sys,
                                const SynthesisConfig& cfg, const Envelopes& env,
                                const GainDecay& g, std::vector<MinorantRecord>* minorants);

ObserverGainSchedule synthesize(const TriangularSystem& sys, const GrowthEnvelope& beta,
                                const SynthesisConfig& cfg);

struct CheckResult {
    std::string name;
    long samples = 0;
    long violations = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    double worst_t = 0.0;
    std::string note;
    bool pass() const { return violations == 0; }
};

CheckResult check_kernel_inequality(const ObserverGainSchedule& sched, const TriangularSystem& sys,
                                    const GrowthEnvelope& beta, long samples, std::uint64_t seed);
CheckResult check_full_inequality(const ObserverGainSchedule& sched, const TriangularSystem& sys,
                                  const GrowthEnvelope& beta, long samples, std::uint64_t seed);
CheckResult check_P_bounds(const ObserverGainSchedule& sched);
CheckResult check_d_bounds(const ObserverGainSchedule& sched);
CheckResult check_d_integrals(const ObserverGainSchedule& sched);
CheckResult check_gain_conditions(const ObserverGainSchedule& sched);
CheckResult check_sigma_holdout(const ObserverGainSchedule& sched, const TriangularSystem& sys,
                                const GrowthEnvelope& beta, long samples, std::uint64_t seed);
CheckResult check_mu_holdout(const ObserverGainSchedule& sched, const TriangularSystem& sys,
                             const GrowthEnvelope& beta, long samples, std::uint64_t seed);
std::vector<CheckResult> run_all_checks(const ObserverGainSchedule& sched,
                                        const TriangularSystem& sys, const GrowthEnvelope& beta,
                                        long fresh_samples, std::uint64_t seed);

// schedule file round-trip (text manifest + CSV blocks, 17 significant digits)
void save_schedule(const ObserverGainSchedule& sched, const std::string& path);
ObserverGainSchedule load_schedule(const std::string& path);

} // namespace hgo
