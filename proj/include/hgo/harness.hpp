#pragma once

#include "hgo/model.hpp"
#include "hgo/switching.hpp"
#include "hgo/synthesis.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hgo {

// Experiment description, loaded from a JSON config. Unknown keys are
// rejected so typos fail loudly instead of silently using defaults.
struct ExperimentConfig {
    std::string system = "example2d";
    std::string mode = "synthesize"; // simulate|synthesize|observe|switching|verify|example
    std::uint64_t seed = 1;

    double t0 = 0.0;
    double horizon = 40.0;
    double grid_dt = 0.05;
    double step = 1e-3;

    double R = 3.0;
    double L = 2.0;
    double lambda = 0.5;
    double xi = 0.0; // 0 = admissibility threshold ("auto")

    std::vector<double> x0;
    double rho = 1.0;
    double c_eff = 0.5;

    long phi_tuples = 2000;
    long fresh = 100000;
    int starts = 64;
    long monotone_samples = 10000;

    double majorant_safety = 1.1, minorant_safety = 0.95, min_safety = 0.9;
    double schur_margin = 1.1, phi_safety = 1.25, phi_min = 1e-6, phi_cap = 1e200;
    double final_margin = 0.25;

    std::string out = "out";
    std::string schedule_path;

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);
    void validate() const;

    SynthesisConfig synthesis_config(const GrowthEnvelope& beta, int n) const;
    SwitchingPolicy switching_policy(const GrowthEnvelope& beta, int n) const;
};

struct ViolationReport {
    std::vector<CheckResult> checks;
    bool pass() const {
        for (const auto& c : checks)
            if (!c.pass()) return false;
        return true;
    }
};

// Runs one experiment; writes all artifacts under cfg.out and a summary with
// one pass/fail line per check. Returns the process exit code (0 pass,
// 1 numerical failure, 2 usage error).
int run_experiment(const ExperimentConfig& cfg);

// Re-verifies a saved schedule against a named system.
ViolationReport verify_schedule(const std::string& schedule_file, const ExperimentConfig& cfg);

// built-in config for the switching reproduction of the benchmark system
ExperimentConfig example_config();

} // namespace hgo
