#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hgo/errors.hpp"
#include "hgo/harness.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hgo;

namespace {

std::string file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

const char* small_observe_json = R"({
  "system": "example2d",
  "mode": "observe",
  "seed": 4,
  "horizon": 5.0,
  "grid_dt": 0.1,
  "step": 1e-3,
  "R": 3.0,
  "L": 2.0,
  "lambda": 0.35,
  "x0": [1.0, 1.0],
  "budgets": {"phi_tuples": 500, "fresh": 15000},
  "out": "hq_observe"
})";

} // namespace

TEST_CASE("config parsing applies defaults and validates") {
    auto cfg = ExperimentConfig::from_json_text(R"({"mode":"simulate"})");
    CHECK(cfg.system == "example2d");
    CHECK(cfg.L == 2.0);
    CHECK(cfg.xi == 0.0); // admissibility threshold

    CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"mode":"simulate","typo_key":1})"),
                    UsageError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"mode":"simulate","policy":{"rho":1,"bad":2}})"),
                    UsageError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"mode":"fly"})"), UsageError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"mode":"simulate","L":1.0})"), UsageError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"mode":"simulate","L":0.5})"), UsageError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"mode":"simulate","xi":"sideways"})"),
                    UsageError);
    auto c2 = ExperimentConfig::from_json_text(R"({"mode":"simulate","xi":"auto"})");
    CHECK(c2.xi == 0.0);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text("not json"), UsageError);
}

TEST_CASE("simulate mode writes a deterministic plant trace") {
    auto cfg = ExperimentConfig::from_json_text(
        R"({"mode":"simulate","horizon":2.0,"x0":[1.0,1.0],"out":"hq_sim"})");
    CHECK(run_experiment(cfg) == 0);
    CHECK(std::filesystem::exists("hq_sim/plant.csv"));
    CHECK(std::filesystem::exists("hq_sim/summary.txt"));
    std::string first = file_bytes("hq_sim/plant.csv");
    CHECK(run_experiment(cfg) == 0);
    CHECK(file_bytes("hq_sim/plant.csv") == first);
}

TEST_CASE("observe mode synthesizes, simulates, checks and is reproducible") {
    auto cfg = ExperimentConfig::from_json_text(small_observe_json);
    CHECK(run_experiment(cfg) == 0);
    CHECK(std::filesystem::exists("hq_observe/schedule.txt"));
    CHECK(std::filesystem::exists("hq_observe/observer.csv"));
    std::string sched = file_bytes("hq_observe/schedule.txt");
    std::string obs = file_bytes("hq_observe/observer.csv");
    CHECK(run_experiment(cfg) == 0);
    CHECK(file_bytes("hq_observe/schedule.txt") == sched);
    CHECK(file_bytes("hq_observe/observer.csv") == obs);
}

TEST_CASE("verify mode re-checks a saved schedule and catches tampering") {
    auto cfg = ExperimentConfig::from_json_text(small_observe_json);
    if (!std::filesystem::exists("hq_observe/schedule.txt")) run_experiment(cfg);

    ExperimentConfig vcfg = cfg;
    vcfg.mode = "verify";
    vcfg.schedule_path = "hq_observe/schedule.txt";
    vcfg.out = "hq_verify";
    vcfg.fresh = 10000;
    CHECK(run_experiment(vcfg) == 0);

    // lower the decay function in the file and watch the check fail
    auto sched = load_schedule("hq_observe/schedule.txt");
    for (auto& v : sched.d.v) v -= 2.0;
    save_schedule(sched, "hq_verify/tampered.txt");
    vcfg.schedule_path = "hq_verify/tampered.txt";
    CHECK(run_experiment(vcfg) == 1);

    vcfg.schedule_path = "";
    CHECK_THROWS_AS(run_experiment(vcfg), UsageError);
}

TEST_CASE("switching mode writes the plan, window schedules and estimate") {
    auto cfg = ExperimentConfig::from_json_text(R"({
      "system": "example2d", "mode": "switching", "seed": 2,
      "horizon": 18.0, "grid_dt": 0.1, "step": 1e-3,
      "L": 2.0, "lambda": 0.2, "x0": [2.0, -1.0],
      "policy": {"rho": 3.0, "c_eff": 0.5},
      "budgets": {"phi_tuples": 500, "fresh": 15000},
      "out": "hq_switch"
    })");
    CHECK(run_experiment(cfg) == 0);
    CHECK(std::filesystem::exists("hq_switch/plan.json"));
    CHECK(std::filesystem::exists("hq_switch/window_1.schedule"));
    CHECK(std::filesystem::exists("hq_switch/z.csv"));
    CHECK(std::filesystem::exists("hq_switch/plant.csv"));
}

TEST_CASE("the built-in reproduction config targets the switching mode") {
    auto cfg = example_config();
    CHECK(cfg.mode == "switching");
    CHECK(cfg.system == "example2d");
    CHECK(cfg.horizon == 60.0);
    CHECK(cfg.x0.size() == 2);
}
