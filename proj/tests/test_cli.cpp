#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "agrotrack/channel.hpp"
#include "agrotrack/csv.hpp"
#include "agrotrack/engine.hpp"
#include "agrotrack/sweep.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace agrotrack;

namespace {

const std::string kCli = AGROTRACK_CLI_PATH;
const std::string kScenarios = AGROTRACK_SCENARIO_DIR;

struct CliResult {
  int exit_code;
  std::string stdout_text;
};

CliResult run_cli(const std::string& args, const std::string& env = "") {
  const fs::path out = fs::temp_directory_path() / "agrotrack_cli_stdout.txt";
  const std::string cmd = env + " " + kCli + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WEXITSTATUS(status), ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("agrotrack_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Short-run override so CLI tests stay fast.
const char* kShortTrial = "AGROTRACK_OVERRIDE='{\"duration_s\": 43200}'";

}  // namespace

TEST(Cli, ValidateAcceptsBundledScenarios) {
  for (const char* name : {"trial_baseline.json", "scaling.json", "robustness.json"}) {
    const auto r = run_cli("validate " + kScenarios + "/" + name);
    EXPECT_EQ(r.exit_code, 0) << r.stdout_text;
    EXPECT_NE(r.stdout_text.find("ok:"), std::string::npos);
  }
}

TEST(Cli, CorruptScenarioExitsTwoWithoutOutputs) {
  const fs::path dir = fresh_dir("corrupt");
  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << "{ not json";
  const fs::path out = dir / "out";
  const auto r = run_cli("simulate " + bad.string() + " --out " + out.string());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.stdout_text.find("\"error\""), std::string::npos);
  EXPECT_FALSE(fs::exists(out / "summary.json"));
}

TEST(Cli, UnknownKeyExitsTwoWithFieldMessage) {
  const fs::path dir = fresh_dir("unknown");
  json doc;
  std::ifstream(kScenarios + "/trial_baseline.json") >> doc;
  doc["channel"]["fog_density"] = 1.0;
  const fs::path bad = dir / "unknown.json";
  std::ofstream(bad) << doc.dump();
  const auto r = run_cli("simulate " + bad.string() + " --out " + (dir / "out").string());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.stdout_text.find("fog_density"), std::string::npos);
}

TEST(Cli, InfeasiblePhysicsExitsThree) {
  const auto r = run_cli("simulate " + kScenarios + "/trial_baseline.json --out /tmp/agat_phys",
                         "AGROTRACK_OVERRIDE='{\"energy\": {\"t_sense_s\": 400.0}}'");
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.stdout_text.find("infeasible_physics"), std::string::npos);
}

TEST(Cli, SimulateEmitsReportAndManifest) {
  const fs::path out = fresh_dir("simulate");
  const auto r = run_cli("simulate " + kScenarios + "/trial_baseline.json --seed 42 --out " +
                             out.string(),
                         kShortTrial);
  ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
  for (const char* f : {"summary.json", "throughput.csv", "battery.csv", "alerts.csv",
                        "distance_histogram.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  json summary;
  std::ifstream(out / "summary.json") >> summary;
  EXPECT_GE(summary["pdr"].get<double>(), 0.96);
  json manifest;
  std::ifstream(out / "manifest.json") >> manifest;
  EXPECT_EQ(manifest["seed"].get<std::uint64_t>(), 42u);
  EXPECT_FALSE(manifest["scenario_hash"].get<std::string>().empty());
  EXPECT_TRUE(manifest.contains("wall_clock_s"));
}

TEST(Cli, RepeatedSeedsProduceByteIdenticalFiles) {
  const fs::path a = fresh_dir("det_a");
  const fs::path b = fresh_dir("det_b");
  ASSERT_EQ(run_cli("simulate " + kScenarios + "/trial_baseline.json --seed 7 --out " + a.string(),
                    kShortTrial)
                .exit_code,
            0);
  ASSERT_EQ(run_cli("simulate " + kScenarios + "/trial_baseline.json --seed 7 --out " + b.string(),
                    kShortTrial)
                .exit_code,
            0);
  for (const char* f :
       {"summary.json", "throughput.csv", "battery.csv", "alerts.csv", "distance_histogram.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;  // manifest excluded: wall clock varies
  }
}

TEST(Cli, SeedPrecedenceFileEnvFlag) {
  const fs::path out1 = fresh_dir("seed_env");
  ASSERT_EQ(run_cli("simulate " + kScenarios + "/trial_baseline.json --out " + out1.string(),
                    std::string("AGROTRACK_SEED=50 ") + kShortTrial)
                .exit_code,
            0);
  json manifest;
  std::ifstream(out1 / "manifest.json") >> manifest;
  EXPECT_EQ(manifest["seed"].get<std::uint64_t>(), 50u);

  const fs::path out2 = fresh_dir("seed_flag");
  ASSERT_EQ(run_cli("simulate " + kScenarios + "/trial_baseline.json --seed 60 --out " +
                        out2.string(),
                    std::string("AGROTRACK_SEED=50 ") + kShortTrial)
                .exit_code,
            0);
  std::ifstream(out2 / "manifest.json") >> manifest;
  EXPECT_EQ(manifest["seed"].get<std::uint64_t>(), 60u);
}

TEST(Cli, BatteryTableReproducesLifetimeAnchors) {
  const fs::path out = fresh_dir("battery");
  const auto r = run_cli("battery --intervals 300,600,900 --out " + out.string());
  ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
  const io::CsvTable table = io::parse_csv_file(out / "battery_lifetime.csv");
  ASSERT_EQ(table.rows.size(), 3u);
  const double days_300 = std::stod(table.rows[0][4]);
  EXPECT_NEAR(days_300, 28.0, 28.0 * 0.05);
  EXPECT_GT(std::stod(table.rows[1][4]), 42.0);
  EXPECT_GT(std::stod(table.rows[2][4]), 42.0);

  const io::CsvTable series = io::parse_csv_file(out / "battery_depletion.csv");
  EXPECT_NEAR(static_cast<double>(series.rows.size()), 29.0, 1.0);  // ~28 days + day 0
  // Linear coulomb decline: constant per-day drop.
  const double first_drop = std::stod(series.rows[0][1]) - std::stod(series.rows[1][1]);
  const double later_drop = std::stod(series.rows[10][1]) - std::stod(series.rows[11][1]);
  EXPECT_NEAR(first_drop, later_drop, 1e-9);
}

TEST(Cli, BatteryInfeasibleIntervalExitsThree) {
  const auto r = run_cli("battery --intervals 20 --out /tmp/agat_b3");
  EXPECT_EQ(r.exit_code, 3);
}

TEST(Cli, LinkbudgetAnchorsAndOrdering) {
  const fs::path out = fresh_dir("linkbudget");
  const auto r = run_cli("linkbudget --distances 100,3000,6500 --out " + out.string());
  ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
  const io::CsvTable table = io::parse_csv_file(out / "linkbudget.csv");
  ASSERT_EQ(table.rows.size(), 3u);
  EXPECT_DOUBLE_EQ(std::stod(table.rows[0][1]), 79.0);  // PL(d0) column
  for (const auto& row : table.rows) {
    EXPECT_LE(std::stod(row[5]), std::stod(row[4]));  // obstructed <= LoS
  }
  EXPECT_GE(std::stod(table.rows[2][4]), 0.5);  // 6.5 km LoS anchor
}

TEST(Cli, LinkbudgetRejectsBadSpreadingFactor) {
  const auto r = run_cli("linkbudget --sf 15 --out /tmp/agat_lb2");
  EXPECT_EQ(r.exit_code, 2);
}

TEST(Cli, FitRoundTripsAndReloadsIdentically) {
  const fs::path dir = fresh_dir("fit");
  channel::TwoRegimeFit truth;
  truth.obstructed_fraction = 0.2;
  truth.open_scale_m = 5200.0;
  truth.open_shape = 2.6;
  truth.obstructed_scale_m = 800.0;
  truth.obstructed_shape = 1.2;
  io::CsvBuilder pts({"distance_m", "success"});
  for (int i = 0; i < 30; ++i) {
    const double d = 100.0 * std::pow(80.0, i / 29.0);
    pts.cell(d).cell(channel::success_two_regime(d, truth));
    pts.end_row();
  }
  pts.save(dir / "points.csv");

  const auto r = run_cli("fit " + (dir / "points.csv").string() + " --out " + dir.string());
  ASSERT_EQ(r.exit_code, 0) << r.stdout_text;

  json fit_doc;
  std::ifstream(dir / "fit.json") >> fit_doc;
  channel::TwoRegimeFit loaded;
  loaded.obstructed_fraction = fit_doc["obstructed_fraction"];
  loaded.open_scale_m = fit_doc["open_scale_m"];
  loaded.open_shape = fit_doc["open_shape"];
  loaded.obstructed_scale_m = fit_doc["obstructed_scale_m"];
  loaded.obstructed_shape = fit_doc["obstructed_shape"];

  // The reloaded parameters must regenerate the emitted curve exactly.
  const io::CsvTable curve = io::parse_csv_file(dir / "fit_curve.csv");
  for (const auto& row : curve.rows) {
    const double d = std::stod(row[0]);
    EXPECT_NEAR(std::stod(row[1]), channel::success_two_regime(d, loaded), 1e-9);
  }
  // And reproduce the synthetic truth within fit tolerance.
  for (int i = 0; i < 30; ++i) {
    const double d = 100.0 * std::pow(80.0, i / 29.0);
    EXPECT_NEAR(channel::success_two_regime(d, loaded), channel::success_two_regime(d, truth),
                1e-4);
  }
}

TEST(Cli, FitRejectsTooFewPoints) {
  const fs::path dir = fresh_dir("fit_few");
  io::CsvBuilder pts({"distance_m", "success"});
  pts.cell(100.0).cell(0.99);
  pts.end_row();
  pts.cell(200.0).cell(0.98);
  pts.end_row();
  pts.save(dir / "points.csv");
  const auto r = run_cli("fit " + (dir / "points.csv").string() + " --out " + dir.string());
  EXPECT_EQ(r.exit_code, 2);
}

TEST(Cli, FailuresTableIsMonotoneFromOne) {
  const fs::path out = fresh_dir("failures");
  const auto r = run_cli("failures " + kScenarios + "/robustness.json --max-failures 2 " +
                         "--replicates 1 --out " + out.string());
  ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
  const io::CsvTable table = io::parse_csv_file(out / "recovery.csv");
  ASSERT_EQ(table.columns, (std::vector<std::string>{"failures", "recovery_ratio", "recovery_sd"}));
  ASSERT_EQ(table.rows.size(), 3u);
  EXPECT_DOUBLE_EQ(std::stod(table.rows[0][1]), 1.0);
  EXPECT_LE(std::stod(table.rows[1][1]), 1.0 + 1e-12);
  EXPECT_LE(std::stod(table.rows[2][1]), std::stod(table.rows[1][1]) + 1e-12);
}

TEST(Cli, FailuresRejectsTooFewGateways) {
  const auto r = run_cli("failures " + kScenarios + "/trial_baseline.json --max-failures 4 " +
                         "--replicates 1 --out /tmp/agat_f2");
  EXPECT_EQ(r.exit_code, 2);
}

TEST(Cli, SelfcheckPasses) {
  const fs::path out = fresh_dir("selfcheck");
  const auto r = run_cli("selfcheck --out " + out.string());
  EXPECT_EQ(r.exit_code, 0) << r.stdout_text;
  EXPECT_NE(r.stdout_text.find("selfcheck passed"), std::string::npos);
}

TEST(Cli, DegenerateSweepMatchesSingleRun) {
  // One count equal to the base herd and one replicate: the sweep row is the
  // plain run of the derived scenario.
  std::ifstream in(kScenarios + "/trial_baseline.json");
  json doc;
  in >> doc;
  doc["duration_s"] = 43200;
  const sim::Scenario base = sim::Scenario::from_json(doc);
  const auto rows = sim::sweep(base, {base.herd_count}, 1, 1);
  ASSERT_EQ(rows.size(), 1u);

  sim::Scenario derived = sim::scale_scenario(base, base.herd_count);
  std::uint64_t h = base.seed;
  rng::splitmix64(h);
  h ^= base.herd_count;
  rng::splitmix64(h);
  h ^= 0;
  derived.seed = rng::splitmix64(h);
  const sim::MetricsReport direct = sim::run(derived);
  EXPECT_DOUBLE_EQ(rows[0].pdr_mean, direct.pdr);
  EXPECT_DOUBLE_EQ(rows[0].throughput_mean, direct.mean_throughput_msg_s);
  EXPECT_DOUBLE_EQ(rows[0].loss_sd, 0.0);
}

TEST(Cli, ParallelSweepIsOrderDeterministic) {
  // Worker count must not affect the merged table.
  std::ifstream in(kScenarios + "/scaling.json");
  json doc;
  in >> doc;
  doc["duration_s"] = 3600;
  const sim::Scenario base = sim::Scenario::from_json(doc);
  const auto serial = sim::sweep(base, {20, 40}, 3, 1);
  const auto parallel = sim::sweep(base, {20, 40}, 3, 4);
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_DOUBLE_EQ(serial[i].pdr_mean, parallel[i].pdr_mean);
    EXPECT_DOUBLE_EQ(serial[i].loss_mean, parallel[i].loss_mean);
    EXPECT_DOUBLE_EQ(serial[i].throughput_mean, parallel[i].throughput_mean);
    EXPECT_DOUBLE_EQ(serial[i].pdr_sd, parallel[i].pdr_sd);
  }
}

TEST(Cli, ComparisonReferenceTableIsPinned) {
  const io::CsvTable table = io::parse_csv_file(fs::path(kScenarios) / "comparison_reference.csv");
  ASSERT_EQ(table.columns,
            (std::vector<std::string>{"metric", "agrotrack", "smartfarm_ble", "ruraltrack_gsm"}));
  ASSERT_EQ(table.rows.size(), 5u);
  EXPECT_EQ(table.rows[0][0], "transmission_range_km");
  EXPECT_DOUBLE_EQ(std::stod(table.rows[0][1]), 6.5);
  EXPECT_DOUBLE_EQ(std::stod(table.rows[0][2]), 2.0);
  EXPECT_DOUBLE_EQ(std::stod(table.rows[0][3]), 5.0);
  EXPECT_DOUBLE_EQ(std::stod(table.rows[1][1]), 28.0);
  EXPECT_DOUBLE_EQ(std::stod(table.rows[2][1]), 97.5);
  EXPECT_DOUBLE_EQ(std::stod(table.rows[3][1]), 20.0);
  EXPECT_DOUBLE_EQ(std::stod(table.rows[4][1]), 9.5);
}
