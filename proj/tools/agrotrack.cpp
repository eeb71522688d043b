#include <CLI11.hpp>

#include <optional>
#include <string>
#include <vector>

#include "agrotrack/cli.hpp"

namespace {

std::string join_args(int argc, char** argv) {
  std::string line;
  for (int i = 0; i < argc; ++i) {
    if (i) line += ' ';
    line += argv[i];
  }
  return line;
}

std::vector<std::uint32_t> parse_counts(const std::string& csv) {
  std::vector<std::uint32_t> counts;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) counts.push_back(std::stoul(item));
  return counts;
}

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> values;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace agrotrack;

  CLI::App app{"AgroTrack: LoRa livestock-monitoring network simulator and analytic toolkit"};
  app.require_subcommand(1);

  cli::CommonOptions opts;
  opts.command_line = join_args(argc, argv);
  std::uint64_t seed_flag = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--jobs", opts.jobs, "parallel run workers");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { seed_flag = v; seed_set = true; }, "seed override");
  };

  std::string scenario_path;
  std::string counts_csv = "50,100,200,300,400,500,600";
  std::uint32_t replicates = 10;
  std::uint32_t max_failures = 4;
  std::string distances_csv = "100,500,1000,2000,3000,4000,5000,6000,6500,7000";
  std::string intervals_csv = "300,600,900";
  std::string points_path;
  std::string base_scenario;

  auto* simulate = app.add_subcommand("simulate", "run one scenario and emit its report");
  simulate->add_option("scenario", scenario_path, "scenario JSON")->required();
  add_common(simulate);

  auto* sweep = app.add_subcommand("sweep", "scalability sweep over herd sizes");
  sweep->add_option("scenario", scenario_path, "scenario JSON")->required();
  sweep->add_option("--counts", counts_csv, "comma-separated animal counts");
  sweep->add_option("--replicates", replicates, "replicates per count");
  add_common(sweep);

  auto* failures = app.add_subcommand("failures", "recovery vs simultaneous gateway failures");
  failures->add_option("scenario", scenario_path, "scenario JSON")->required();
  failures->add_option("--max-failures", max_failures, "largest failure count");
  failures->add_option("--replicates", replicates, "replicates per row");
  add_common(failures);

  auto* linkbudget = app.add_subcommand("linkbudget", "path loss / SNR / margin / success table");
  linkbudget->add_option("--scenario", base_scenario, "take radio+channel from this scenario");
  linkbudget->add_option("--distances", distances_csv, "comma-separated distances (m)");
  double flag_sf = -1, flag_txp = std::nan(""), flag_delta = std::nan(""), flag_sigma = std::nan("");
  linkbudget->add_option("--sf", flag_sf, "spreading factor override");
  linkbudget->add_option("--tx-power-dbm", flag_txp, "transmit power override");
  linkbudget->add_option("--obstruction-penalty-db", flag_delta, "obstruction penalty override");
  linkbudget->add_option("--sigma-db", flag_sigma, "shadowing sigma override");
  add_common(linkbudget);

  auto* battery = app.add_subcommand("battery", "duty-cycle lifetime table and depletion series");
  battery->add_option("--scenario", base_scenario, "take energy profile from this scenario");
  battery->add_option("--intervals", intervals_csv, "comma-separated reporting intervals (s)");
  add_common(battery);

  auto* fit = app.add_subcommand("fit", "fit the two-regime success curve to measured points");
  fit->add_option("points", points_path, "CSV with distance_m,success columns")->required();
  add_common(fit);

  auto* validate = app.add_subcommand("validate", "validate a scenario file");
  validate->add_option("scenario", scenario_path, "scenario JSON")->required();
  add_common(validate);

  auto* selfcheck = app.add_subcommand("selfcheck", "emit and re-parse every artifact format");
  add_common(selfcheck);

  CLI11_PARSE(app, argc, argv);
  if (seed_set) opts.seed = seed_flag;

  auto scenario_or_defaults = [&]() -> sim::Scenario {
    if (base_scenario.empty()) return sim::Scenario{};
    return cli::load_scenario(base_scenario, opts);
  };

  try {
    if (simulate->parsed()) return cli::cmd_simulate(scenario_path, opts);
    if (sweep->parsed())
      return cli::cmd_sweep(scenario_path, parse_counts(counts_csv), replicates, opts);
    if (failures->parsed()) return cli::cmd_failures(scenario_path, max_failures, replicates, opts);
    if (linkbudget->parsed()) {
      sim::Scenario sc;
      try {
        sc = scenario_or_defaults();
      } catch (const sim::ValidationError& e) {
        cli::print_error(cli::kValidation, "validation", e.issues());
        return cli::kValidation;
      }
      if (flag_sf > 0) sc.radio.spreading_factor = static_cast<int>(flag_sf);
      if (!std::isnan(flag_txp)) sc.radio.tx_power_dbm = flag_txp;
      if (!std::isnan(flag_delta)) sc.channel_params.obstruction_penalty_db = flag_delta;
      if (!std::isnan(flag_sigma)) sc.channel_params.shadowing_sigma_db = flag_sigma;
      return cli::cmd_linkbudget(sc, parse_doubles(distances_csv), opts);
    }
    if (battery->parsed()) {
      sim::Scenario sc;
      try {
        sc = scenario_or_defaults();
      } catch (const sim::ValidationError& e) {
        cli::print_error(cli::kValidation, "validation", e.issues());
        return cli::kValidation;
      }
      const auto intervals = parse_doubles(intervals_csv);
      if (intervals.empty()) {
        cli::print_error(cli::kValidation, "validation", {"--intervals must be non-empty"});
        return cli::kValidation;
      }
      return cli::cmd_battery(sc, intervals, opts);
    }
    if (fit->parsed()) return cli::cmd_fit(points_path, opts);
    if (validate->parsed()) return cli::cmd_validate(scenario_path, opts);
    if (selfcheck->parsed()) return cli::cmd_selfcheck(opts);
  } catch (const std::exception& e) {
    cli::print_error(cli::kInternal, "internal", {e.what()});
    return cli::kInternal;
  }
  return cli::kInternal;
}
