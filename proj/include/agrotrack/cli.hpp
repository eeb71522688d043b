#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "agrotrack/calibrate.hpp"
#include "agrotrack/csv.hpp"
#include "agrotrack/engine.hpp"
#include "agrotrack/fitting.hpp"
#include "agrotrack/sweep.hpp"

namespace agrotrack::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// Stable exit-code contract.
enum ExitCode : int {
  kOk = 0,
  kValidation = 2,
  kInfeasiblePhysics = 3,
  kInternal = 4,
};

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  fs::path out_dir = "out";
  unsigned jobs = 1;
  std::string command_line;
};

inline void print_error(int code, const std::string& kind, const std::vector<std::string>& messages) {
  json err;
  err["error"]["code"] = code;
  err["error"]["kind"] = kind;
  err["error"]["messages"] = messages;
  std::cout << err.dump(2) << "\n";
}

/// Environment layer of the config precedence (file < env < flags).
inline void apply_env(CommonOptions& opts) {
  if (const char* seed = std::getenv("AGROTRACK_SEED"); seed && !opts.seed)
    opts.seed = std::strtoull(seed, nullptr, 10);
  if (const char* out = std::getenv("AGROTRACK_OUT"); out && opts.out_dir == "out")
    opts.out_dir = out;
  if (const char* jobs = std::getenv("AGROTRACK_JOBS"); jobs && opts.jobs == 1)
    opts.jobs = static_cast<unsigned>(std::strtoul(jobs, nullptr, 10));
}

inline sim::Scenario load_scenario(const fs::path& path, const CommonOptions& opts,
                                   std::string* override_note = nullptr) {
  std::ifstream in(path);
  if (!in) throw sim::ValidationError({"cannot open scenario file: " + path.string()});
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw sim::ValidationError({std::string("scenario is not valid JSON: ") + e.what()});
  }
  if (const char* patch = std::getenv("AGROTRACK_OVERRIDE")) {
    try {
      doc.merge_patch(json::parse(patch));
      if (override_note) *override_note = patch;
    } catch (const json::exception& e) {
      throw sim::ValidationError({std::string("AGROTRACK_OVERRIDE is not valid JSON: ") + e.what()});
    }
  }
  sim::Scenario sc = sim::Scenario::from_json(doc);
  if (opts.seed) sc.seed = *opts.seed;
  return sc;
}

class Manifest {
 public:
  Manifest(const CommonOptions& opts, const sim::Scenario* sc) : start_(clock::now()) {
    doc_["command_line"] = opts.command_line;
    doc_["tool_version"] = sim::kToolVersion;
    doc_["jobs"] = opts.jobs;
    if (sc) {
      doc_["scenario_hash"] = sc->canonical_hash();
      doc_["seed"] = sc->seed;
      doc_["scenario_name"] = sc->name;
    }
    if (const char* patch = std::getenv("AGROTRACK_OVERRIDE")) doc_["env_override"] = patch;
  }

  void add_output(const fs::path& path) { outputs_.push_back(path.string()); }

  void save(const fs::path& dir) {
    doc_["outputs"] = outputs_;
    doc_["wall_clock_s"] =
        std::chrono::duration<double>(clock::now() - start_).count();
    io::write_file_atomic(dir / "manifest.json", doc_.dump(2) + "\n");
  }

 private:
  using clock = std::chrono::steady_clock;
  clock::time_point start_;
  json doc_;
  std::vector<std::string> outputs_;
};

inline void write_json(Manifest& manifest, const fs::path& path, const json& doc) {
  io::write_file_atomic(path, doc.dump(2) + "\n");
  manifest.add_output(path);
}

inline void write_csv(Manifest& manifest, const fs::path& path, const io::CsvBuilder& csv) {
  csv.save(path);
  manifest.add_output(path);
}

/// Emit the full per-run artifact set for one metrics report.
inline void emit_run_outputs(const sim::MetricsReport& report, const fs::path& dir,
                             Manifest& manifest) {
  write_json(manifest, dir / "summary.json", report.summary_json());
  write_csv(manifest, dir / "throughput.csv", report.throughput_csv());
  write_json(manifest, dir / "throughput.plot.json",
             sim::plot_spec("Cloud throughput", "time_s", "throughput_msg_per_s",
                            {"throughput_msg_per_s"}));
  write_csv(manifest, dir / "battery.csv", report.battery_csv());
  write_json(manifest, dir / "battery.plot.json",
             sim::plot_spec("Battery remaining", "time_s", "mAh", {"node batteries"}));
  write_csv(manifest, dir / "alerts.csv", report.alerts_csv());
  write_csv(manifest, dir / "distance_histogram.csv", report.distance_histogram_csv());
  write_json(manifest, dir / "distance_histogram.plot.json",
             sim::plot_spec("Success vs distance", "bin_lo_m", "success_rate", {"success_rate"}));
  if (!report.roc.empty()) {
    write_csv(manifest, dir / "roc.csv", report.roc_csv());
    write_json(manifest, dir / "roc.plot.json",
               sim::plot_spec("Anomaly scorer ROC", "fpr", "tpr", {"roc"}));
  }
}

// ---------------------------------------------------------------------------

inline int cmd_simulate(const fs::path& scenario_path, CommonOptions opts) {
  apply_env(opts);
  sim::Scenario sc;
  try {
    sc = load_scenario(scenario_path, opts);
  } catch (const sim::ValidationError& e) {
    print_error(kValidation, "validation", e.issues());
    return kValidation;
  }
  try {
    sc.physics_check();
  } catch (const std::exception& e) {
    print_error(kInfeasiblePhysics, "infeasible_physics", {e.what()});
    return kInfeasiblePhysics;
  }
  try {
    Manifest manifest(opts, &sc);
    const sim::MetricsReport report = sim::run(sc);
    emit_run_outputs(report, opts.out_dir, manifest);
    manifest.save(opts.out_dir);
    std::cout << "pdr=" << io::format_number(report.pdr)
              << " loss=" << io::format_number(report.loss_fraction())
              << " recovery=" << io::format_number(report.recovery_ratio)
              << " alerts=" << report.alerts.size() << "\n";
    return kOk;
  } catch (const std::exception& e) {
    print_error(kInternal, "internal", {e.what()});
    return kInternal;
  }
}

inline int cmd_sweep(const fs::path& scenario_path, const std::vector<std::uint32_t>& counts,
                     std::uint32_t replicates, CommonOptions opts) {
  apply_env(opts);
  sim::Scenario sc;
  try {
    sc = load_scenario(scenario_path, opts);
  } catch (const sim::ValidationError& e) {
    print_error(kValidation, "validation", e.issues());
    return kValidation;
  }
  try {
    sc.physics_check();
  } catch (const std::exception& e) {
    print_error(kInfeasiblePhysics, "infeasible_physics", {e.what()});
    return kInfeasiblePhysics;
  }
  try {
    Manifest manifest(opts, &sc);
    const auto rows = sim::sweep(sc, counts, replicates, opts.jobs);

    io::CsvBuilder table({"n_animals", "replicates", "pdr_mean", "pdr_sd", "loss_mean", "loss_sd",
                          "throughput_mean_msg_per_s", "throughput_sd_msg_per_s"});
    io::CsvBuilder loss({"n_animals", "loss_mean", "loss_sd"});
    io::CsvBuilder thr({"n_animals", "throughput_mean_msg_per_s", "throughput_sd_msg_per_s"});
    for (const auto& r : rows) {
      table.cell(static_cast<std::uint64_t>(r.n_animals))
          .cell(static_cast<std::uint64_t>(r.replicates))
          .cell(r.pdr_mean)
          .cell(r.pdr_sd)
          .cell(r.loss_mean)
          .cell(r.loss_sd)
          .cell(r.throughput_mean)
          .cell(r.throughput_sd);
      table.end_row();
      loss.cell(static_cast<std::uint64_t>(r.n_animals)).cell(r.loss_mean).cell(r.loss_sd);
      loss.end_row();
      thr.cell(static_cast<std::uint64_t>(r.n_animals)).cell(r.throughput_mean).cell(r.throughput_sd);
      thr.end_row();
    }
    write_csv(manifest, opts.out_dir / "sweep.csv", table);
    write_csv(manifest, opts.out_dir / "loss_vs_n.csv", loss);
    write_json(manifest, opts.out_dir / "loss_vs_n.plot.json",
               sim::plot_spec("Packet loss vs herd size", "n_animals", "loss_mean", {"loss_mean"}));
    write_csv(manifest, opts.out_dir / "throughput_vs_n.csv", thr);
    write_json(manifest, opts.out_dir / "throughput_vs_n.plot.json",
               sim::plot_spec("Cloud throughput vs herd size", "n_animals",
                              "throughput_mean_msg_per_s", {"throughput_mean_msg_per_s"}));
    manifest.save(opts.out_dir);
    for (const auto& r : rows) {
      std::cout << "N=" << r.n_animals << " loss=" << io::format_number(r.loss_mean)
                << " throughput=" << io::format_number(r.throughput_mean) << " msg/s\n";
    }
    return kOk;
  } catch (const std::invalid_argument& e) {
    print_error(kValidation, "validation", {e.what()});
    return kValidation;
  } catch (const std::exception& e) {
    print_error(kInternal, "internal", {e.what()});
    return kInternal;
  }
}

inline int cmd_failures(const fs::path& scenario_path, std::uint32_t max_failures,
                        std::uint32_t replicates, CommonOptions opts) {
  apply_env(opts);
  sim::Scenario sc;
  try {
    sc = load_scenario(scenario_path, opts);
    if (sc.gateways.size() < max_failures + 1)
      throw sim::ValidationError({"scenario needs at least max_failures + 1 gateways"});
  } catch (const sim::ValidationError& e) {
    print_error(kValidation, "validation", e.issues());
    return kValidation;
  }
  try {
    sc.physics_check();
  } catch (const std::exception& e) {
    print_error(kInfeasiblePhysics, "infeasible_physics", {e.what()});
    return kInfeasiblePhysics;
  }
  try {
    Manifest manifest(opts, &sc);
    const auto rows = sim::failure_sweep(sc, max_failures, replicates, opts.jobs);
    io::CsvBuilder csv({"failures", "recovery_ratio", "recovery_sd"});
    for (const auto& r : rows) {
      csv.cell(static_cast<std::uint64_t>(r.failures)).cell(r.recovery_mean).cell(r.recovery_sd);
      csv.end_row();
    }
    write_csv(manifest, opts.out_dir / "recovery.csv", csv);
    write_json(manifest, opts.out_dir / "recovery.plot.json",
               sim::plot_spec("Data recovery vs gateway failures", "failures", "recovery_ratio",
                              {"recovery_ratio"}));
    manifest.save(opts.out_dir);
    for (const auto& r : rows)
      std::cout << "failures=" << r.failures << " recovery=" << io::format_number(r.recovery_mean)
                << "\n";
    return kOk;
  } catch (const std::exception& e) {
    print_error(kInternal, "internal", {e.what()});
    return kInternal;
  }
}

inline int cmd_linkbudget(const sim::Scenario& sc, const std::vector<double>& distances,
                          CommonOptions opts) {
  apply_env(opts);
  try {
    sc.radio.validate();
    sc.channel_params.validate();
  } catch (const std::exception& e) {
    print_error(kValidation, "validation", {e.what()});
    return kValidation;
  }
  try {
    Manifest manifest(opts, &sc);
    io::CsvBuilder csv({"distance_m", "path_loss_db", "snr_db", "link_margin_db", "p_succ_los",
                        "p_succ_obstructed"});
    for (double d : distances) {
      const channel::LinkSample los{d, false, 0.0};
      const double pl = channel::path_loss_db(los, sc.channel_params);
      csv.cell(d)
          .cell(pl)
          .cell(channel::snr_db(pl, sc.radio))
          .cell(channel::link_margin_db(pl, sc.radio))
          .cell(channel::expected_success_prob(d, false, sc.channel_params, sc.radio))
          .cell(channel::expected_success_prob(d, true, sc.channel_params, sc.radio));
      csv.end_row();
    }
    write_csv(manifest, opts.out_dir / "linkbudget.csv", csv);
    write_json(manifest, opts.out_dir / "linkbudget.plot.json",
               sim::plot_spec("Link budget vs distance", "distance_m", "p_succ",
                              {"p_succ_los", "p_succ_obstructed"}));
    manifest.save(opts.out_dir);
    return kOk;
  } catch (const std::exception& e) {
    print_error(kInternal, "internal", {e.what()});
    return kInternal;
  }
}

inline int cmd_battery(const sim::Scenario& sc, const std::vector<double>& intervals,
                       CommonOptions opts) {
  apply_env(opts);
  try {
    Manifest manifest(opts, &sc);
    io::CsvBuilder csv({"interval_s", "i_avg_ma", "cycle_energy_mj", "lifetime_h", "lifetime_days"});
    for (double interval : intervals) {
      energy::EnergyProfile p = sc.energy_profile;
      p.report_interval_s = interval;
      p.validate(sc.radio);  // throws on active time > interval
      const double i_avg = energy::avg_current_ma(p, sc.radio);
      const double e_cyc = energy::cycle_energy_mj(p, sc.radio, sc.battery);
      const double hours = energy::lifetime_from_energy_hours(p, sc.radio, sc.battery);
      csv.cell(interval).cell(i_avg).cell(e_cyc).cell(hours).cell(hours / 24.0);
      csv.end_row();
    }
    write_csv(manifest, opts.out_dir / "battery_lifetime.csv", csv);

    // Coulomb-decline trajectory at the first interval.
    energy::EnergyProfile p = sc.energy_profile;
    p.report_interval_s = intervals.front();
    p.validate(sc.radio);
    const double i_avg = energy::avg_current_ma(p, sc.radio);
    io::CsvBuilder series({"day", "remaining_mah"});
    const double per_day = i_avg * 24.0;
    double remaining = sc.battery.capacity_mah;
    for (int day = 0; remaining > 0.0; ++day) {
      series.cell(static_cast<double>(day)).cell(std::max(0.0, remaining));
      series.end_row();
      remaining -= per_day;
      if (day > 4000) break;
    }
    write_csv(manifest, opts.out_dir / "battery_depletion.csv", series);
    write_json(manifest, opts.out_dir / "battery_depletion.plot.json",
               sim::plot_spec("Battery depletion", "day", "remaining_mah", {"remaining_mah"}));
    manifest.save(opts.out_dir);
    return kOk;
  } catch (const std::domain_error& e) {
    print_error(kInfeasiblePhysics, "infeasible_physics", {e.what()});
    return kInfeasiblePhysics;
  } catch (const std::exception& e) {
    print_error(kInternal, "internal", {e.what()});
    return kInternal;
  }
}

inline int cmd_fit(const fs::path& csv_path, CommonOptions opts) {
  apply_env(opts);
  std::vector<channel::FitPoint> points;
  try {
    const io::CsvTable table = io::parse_csv_file(csv_path);
    if (table.columns.size() < 2)
      throw std::invalid_argument("expected columns: distance_m, success");
    for (const auto& row : table.rows) {
      points.push_back({std::stod(row[0]), std::stod(row[1])});
    }
  } catch (const std::exception& e) {
    print_error(kValidation, "validation", {std::string("cannot parse points: ") + e.what()});
    return kValidation;
  }
  try {
    const channel::FitResult fit = channel::fit_two_regime(points);
    Manifest manifest(opts, nullptr);
    json out;
    out["obstructed_fraction"] = fit.fit.obstructed_fraction;
    out["open_scale_m"] = fit.fit.open_scale_m;
    out["open_shape"] = fit.fit.open_shape;
    out["obstructed_scale_m"] = fit.fit.obstructed_scale_m;
    out["obstructed_shape"] = fit.fit.obstructed_shape;
    out["sse"] = fit.sse;
    out["rms_residual"] = fit.rms_residual;
    write_json(manifest, opts.out_dir / "fit.json", out);

    double d_lo = points.front().distance_m, d_hi = points.front().distance_m;
    for (const auto& p : points) {
      d_lo = std::min(d_lo, p.distance_m);
      d_hi = std::max(d_hi, p.distance_m);
    }
    io::CsvBuilder curve({"distance_m", "success_fit"});
    for (int i = 0; i < 200; ++i) {
      const double d = d_lo + (d_hi - d_lo) * i / 199.0;
      curve.cell(d).cell(channel::success_two_regime(d, fit.fit));
      curve.end_row();
    }
    write_csv(manifest, opts.out_dir / "fit_curve.csv", curve);
    write_json(manifest, opts.out_dir / "fit_curve.plot.json",
               sim::plot_spec("Two-regime fit", "distance_m", "success_fit", {"success_fit"}));
    manifest.save(opts.out_dir);
    std::cout << "rms_residual=" << io::format_number(fit.rms_residual) << "\n";
    return kOk;
  } catch (const std::invalid_argument& e) {
    print_error(kValidation, "validation", {e.what()});
    return kValidation;
  } catch (const std::exception& e) {
    print_error(kInternal, "internal", {e.what()});
    return kInternal;
  }
}

inline int cmd_validate(const fs::path& scenario_path, CommonOptions opts) {
  apply_env(opts);
  try {
    const sim::Scenario sc = load_scenario(scenario_path, opts);
    std::cout << "ok: " << sc.name << " (hash " << sc.canonical_hash() << ")\n";
    return kOk;
  } catch (const sim::ValidationError& e) {
    print_error(kValidation, "validation", e.issues());
    return kValidation;
  }
}

/// Tiny built-in scenario used by the selfcheck path.
inline sim::Scenario builtin_smoke_scenario() {
  sim::Scenario sc;
  sc.name = "selfcheck";
  sc.seed = 7;
  sc.duration_s = 4.0 * 3600.0;
  sc.field_boundary = {{-200, -200}, {200, -200}, {200, 200}, {-200, 200}};
  sc.obstructions = {{{40, 40}, {80, 40}, {80, 80}, {40, 80}}};
  sc.herd_count = 4;
  sc.gateways.push_back({{0.0, 0.0}, 0.5, 1000.0, 10.0});
  sc.schedule.report_interval_s = 300.0;
  sc.schedule.sampling_interval_s = 100.0;
  sc.energy_profile.report_interval_s = 300.0;
  sc.alerts.enabled = true;
  sc.anomalies.push_back({1, analytics::AlertKind::kFever, 3600.0, 1800.0, 40.6});
  return sc;
}

inline int cmd_selfcheck(CommonOptions opts) {
  apply_env(opts);
  try {
    const fs::path dir = opts.out_dir;
    sim::Scenario sc = builtin_smoke_scenario();
    if (opts.seed) sc.seed = *opts.seed;
    Manifest manifest(opts, &sc);
    const sim::MetricsReport report = sim::run(sc);
    emit_run_outputs(report, dir, manifest);
    manifest.save(dir);

    // Re-parse every emitted CSV and verify the declared column layout.
    const std::vector<std::pair<std::string, std::vector<std::string>>> expected = {
        {"throughput.csv", {"time_s", "throughput_msg_per_s"}},
        {"alerts.csv", {"animal_id", "rule", "trigger_s", "detection_s", "delivery_s", "latency_s"}},
        {"distance_histogram.csv", {"bin_lo_m", "bin_hi_m", "attempts", "successes", "success_rate"}},
    };
    std::vector<std::string> problems;
    for (const auto& [file, cols] : expected) {
      const io::CsvTable table = io::parse_csv_file(dir / file);
      if (table.columns != cols) {
        problems.push_back(file + ": unexpected column order");
        continue;
      }
      for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
          if (file == "alerts.csv" && c == 1) continue;  // rule name is a string
          (void)std::stod(row[c]);
        }
      }
      std::cout << "ok " << file << " (" << table.rows.size() << " rows)\n";
    }
    const io::CsvTable battery = io::parse_csv_file(dir / "battery.csv");
    if (battery.columns.empty() || battery.columns.front() != "time_s")
      problems.push_back("battery.csv: first column must be time_s");
    else
      std::cout << "ok battery.csv (" << battery.rows.size() << " rows)\n";

    std::ifstream summary(dir / "summary.json");
    json parsed;
    summary >> parsed;
    if (!parsed.contains("pdr")) problems.push_back("summary.json: missing pdr");
    std::cout << "ok summary.json\n";

    if (!problems.empty()) {
      print_error(kInternal, "selfcheck", problems);
      return kInternal;
    }
    std::cout << "selfcheck passed\n";
    return kOk;
  } catch (const std::exception& e) {
    print_error(kInternal, "selfcheck", {e.what()});
    return kInternal;
  }
}

}  // namespace agrotrack::cli
