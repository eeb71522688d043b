#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "agrotrack/engine.hpp"
#include "agrotrack/sweep.hpp"

namespace agrotrack::sim {

/// Field-trial and simulation anchors the calibrator drives toward.
struct CalibrationTargets {
  double baseline_pdr_min = 0.975;
  double range_los_6500_min = 0.5;
  double range_los_3000_min = 0.9;
  double range_obstructed_6500_max = 0.2;
  double throughput_msg_per_s = 75.0;
  double recovery_at_max_failures = 0.85;
  std::uint32_t max_failures = 4;
};

struct CalibrationResult {
  bool ok = true;
  double obstruction_scale = 1.0;
  double cloud_service_rate = 75.0;
  std::uint32_t buffer_capacity = 17;
  std::vector<std::string> log;
  nlohmann::json overlay;  ///< scenario overlay reproducing these settings

  double baseline_pdr = 0.0;
  double p_succ_6500_los = 0.0;
  double p_succ_3000_los = 0.0;
  double p_succ_6500_obstructed = 0.0;
  double recovery_ratio = 0.0;
};

namespace calibrate_detail {

inline Scenario scale_obstructions(const Scenario& base, double k) {
  Scenario sc = base;
  for (auto& poly : sc.obstructions) {
    geom::Vec2 c{0.0, 0.0};
    for (const auto& v : poly) {
      c.x += v.x / poly.size();
      c.y += v.y / poly.size();
    }
    for (auto& v : poly) v = c + (v - c) * k;
  }
  return sc;
}

}  // namespace calibrate_detail

/// Deterministic single-parameter search in fixed order: obstruction-zone
/// coverage, then cloud service rate, then node buffer size. Each step is a
/// bounded bisection against one target, so re-running is idempotent.
inline CalibrationResult calibrate(const Scenario& trial, const Scenario& scaling,
                                   const Scenario& robustness, const CalibrationTargets& targets,
                                   unsigned n_jobs = 1) {
  CalibrationResult result;
  std::ostringstream log;

  // Channel anchors are closed-form; record them up front.
  result.p_succ_6500_los =
      channel::expected_success_prob(6500.0, false, trial.channel_params, trial.radio);
  result.p_succ_3000_los =
      channel::expected_success_prob(3000.0, false, trial.channel_params, trial.radio);
  result.p_succ_6500_obstructed =
      channel::expected_success_prob(6500.0, true, trial.channel_params, trial.radio);
  if (result.p_succ_6500_los < targets.range_los_6500_min ||
      result.p_succ_3000_los < targets.range_los_3000_min ||
      result.p_succ_6500_obstructed > targets.range_obstructed_6500_max) {
    result.ok = false;
    log << "range anchors unreachable with the configured channel constants; ";
  }

  // Step 1: obstruction-zone coverage. Shrink the zones until a short
  // baseline run clears the PDR floor; scale 1.0 is preferred when it
  // already passes.
  auto pdr_at = [&](double k) {
    Scenario sc = calibrate_detail::scale_obstructions(trial, k);
    sc.duration_s = std::min(trial.duration_s, 2.0 * 86400.0);
    sc.name = trial.name + "_cal";
    return run(sc).pdr;
  };
  double scale = 1.0;
  double pdr = pdr_at(scale);
  if (pdr < targets.baseline_pdr_min) {
    double lo = 0.0, hi = 1.0;  // smaller zones, less obstruction loss
    for (int it = 0; it < 8; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (pdr_at(mid) >= targets.baseline_pdr_min) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    scale = lo;
    pdr = pdr_at(scale);
    if (pdr < targets.baseline_pdr_min) {
      result.ok = false;
      log << "baseline PDR target not reached even with obstructions removed; ";
    }
  }
  result.obstruction_scale = scale;
  result.baseline_pdr = pdr;
  log << "obstruction scale " << scale << " -> baseline PDR " << pdr << "; ";

  // Step 2: cloud service rate. When the offered load at the largest sweep
  // point saturates the cloud, the plateau equals the service rate, so the
  // target rate is adopted directly; otherwise bisect toward the target.
  Scenario probe = scale_scenario(scaling, 600);
  probe.cloud.service_rate_msg_per_s = 1e9;  // measure the uncapped arrival rate
  probe.duration_s = std::min(scaling.duration_s, 7200.0);
  probe.name = scaling.name + "_cal";
  const double uncapped = run(probe).mean_throughput_msg_s;
  if (uncapped >= targets.throughput_msg_per_s) {
    result.cloud_service_rate = targets.throughput_msg_per_s;
  } else {
    result.ok = false;
    result.cloud_service_rate = targets.throughput_msg_per_s;
    log << "offered cloud load " << uncapped << " msg/s cannot reach the throughput target; ";
  }
  log << "cloud service rate " << result.cloud_service_rate << " msg/s (uncapped arrival "
      << uncapped << "); ";

  // Step 3: buffer size, integer bisection on the recovery target at the
  // maximum failure count.
  auto recovery_at = [&](std::uint32_t capacity) {
    Scenario sc = robustness;
    sc.node_buffer_capacity = capacity;
    return failure_sweep(sc, targets.max_failures, 1, n_jobs)[targets.max_failures].recovery_mean;
  };
  std::uint32_t lo = 0, hi = 64;
  while (lo < hi) {
    const std::uint32_t mid = (lo + hi) / 2;
    if (recovery_at(mid) >= targets.recovery_at_max_failures) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  result.buffer_capacity = lo;
  result.recovery_ratio = recovery_at(lo);
  if (result.recovery_ratio < targets.recovery_at_max_failures - 0.02) {
    result.ok = false;
    log << "recovery target unreachable within buffer bounds; ";
  }
  log << "buffer capacity " << lo << " -> recovery " << result.recovery_ratio;
  result.log.push_back(log.str());

  nlohmann::json overlay;
  if (scale != 1.0) {
    const Scenario scaled = calibrate_detail::scale_obstructions(trial, scale);
    nlohmann::json obs = nlohmann::json::array();
    for (const auto& poly : scaled.obstructions) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& v : poly) arr.push_back(nlohmann::json::array({v.x, v.y}));
      obs.push_back(arr);
    }
    overlay["field"]["obstructions_m"] = obs;
  }
  overlay["cloud"]["service_rate_msg_per_s"] = result.cloud_service_rate;
  overlay["node_buffer_capacity"] = result.buffer_capacity;
  overlay["calibration"] = {
      {"obstruction_scale", result.obstruction_scale},
      {"baseline_pdr", result.baseline_pdr},
      {"p_succ_6500_los", result.p_succ_6500_los},
      {"p_succ_3000_los", result.p_succ_3000_los},
      {"p_succ_6500_obstructed", result.p_succ_6500_obstructed},
      {"recovery_ratio", result.recovery_ratio},
      {"log", result.log},
  };
  result.overlay = overlay;
  return result;
}

/// Apply a calibration (or any) overlay to a scenario document.
inline Scenario apply_overlay(const Scenario& base, const nlohmann::json& overlay) {
  nlohmann::json doc = base.to_json();
  doc.merge_patch(overlay);
  return Scenario::from_json(doc);
}

}  // namespace agrotrack::sim
