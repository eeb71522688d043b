#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agrotrack/analytics.hpp"
#include "agrotrack/csv.hpp"

namespace agrotrack::sim {

inline constexpr const char* kToolVersion = "0.1.0";

/// Every generated packet ends in exactly one of these states.
enum class PacketFate : int {
  kDelivered = 0,
  kLostObstruction = 1,
  kLostSnr = 2,
  kLostCollision = 3,
  kBufferedThenDelivered = 4,
  kExpired = 5,
};
inline constexpr int kFateCount = 6;

inline const char* fate_name(PacketFate f) {
  switch (f) {
    case PacketFate::kDelivered: return "delivered";
    case PacketFate::kLostObstruction: return "lost_obstruction";
    case PacketFate::kLostSnr: return "lost_snr";
    case PacketFate::kLostCollision: return "lost_collision";
    case PacketFate::kBufferedThenDelivered: return "buffered_then_delivered";
    case PacketFate::kExpired: return "expired";
  }
  return "?";
}

struct DistanceBin {
  double lo_m = 0.0;
  double hi_m = 0.0;
  std::uint64_t attempts = 0;
  std::uint64_t successes = 0;
};

/// Aggregated outputs of one simulation run.
struct MetricsReport {
  std::string scenario_name;
  std::uint64_t seed = 0;

  std::uint64_t generated = 0;
  std::array<std::uint64_t, kFateCount> fate_counts{};

  double pdr = 0.0;           ///< delivered / generated
  double eventual_pdr = 0.0;  ///< (delivered + buffered_then_delivered) / generated
  double recovery_ratio = 1.0;
  std::uint64_t generated_during_outage = 0;
  std::uint64_t recovered_during_outage = 0;

  std::uint64_t tx_attempts = 0;       ///< regular packets actually transmitted
  std::uint64_t collision_losses = 0;  ///< regular packets lost to collisions
  std::uint64_t congestion_drops = 0;  ///< decoded but refused by gateway ingest
  std::uint64_t cloud_msgs_processed = 0;
  std::uint64_t cloud_msgs_dropped = 0;

  double throughput_bucket_s = 60.0;
  std::vector<double> throughput_msgs;  ///< messages completed per bucket
  double mean_throughput_msg_s = 0.0;   ///< within the simulated window
  double peak_throughput_msg_s = 0.0;

  double battery_bucket_s = 3600.0;
  std::vector<double> battery_times_s;
  std::vector<std::vector<double>> battery_mah;  ///< [time index][node]

  std::vector<DistanceBin> distance_histogram;

  std::vector<analytics::AlertEvent> alerts;
  std::vector<analytics::BehaviorFeature> features;
  std::vector<std::uint32_t> cluster_assignment;
  std::vector<std::uint32_t> outlier_ids;
  std::optional<double> anomaly_auroc;
  std::vector<std::pair<double, double>> roc;

  std::vector<std::string> notes;
  nlohmann::json effective_config;

  double loss_fraction() const { return generated == 0 ? 0.0 : 1.0 - pdr; }

  std::uint64_t fate(PacketFate f) const { return fate_counts[static_cast<int>(f)]; }

  nlohmann::json summary_json() const {
    nlohmann::json j;
    j["scenario"] = scenario_name;
    j["seed"] = seed;
    j["tool_version"] = kToolVersion;
    j["packets"]["generated"] = generated;
    for (int i = 0; i < kFateCount; ++i) {
      j["packets"]["fates"][fate_name(static_cast<PacketFate>(i))] = fate_counts[i];
      j["packets"]["loss_by_cause"][fate_name(static_cast<PacketFate>(i))] =
          generated ? static_cast<double>(fate_counts[i]) / generated : 0.0;
    }
    j["pdr"] = pdr;
    j["eventual_pdr"] = eventual_pdr;
    j["loss"] = loss_fraction();
    j["recovery"]["ratio"] = recovery_ratio;
    j["recovery"]["generated_during_outage"] = generated_during_outage;
    j["recovery"]["recovered_during_outage"] = recovered_during_outage;
    j["radio"]["tx_attempts"] = tx_attempts;
    j["radio"]["collision_losses"] = collision_losses;
    j["radio"]["empirical_collision_rate"] =
        tx_attempts ? static_cast<double>(collision_losses) / tx_attempts : 0.0;
    j["radio"]["congestion_drops"] = congestion_drops;
    j["cloud"]["msgs_processed"] = cloud_msgs_processed;
    j["cloud"]["msgs_dropped"] = cloud_msgs_dropped;
    j["throughput"]["mean_msg_per_s"] = mean_throughput_msg_s;
    j["throughput"]["peak_msg_per_s"] = peak_throughput_msg_s;
    j["alerts"]["count"] = alerts.size();
    std::map<std::string, int> by_kind;
    for (const auto& a : alerts) by_kind[analytics::to_string(a.kind)]++;
    j["alerts"]["by_kind"] = by_kind;
    double worst_latency = 0.0;
    for (const auto& a : alerts) worst_latency = std::max(worst_latency, a.latency_s());
    j["alerts"]["max_latency_s"] = worst_latency;
    if (anomaly_auroc) j["analytics"]["anomaly_auroc"] = *anomaly_auroc;
    if (!outlier_ids.empty()) j["analytics"]["outliers"] = outlier_ids;
    if (!cluster_assignment.empty()) j["analytics"]["clusters"] = cluster_assignment;
    j["notes"] = notes;
    j["config"] = effective_config;
    return j;
  }

  io::CsvBuilder throughput_csv() const {
    io::CsvBuilder csv({"time_s", "throughput_msg_per_s"});
    for (std::size_t i = 0; i < throughput_msgs.size(); ++i) {
      csv.cell(static_cast<double>(i) * throughput_bucket_s)
          .cell(throughput_msgs[i] / throughput_bucket_s);
      csv.end_row();
    }
    return csv;
  }

  io::CsvBuilder battery_csv() const {
    std::vector<std::string> cols{"time_s"};
    const std::size_t nodes = battery_mah.empty() ? 0 : battery_mah.front().size();
    for (std::size_t n = 0; n < nodes; ++n) cols.push_back("node_" + std::to_string(n) + "_mah");
    io::CsvBuilder csv(cols);
    for (std::size_t i = 0; i < battery_times_s.size(); ++i) {
      csv.cell(battery_times_s[i]);
      for (double v : battery_mah[i]) csv.cell(v);
      csv.end_row();
    }
    return csv;
  }

  io::CsvBuilder alerts_csv() const {
    io::CsvBuilder csv({"animal_id", "rule", "trigger_s", "detection_s", "delivery_s", "latency_s"});
    for (const auto& a : alerts) {
      csv.cell(static_cast<std::uint64_t>(a.animal_id))
          .cell(std::string(analytics::to_string(a.kind)))
          .cell(a.trigger_s)
          .cell(a.detection_s)
          .cell(a.delivery_s)
          .cell(a.latency_s());
      csv.end_row();
    }
    return csv;
  }

  io::CsvBuilder distance_histogram_csv() const {
    io::CsvBuilder csv({"bin_lo_m", "bin_hi_m", "attempts", "successes", "success_rate"});
    for (const auto& b : distance_histogram) {
      csv.cell(b.lo_m).cell(b.hi_m).cell(b.attempts).cell(b.successes).cell(
          b.attempts ? static_cast<double>(b.successes) / b.attempts : 0.0);
      csv.end_row();
    }
    return csv;
  }

  io::CsvBuilder roc_csv() const {
    io::CsvBuilder csv({"fpr", "tpr"});
    for (const auto& [fpr, tpr] : roc) {
      csv.cell(fpr).cell(tpr);
      csv.end_row();
    }
    return csv;
  }
};

/// Axis labels and series names for a plot-ready CSV.
inline nlohmann::json plot_spec(const std::string& title, const std::string& x_label,
                                const std::string& y_label,
                                const std::vector<std::string>& series) {
  nlohmann::json j;
  j["title"] = title;
  j["x"] = x_label;
  j["y"] = y_label;
  j["series"] = series;
  return j;
}

}  // namespace agrotrack::sim
