#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "agrotrack/analytics.hpp"
#include "agrotrack/channel.hpp"
#include "agrotrack/energy.hpp"
#include "agrotrack/geometry.hpp"

namespace agrotrack::sim {

using json = nlohmann::json;

/// Scenario rejection with the full list of violations.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::ostringstream os;
    os << "scenario validation failed:";
    for (const auto& issue : issues) os << "\n  - " << issue;
    return os.str();
  }
  std::vector<std::string> issues_;
};

struct GatewaySpec {
  geom::Vec2 position;
  double backhaul_delay_s = 1.0;
  double ingest_capacity_msg_per_s = 1000.0;
  double ingest_burst_window_s = 10.0;
};

struct FailureWindow {
  std::uint32_t gateway = 0;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct AnomalyEpisode {
  std::uint32_t animal = 0;
  analytics::AlertKind kind = analytics::AlertKind::kFever;
  double start_s = 0.0;
  double duration_s = 0.0;
  double value = 0.0;  ///< activity level or body temperature during the episode
};

struct MobilitySpec {
  std::string model = "random_waypoint";
  double speed_min_mps = 0.3;
  double speed_max_mps = 1.2;
  double pause_min_s = 60.0;
  double pause_max_s = 600.0;
};

struct ScheduleSpec {
  double report_interval_s = 300.0;
  double sampling_interval_s = 300.0;
  bool event_uplink = false;

  std::uint32_t samples_per_packet() const {
    return static_cast<std::uint32_t>(std::llround(report_interval_s / sampling_interval_s));
  }
};

struct MacSpec {
  bool slotted = false;
  double slot_s = std::nan("");  ///< NaN: one packet airtime
  std::uint32_t jitter_microslots = 8;
  bool capture_enabled = true;
  double capture_threshold_db = 6.0;
  bool hard_threshold = false;  ///< margin >= 0 reception instead of logistic
};

struct CloudSpec {
  double service_rate_msg_per_s = 75.0;
  double queue_bound_msgs = 2000.0;
  double processing_delay_s = 0.5;
  double alert_delivery_delay_s = 1.0;
};

struct AlertSpec {
  bool enabled = false;
  double fever_threshold_c = 39.5;
  double inactivity_floor = 0.05;
  double inactivity_window_s = 3600.0;
  std::optional<std::vector<geom::Vec2>> geofence;
};

/// Complete declarative simulation input.
struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  double duration_s = 3600.0;

  std::vector<geom::Vec2> field_boundary;
  std::vector<std::vector<geom::Vec2>> obstructions;

  std::uint32_t herd_count = 15;
  std::vector<geom::Vec2> initial_positions;  ///< empty: seeded placement

  MobilitySpec mobility;
  channel::RadioParams radio;
  channel::ChannelParams channel_params;
  energy::EnergyProfile energy_profile;  ///< report_interval_s mirrors schedule
  energy::BatterySpec battery;
  double harvest_credit_mj_per_cycle = 0.0;

  ScheduleSpec schedule;
  MacSpec mac;
  std::vector<GatewaySpec> gateways;
  CloudSpec cloud;
  std::vector<FailureWindow> failure_plan;
  std::uint32_t node_buffer_capacity = 0;

  AlertSpec alerts;
  std::vector<AnomalyEpisode> anomalies;

  json calibration;  ///< free-form notes from the calibrator, not interpreted

  geom::Polygon field_polygon() const { return geom::Polygon(field_boundary); }

  double slot_duration_s() const {
    return std::isnan(mac.slot_s) ? energy::time_on_air_s(radio) : mac.slot_s;
  }

  /// Schema + semantic validation. Returns the list of violations.
  std::vector<std::string> validate() const;

  /// Feasibility of the duty-cycle physics; throws std::domain_error.
  void physics_check() const {
    energy::EnergyProfile profile = energy_profile;
    profile.report_interval_s = schedule.report_interval_s;
    profile.validate(radio);
  }

  json to_json() const;
  static Scenario from_json(const json& doc);
  static Scenario from_file(const std::string& path);

  /// Canonicalized document hash, stable across platforms.
  std::string canonical_hash() const {
    const std::string dump = to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
  }
};

namespace schema_detail {

inline void expect_keys(const json& obj, const std::string& where,
                        const std::set<std::string>& allowed, std::vector<std::string>& issues) {
  if (!obj.is_object()) {
    issues.push_back(where + ": expected an object");
    return;
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) issues.push_back(where + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, const T& fallback, const std::string& where,
         std::vector<std::string>& issues) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    issues.push_back(where + "." + key + ": wrong type");
    return fallback;
  }
}

inline std::vector<geom::Vec2> read_points(const json& arr, const std::string& where,
                                           std::vector<std::string>& issues) {
  std::vector<geom::Vec2> pts;
  if (!arr.is_array()) {
    issues.push_back(where + ": expected an array of [x, y] pairs");
    return pts;
  }
  for (const auto& item : arr) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_number() || !item[1].is_number()) {
      issues.push_back(where + ": expected [x, y] pairs");
      return pts;
    }
    pts.push_back({item[0].get<double>(), item[1].get<double>()});
  }
  return pts;
}

inline json points_to_json(const std::vector<geom::Vec2>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back(json::array({p.x, p.y}));
  return arr;
}

}  // namespace schema_detail

inline Scenario Scenario::from_json(const json& doc) {
  using namespace schema_detail;
  std::vector<std::string> issues;
  Scenario sc;
  expect_keys(doc, "scenario",
              {"name", "seed", "duration_s", "field", "herd", "mobility", "radio", "channel",
               "energy", "schedule", "mac", "gateways", "cloud", "failure_plan",
               "node_buffer_capacity", "alerts", "anomalies", "calibration"},
              issues);
  if (!doc.is_object()) throw ValidationError(issues);

  sc.name = get_or<std::string>(doc, "name", sc.name, "scenario", issues);
  sc.seed = get_or<std::uint64_t>(doc, "seed", sc.seed, "scenario", issues);
  sc.duration_s = get_or<double>(doc, "duration_s", sc.duration_s, "scenario", issues);

  if (doc.contains("field")) {
    const json& f = doc.at("field");
    expect_keys(f, "field", {"boundary_m", "obstructions_m"}, issues);
    if (f.is_object()) {
      if (f.contains("boundary_m")) sc.field_boundary = read_points(f.at("boundary_m"), "field.boundary_m", issues);
      if (f.contains("obstructions_m")) {
        if (!f.at("obstructions_m").is_array()) {
          issues.push_back("field.obstructions_m: expected an array of polygons");
        } else {
          int idx = 0;
          for (const auto& poly : f.at("obstructions_m")) {
            sc.obstructions.push_back(
                read_points(poly, "field.obstructions_m[" + std::to_string(idx++) + "]", issues));
          }
        }
      }
    }
  } else {
    issues.push_back("scenario: missing 'field'");
  }

  if (doc.contains("herd")) {
    const json& h = doc.at("herd");
    expect_keys(h, "herd", {"count", "initial_positions_m"}, issues);
    sc.herd_count = get_or<std::uint32_t>(h, "count", sc.herd_count, "herd", issues);
    if (h.is_object() && h.contains("initial_positions_m"))
      sc.initial_positions = read_points(h.at("initial_positions_m"), "herd.initial_positions_m", issues);
  } else {
    issues.push_back("scenario: missing 'herd'");
  }

  if (doc.contains("mobility")) {
    const json& m = doc.at("mobility");
    expect_keys(m, "mobility",
                {"model", "speed_min_mps", "speed_max_mps", "pause_min_s", "pause_max_s"}, issues);
    sc.mobility.model = get_or<std::string>(m, "model", sc.mobility.model, "mobility", issues);
    sc.mobility.speed_min_mps = get_or<double>(m, "speed_min_mps", sc.mobility.speed_min_mps, "mobility", issues);
    sc.mobility.speed_max_mps = get_or<double>(m, "speed_max_mps", sc.mobility.speed_max_mps, "mobility", issues);
    sc.mobility.pause_min_s = get_or<double>(m, "pause_min_s", sc.mobility.pause_min_s, "mobility", issues);
    sc.mobility.pause_max_s = get_or<double>(m, "pause_max_s", sc.mobility.pause_max_s, "mobility", issues);
  }

  if (doc.contains("radio")) {
    const json& r = doc.at("radio");
    expect_keys(r, "radio",
                {"tx_power_dbm", "gain_tx_dbi", "gain_rx_dbi", "noise_figure_db",
                 "sensitivity_dbm", "spreading_factor", "bandwidth_hz", "coding_rate",
                 "payload_bytes", "preamble_symbols"},
                issues);
    auto& rp = sc.radio;
    rp.tx_power_dbm = get_or<double>(r, "tx_power_dbm", rp.tx_power_dbm, "radio", issues);
    rp.gain_tx_dbi = get_or<double>(r, "gain_tx_dbi", rp.gain_tx_dbi, "radio", issues);
    rp.gain_rx_dbi = get_or<double>(r, "gain_rx_dbi", rp.gain_rx_dbi, "radio", issues);
    rp.noise_figure_db = get_or<double>(r, "noise_figure_db", rp.noise_figure_db, "radio", issues);
    rp.sensitivity_dbm = get_or<double>(r, "sensitivity_dbm", rp.sensitivity_dbm, "radio", issues);
    rp.spreading_factor = get_or<int>(r, "spreading_factor", rp.spreading_factor, "radio", issues);
    rp.bandwidth_hz = get_or<double>(r, "bandwidth_hz", rp.bandwidth_hz, "radio", issues);
    rp.coding_rate = get_or<int>(r, "coding_rate", rp.coding_rate, "radio", issues);
    rp.payload_bytes = get_or<int>(r, "payload_bytes", rp.payload_bytes, "radio", issues);
    rp.preamble_symbols = get_or<int>(r, "preamble_symbols", rp.preamble_symbols, "radio", issues);
  }

  if (doc.contains("channel")) {
    const json& c = doc.at("channel");
    expect_keys(c, "channel",
                {"pl_d0_db", "d0_m", "path_loss_exponent", "shadowing_sigma_db",
                 "obstruction_penalty_db", "logistic_alpha_per_db", "snr_threshold_db"},
                issues);
    auto& cp = sc.channel_params;
    cp.pl_d0_db = get_or<double>(c, "pl_d0_db", cp.pl_d0_db, "channel", issues);
    cp.d0_m = get_or<double>(c, "d0_m", cp.d0_m, "channel", issues);
    cp.path_loss_exponent = get_or<double>(c, "path_loss_exponent", cp.path_loss_exponent, "channel", issues);
    cp.shadowing_sigma_db = get_or<double>(c, "shadowing_sigma_db", cp.shadowing_sigma_db, "channel", issues);
    cp.obstruction_penalty_db = get_or<double>(c, "obstruction_penalty_db", cp.obstruction_penalty_db, "channel", issues);
    cp.logistic_alpha_per_db = get_or<double>(c, "logistic_alpha_per_db", cp.logistic_alpha_per_db, "channel", issues);
    if (c.is_object() && c.contains("snr_threshold_db"))
      cp.snr_threshold_override_db = get_or<double>(c, "snr_threshold_db", 0.0, "channel", issues);
  }

  if (doc.contains("energy")) {
    const json& e = doc.at("energy");
    expect_keys(e, "energy",
                {"i_sense_ma", "i_proc_ma", "i_tx_ma", "i_rx_ma", "i_sleep_ma", "t_sense_s",
                 "t_proc_s", "t_rx_s", "t_tx_s", "battery_capacity_mah", "battery_voltage_v",
                 "harvest_credit_mj_per_cycle"},
                issues);
    auto& ep = sc.energy_profile;
    ep.i_sense_ma = get_or<double>(e, "i_sense_ma", ep.i_sense_ma, "energy", issues);
    ep.i_proc_ma = get_or<double>(e, "i_proc_ma", ep.i_proc_ma, "energy", issues);
    ep.i_tx_ma = get_or<double>(e, "i_tx_ma", ep.i_tx_ma, "energy", issues);
    ep.i_rx_ma = get_or<double>(e, "i_rx_ma", ep.i_rx_ma, "energy", issues);
    ep.i_sleep_ma = get_or<double>(e, "i_sleep_ma", ep.i_sleep_ma, "energy", issues);
    ep.t_sense_s = get_or<double>(e, "t_sense_s", ep.t_sense_s, "energy", issues);
    ep.t_proc_s = get_or<double>(e, "t_proc_s", ep.t_proc_s, "energy", issues);
    ep.t_rx_s = get_or<double>(e, "t_rx_s", ep.t_rx_s, "energy", issues);
    if (e.is_object() && e.contains("t_tx_s"))
      ep.t_tx_s = get_or<double>(e, "t_tx_s", 0.0, "energy", issues);
    sc.battery.capacity_mah = get_or<double>(e, "battery_capacity_mah", sc.battery.capacity_mah, "energy", issues);
    sc.battery.voltage_v = get_or<double>(e, "battery_voltage_v", sc.battery.voltage_v, "energy", issues);
    sc.harvest_credit_mj_per_cycle = get_or<double>(e, "harvest_credit_mj_per_cycle",
                                                    sc.harvest_credit_mj_per_cycle, "energy", issues);
  }

  if (doc.contains("schedule")) {
    const json& s = doc.at("schedule");
    expect_keys(s, "schedule", {"report_interval_s", "sampling_interval_s", "event_uplink"}, issues);
    sc.schedule.report_interval_s = get_or<double>(s, "report_interval_s", sc.schedule.report_interval_s, "schedule", issues);
    sc.schedule.sampling_interval_s = get_or<double>(s, "sampling_interval_s", sc.schedule.report_interval_s, "schedule", issues);
    sc.schedule.event_uplink = get_or<bool>(s, "event_uplink", sc.schedule.event_uplink, "schedule", issues);
  } else {
    sc.schedule.sampling_interval_s = sc.schedule.report_interval_s;
  }
  sc.energy_profile.report_interval_s = sc.schedule.report_interval_s;

  if (doc.contains("mac")) {
    const json& m = doc.at("mac");
    expect_keys(m, "mac",
                {"slotted", "slot_s", "jitter_microslots", "capture_enabled",
                 "capture_threshold_db", "hard_threshold"},
                issues);
    sc.mac.slotted = get_or<bool>(m, "slotted", sc.mac.slotted, "mac", issues);
    if (m.is_object() && m.contains("slot_s"))
      sc.mac.slot_s = get_or<double>(m, "slot_s", 0.0, "mac", issues);
    sc.mac.jitter_microslots = get_or<std::uint32_t>(m, "jitter_microslots", sc.mac.jitter_microslots, "mac", issues);
    sc.mac.capture_enabled = get_or<bool>(m, "capture_enabled", sc.mac.capture_enabled, "mac", issues);
    sc.mac.capture_threshold_db = get_or<double>(m, "capture_threshold_db", sc.mac.capture_threshold_db, "mac", issues);
    sc.mac.hard_threshold = get_or<bool>(m, "hard_threshold", sc.mac.hard_threshold, "mac", issues);
  }

  if (doc.contains("gateways")) {
    if (!doc.at("gateways").is_array()) {
      issues.push_back("gateways: expected an array");
    } else {
      int idx = 0;
      for (const auto& g : doc.at("gateways")) {
        const std::string where = "gateways[" + std::to_string(idx++) + "]";
        expect_keys(g, where,
                    {"position_m", "backhaul_delay_s", "ingest_capacity_msg_per_s",
                     "ingest_burst_window_s"},
                    issues);
        GatewaySpec gw;
        if (g.is_object() && g.contains("position_m")) {
          auto pts = read_points(json::array({g.at("position_m")}), where + ".position_m", issues);
          if (!pts.empty()) gw.position = pts.front();
        } else {
          issues.push_back(where + ": missing 'position_m'");
        }
        gw.backhaul_delay_s = get_or<double>(g, "backhaul_delay_s", gw.backhaul_delay_s, where, issues);
        gw.ingest_capacity_msg_per_s = get_or<double>(g, "ingest_capacity_msg_per_s", gw.ingest_capacity_msg_per_s, where, issues);
        gw.ingest_burst_window_s = get_or<double>(g, "ingest_burst_window_s", gw.ingest_burst_window_s, where, issues);
        sc.gateways.push_back(gw);
      }
    }
  } else {
    issues.push_back("scenario: missing 'gateways'");
  }

  if (doc.contains("cloud")) {
    const json& c = doc.at("cloud");
    expect_keys(c, "cloud",
                {"service_rate_msg_per_s", "queue_bound_msgs", "processing_delay_s",
                 "alert_delivery_delay_s"},
                issues);
    sc.cloud.service_rate_msg_per_s = get_or<double>(c, "service_rate_msg_per_s", sc.cloud.service_rate_msg_per_s, "cloud", issues);
    sc.cloud.queue_bound_msgs = get_or<double>(c, "queue_bound_msgs", sc.cloud.queue_bound_msgs, "cloud", issues);
    sc.cloud.processing_delay_s = get_or<double>(c, "processing_delay_s", sc.cloud.processing_delay_s, "cloud", issues);
    sc.cloud.alert_delivery_delay_s = get_or<double>(c, "alert_delivery_delay_s", sc.cloud.alert_delivery_delay_s, "cloud", issues);
  }

  if (doc.contains("failure_plan")) {
    if (!doc.at("failure_plan").is_array()) {
      issues.push_back("failure_plan: expected an array");
    } else {
      int idx = 0;
      for (const auto& f : doc.at("failure_plan")) {
        const std::string where = "failure_plan[" + std::to_string(idx++) + "]";
        expect_keys(f, where, {"gateway", "start_s", "end_s"}, issues);
        FailureWindow fw;
        fw.gateway = get_or<std::uint32_t>(f, "gateway", 0, where, issues);
        fw.start_s = get_or<double>(f, "start_s", 0.0, where, issues);
        fw.end_s = get_or<double>(f, "end_s", 0.0, where, issues);
        sc.failure_plan.push_back(fw);
      }
    }
  }

  sc.node_buffer_capacity =
      get_or<std::uint32_t>(doc, "node_buffer_capacity", sc.node_buffer_capacity, "scenario", issues);

  if (doc.contains("alerts")) {
    const json& a = doc.at("alerts");
    expect_keys(a, "alerts",
                {"fever_threshold_c", "inactivity_floor", "inactivity_window_s", "geofence_m"},
                issues);
    sc.alerts.enabled = true;
    sc.alerts.fever_threshold_c = get_or<double>(a, "fever_threshold_c", sc.alerts.fever_threshold_c, "alerts", issues);
    sc.alerts.inactivity_floor = get_or<double>(a, "inactivity_floor", sc.alerts.inactivity_floor, "alerts", issues);
    sc.alerts.inactivity_window_s = get_or<double>(a, "inactivity_window_s", sc.alerts.inactivity_window_s, "alerts", issues);
    if (a.is_object() && a.contains("geofence_m"))
      sc.alerts.geofence = read_points(a.at("geofence_m"), "alerts.geofence_m", issues);
  }

  if (doc.contains("anomalies")) {
    if (!doc.at("anomalies").is_array()) {
      issues.push_back("anomalies: expected an array");
    } else {
      int idx = 0;
      for (const auto& a : doc.at("anomalies")) {
        const std::string where = "anomalies[" + std::to_string(idx++) + "]";
        expect_keys(a, where, {"animal", "kind", "start_s", "duration_s", "value"}, issues);
        AnomalyEpisode ep;
        ep.animal = get_or<std::uint32_t>(a, "animal", 0, where, issues);
        const std::string kind = get_or<std::string>(a, "kind", "fever", where, issues);
        if (kind == "fever") {
          ep.kind = analytics::AlertKind::kFever;
        } else if (kind == "inactivity") {
          ep.kind = analytics::AlertKind::kInactivity;
        } else {
          issues.push_back(where + ": kind must be 'fever' or 'inactivity'");
        }
        ep.start_s = get_or<double>(a, "start_s", 0.0, where, issues);
        ep.duration_s = get_or<double>(a, "duration_s", 0.0, where, issues);
        ep.value = get_or<double>(a, "value", 0.0, where, issues);
        sc.anomalies.push_back(ep);
      }
    }
  }

  if (doc.contains("calibration")) sc.calibration = doc.at("calibration");

  if (!issues.empty()) throw ValidationError(issues);
  auto semantic = sc.validate();
  if (!semantic.empty()) throw ValidationError(semantic);
  return sc;
}

inline Scenario Scenario::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError({"cannot open scenario file: " + path});
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError({std::string("scenario is not valid JSON: ") + e.what()});
  }
  return from_json(doc);
}

inline std::vector<std::string> Scenario::validate() const {
  std::vector<std::string> issues;
  if (duration_s <= 0.0) issues.push_back("duration_s must be > 0");
  if (herd_count < 1) issues.push_back("herd.count must be >= 1");

  if (field_boundary.size() < 3) {
    issues.push_back("field.boundary_m needs at least 3 vertices");
  } else {
    const geom::Polygon field(field_boundary);
    if (field.area() <= 0.0) issues.push_back("field polygon has zero area");
    if (!field.is_convex())
      issues.push_back("field polygon must be convex (straight-line mobility containment)");
    int idx = 0;
    for (const auto& obs : obstructions) {
      const std::string where = "field.obstructions_m[" + std::to_string(idx++) + "]";
      if (obs.size() < 3) {
        issues.push_back(where + " needs at least 3 vertices");
        continue;
      }
      for (const auto& v : obs) {
        if (!field.contains(v)) {
          issues.push_back(where + " must lie inside the field boundary");
          break;
        }
      }
    }
    if (!initial_positions.empty()) {
      if (initial_positions.size() != herd_count)
        issues.push_back("herd.initial_positions_m count must match herd.count");
      for (const auto& p : initial_positions) {
        if (!field.contains(p)) {
          issues.push_back("herd.initial_positions_m must lie inside the field");
          break;
        }
      }
    }
  }

  if (mobility.model != "random_waypoint")
    issues.push_back("mobility.model: only 'random_waypoint' is supported");
  if (mobility.speed_min_mps < 0 || mobility.speed_max_mps < mobility.speed_min_mps)
    issues.push_back("mobility speed range must satisfy 0 <= min <= max");
  if (mobility.pause_min_s < 0 || mobility.pause_max_s < mobility.pause_min_s)
    issues.push_back("mobility pause range must satisfy 0 <= min <= max");

  try {
    radio.validate();
  } catch (const std::exception& e) {
    issues.push_back(std::string("radio: ") + e.what());
  }
  try {
    channel_params.validate();
  } catch (const std::exception& e) {
    issues.push_back(std::string("channel: ") + e.what());
  }
  try {
    battery.validate();
  } catch (const std::exception& e) {
    issues.push_back(std::string("energy: ") + e.what());
  }

  if (schedule.report_interval_s <= 0.0) issues.push_back("schedule.report_interval_s must be > 0");
  if (schedule.sampling_interval_s <= 0.0) {
    issues.push_back("schedule.sampling_interval_s must be > 0");
  } else if (schedule.report_interval_s > 0.0) {
    const double ratio = schedule.report_interval_s / schedule.sampling_interval_s;
    if (std::abs(ratio - std::llround(ratio)) > 1e-9 || ratio < 1.0)
      issues.push_back("schedule.sampling_interval_s must divide report_interval_s");
  }

  if (mac.jitter_microslots < 1) issues.push_back("mac.jitter_microslots must be >= 1");
  if (!std::isnan(mac.slot_s) && mac.slot_s <= 0.0) issues.push_back("mac.slot_s must be > 0");
  if (mac.capture_threshold_db < 0.0) issues.push_back("mac.capture_threshold_db must be >= 0");

  if (gateways.empty()) issues.push_back("gateways must be non-empty");
  int gw_idx = 0;
  for (const auto& g : gateways) {
    const std::string where = "gateways[" + std::to_string(gw_idx++) + "]";
    if (g.backhaul_delay_s < 0.0) issues.push_back(where + ".backhaul_delay_s must be >= 0");
    if (g.ingest_capacity_msg_per_s <= 0.0)
      issues.push_back(where + ".ingest_capacity_msg_per_s must be > 0");
    if (g.ingest_burst_window_s <= 0.0)
      issues.push_back(where + ".ingest_burst_window_s must be > 0");
  }

  if (cloud.service_rate_msg_per_s <= 0.0) issues.push_back("cloud.service_rate_msg_per_s must be > 0");
  if (cloud.queue_bound_msgs < 0.0) issues.push_back("cloud.queue_bound_msgs must be >= 0");
  if (cloud.processing_delay_s < 0.0 || cloud.alert_delivery_delay_s < 0.0)
    issues.push_back("cloud delays must be >= 0");

  for (const auto& f : failure_plan) {
    if (f.gateway >= gateways.size())
      issues.push_back("failure_plan references gateway " + std::to_string(f.gateway) +
                       " but only " + std::to_string(gateways.size()) + " exist");
    if (f.end_s <= f.start_s) issues.push_back("failure_plan windows must satisfy start < end");
  }

  if (alerts.enabled) {
    analytics::AlertRules rules;
    rules.fever_threshold_c = alerts.fever_threshold_c;
    rules.inactivity_floor = alerts.inactivity_floor;
    rules.inactivity_window_s = alerts.inactivity_window_s;
    try {
      rules.validate();
    } catch (const std::exception& e) {
      issues.push_back(std::string("alerts: ") + e.what());
    }
    if (alerts.geofence && alerts.geofence->size() < 3)
      issues.push_back("alerts.geofence_m needs at least 3 vertices");
  }

  for (const auto& a : anomalies) {
    if (a.animal >= herd_count) issues.push_back("anomalies reference an animal beyond the herd");
    if (a.duration_s <= 0.0) issues.push_back("anomaly duration_s must be > 0");
    if (a.start_s < 0.0) issues.push_back("anomaly start_s must be >= 0");
  }

  return issues;
}

inline json Scenario::to_json() const {
  using schema_detail::points_to_json;
  json doc;
  doc["name"] = name;
  doc["seed"] = seed;
  doc["duration_s"] = duration_s;
  doc["field"]["boundary_m"] = points_to_json(field_boundary);
  json obs = json::array();
  for (const auto& o : obstructions) obs.push_back(points_to_json(o));
  doc["field"]["obstructions_m"] = obs;
  doc["herd"]["count"] = herd_count;
  if (!initial_positions.empty())
    doc["herd"]["initial_positions_m"] = points_to_json(initial_positions);
  doc["mobility"] = {{"model", mobility.model},
                     {"speed_min_mps", mobility.speed_min_mps},
                     {"speed_max_mps", mobility.speed_max_mps},
                     {"pause_min_s", mobility.pause_min_s},
                     {"pause_max_s", mobility.pause_max_s}};
  doc["radio"] = {{"tx_power_dbm", radio.tx_power_dbm},
                  {"gain_tx_dbi", radio.gain_tx_dbi},
                  {"gain_rx_dbi", radio.gain_rx_dbi},
                  {"noise_figure_db", radio.noise_figure_db},
                  {"sensitivity_dbm", radio.sensitivity_dbm},
                  {"spreading_factor", radio.spreading_factor},
                  {"bandwidth_hz", radio.bandwidth_hz},
                  {"coding_rate", radio.coding_rate},
                  {"payload_bytes", radio.payload_bytes},
                  {"preamble_symbols", radio.preamble_symbols}};
  doc["channel"] = {{"pl_d0_db", channel_params.pl_d0_db},
                    {"d0_m", channel_params.d0_m},
                    {"path_loss_exponent", channel_params.path_loss_exponent},
                    {"shadowing_sigma_db", channel_params.shadowing_sigma_db},
                    {"obstruction_penalty_db", channel_params.obstruction_penalty_db},
                    {"logistic_alpha_per_db", channel_params.logistic_alpha_per_db}};
  if (!std::isnan(channel_params.snr_threshold_override_db))
    doc["channel"]["snr_threshold_db"] = channel_params.snr_threshold_override_db;
  doc["energy"] = {{"i_sense_ma", energy_profile.i_sense_ma},
                   {"i_proc_ma", energy_profile.i_proc_ma},
                   {"i_tx_ma", energy_profile.i_tx_ma},
                   {"i_rx_ma", energy_profile.i_rx_ma},
                   {"i_sleep_ma", energy_profile.i_sleep_ma},
                   {"t_sense_s", energy_profile.t_sense_s},
                   {"t_proc_s", energy_profile.t_proc_s},
                   {"t_rx_s", energy_profile.t_rx_s},
                   {"battery_capacity_mah", battery.capacity_mah},
                   {"battery_voltage_v", battery.voltage_v},
                   {"harvest_credit_mj_per_cycle", harvest_credit_mj_per_cycle}};
  if (!std::isnan(energy_profile.t_tx_s)) doc["energy"]["t_tx_s"] = energy_profile.t_tx_s;
  doc["schedule"] = {{"report_interval_s", schedule.report_interval_s},
                     {"sampling_interval_s", schedule.sampling_interval_s},
                     {"event_uplink", schedule.event_uplink}};
  doc["mac"] = {{"slotted", mac.slotted},
                {"jitter_microslots", mac.jitter_microslots},
                {"capture_enabled", mac.capture_enabled},
                {"capture_threshold_db", mac.capture_threshold_db},
                {"hard_threshold", mac.hard_threshold}};
  if (!std::isnan(mac.slot_s)) doc["mac"]["slot_s"] = mac.slot_s;
  json gws = json::array();
  for (const auto& g : gateways) {
    gws.push_back({{"position_m", json::array({g.position.x, g.position.y})},
                   {"backhaul_delay_s", g.backhaul_delay_s},
                   {"ingest_capacity_msg_per_s", g.ingest_capacity_msg_per_s},
                   {"ingest_burst_window_s", g.ingest_burst_window_s}});
  }
  doc["gateways"] = gws;
  doc["cloud"] = {{"service_rate_msg_per_s", cloud.service_rate_msg_per_s},
                  {"queue_bound_msgs", cloud.queue_bound_msgs},
                  {"processing_delay_s", cloud.processing_delay_s},
                  {"alert_delivery_delay_s", cloud.alert_delivery_delay_s}};
  json plan = json::array();
  for (const auto& f : failure_plan)
    plan.push_back({{"gateway", f.gateway}, {"start_s", f.start_s}, {"end_s", f.end_s}});
  doc["failure_plan"] = plan;
  doc["node_buffer_capacity"] = node_buffer_capacity;
  if (alerts.enabled) {
    doc["alerts"] = {{"fever_threshold_c", alerts.fever_threshold_c},
                     {"inactivity_floor", alerts.inactivity_floor},
                     {"inactivity_window_s", alerts.inactivity_window_s}};
    if (alerts.geofence) doc["alerts"]["geofence_m"] = points_to_json(*alerts.geofence);
  }
  json eps = json::array();
  for (const auto& a : anomalies) {
    eps.push_back({{"animal", a.animal},
                   {"kind", a.kind == analytics::AlertKind::kFever ? "fever" : "inactivity"},
                   {"start_s", a.start_s},
                   {"duration_s", a.duration_s},
                   {"value", a.value}});
  }
  if (!eps.empty()) doc["anomalies"] = eps;
  if (!calibration.is_null()) doc["calibration"] = calibration;
  return doc;
}

}  // namespace agrotrack::sim
