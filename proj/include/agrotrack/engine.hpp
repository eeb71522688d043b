#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "agrotrack/analytics.hpp"
#include "agrotrack/channel.hpp"
#include "agrotrack/energy.hpp"
#include "agrotrack/geometry.hpp"
#include "agrotrack/mobility.hpp"
#include "agrotrack/report.hpp"
#include "agrotrack/rng.hpp"
#include "agrotrack/scenario.hpp"

namespace agrotrack::sim {

/// Merge overlapping outage windows per gateway. Returns one sorted,
/// disjoint interval list per gateway; `merged_any` reports whether input
/// windows had to be coalesced.
inline std::vector<std::vector<FailureWindow>> merge_failure_plan(
    const std::vector<FailureWindow>& plan, std::size_t n_gateways, bool* merged_any = nullptr) {
  std::vector<std::vector<FailureWindow>> per_gw(n_gateways);
  for (const FailureWindow& w : plan) {
    if (w.gateway >= n_gateways) throw std::invalid_argument("failure window gateway out of range");
    per_gw[w.gateway].push_back(w);
  }
  bool merged = false;
  for (auto& windows : per_gw) {
    std::sort(windows.begin(), windows.end(),
              [](const FailureWindow& a, const FailureWindow& b) { return a.start_s < b.start_s; });
    std::vector<FailureWindow> out;
    for (const FailureWindow& w : windows) {
      if (!out.empty() && w.start_s <= out.back().end_s) {
        out.back().end_s = std::max(out.back().end_s, w.end_s);
        merged = true;
      } else {
        out.push_back(w);
      }
    }
    windows = std::move(out);
  }
  if (merged_any) *merged_any = merged;
  return per_gw;
}

/// Gateway liveness at an instant, from the merged plan.
inline std::vector<bool> gateway_liveness(const std::vector<std::vector<FailureWindow>>& merged,
                                          double t) {
  std::vector<bool> live(merged.size(), true);
  for (std::size_t g = 0; g < merged.size(); ++g) {
    for (const FailureWindow& w : merged[g]) {
      if (t >= w.start_s && t < w.end_s) {
        live[g] = false;
        break;
      }
    }
  }
  return live;
}

/// Deterministic discrete-event simulator for one scenario run.
class Simulator {
 public:
  explicit Simulator(Scenario scenario) : sc_(std::move(scenario)) {
    auto issues = sc_.validate();
    if (!issues.empty()) throw ValidationError(issues);
    sc_.physics_check();
  }

  MetricsReport run() {
    setup();
    while (!queue_.empty()) {
      const Event ev = queue_.top();
      queue_.pop();
      now_ = ev.time;
      switch (static_cast<EvClass>(ev.cls)) {
        case EvClass::kGatewayChange: gateways_[ev.a].live = (ev.b != 0); break;
        case EvClass::kNodeCycle: on_cycle(static_cast<std::uint32_t>(ev.a)); break;
        case EvClass::kTxEnd: on_tx_end(ev.a); break;
        case EvClass::kCloudArrival: on_cloud_arrival(ev.a, ev.b); break;
        case EvClass::kMetricsTick: on_metrics_tick(); break;
      }
    }
    return finalize();
  }

 private:
  enum class EvClass : std::uint8_t {
    kGatewayChange = 0,
    kNodeCycle = 1,
    kTxEnd = 2,
    kCloudArrival = 3,
    kMetricsTick = 4,
  };

  struct Event {
    double time;
    std::uint8_t cls;
    std::uint64_t a;
    std::uint64_t b;
    std::uint64_t seq;
    bool operator>(const Event& o) const {
      if (time != o.time) return time > o.time;
      if (cls != o.cls) return cls > o.cls;
      if (a != o.a) return a > o.a;
      if (b != o.b) return b > o.b;
      return seq > o.seq;
    }
  };

  enum MeasState : std::uint8_t { kPending = 0, kDeliveredMeas, kBufferedMeas, kEvictedMeas };

  struct Measurement {
    std::uint32_t node = 0;
    std::uint32_t packet = 0;
    double time_s = 0.0;
    geom::Vec2 pos;
    double temp_c = 0.0;
    double activity = 0.0;
    double battery_mah = 0.0;
    std::uint8_t state = kPending;
    double detection_s = std::numeric_limits<double>::infinity();
    double delivery_s = std::numeric_limits<double>::infinity();
  };

  struct PacketInfo {
    std::uint32_t node = 0;
    std::uint64_t seq = 0;
    double gen_s = 0.0;
    std::uint32_t first_meas = 0;
    std::uint32_t n_meas = 0;
    bool resolved = false;
    PacketFate fate = PacketFate::kExpired;
  };

  enum TxKind : std::uint8_t { kRegular = 0, kBufferDrain = 1, kEventUplink = 2 };

  struct Transmission {
    double start_s = 0.0;
    double end_s = 0.0;
    std::int64_t slot_id = -1;
    std::uint32_t micro = 0;
    std::uint32_t node = 0;
    std::uint8_t kind = kRegular;
    std::uint32_t packet = 0;  ///< regular transmissions only
    std::vector<std::uint32_t> meas;
    std::vector<double> rx_dbm;       ///< per gateway
    std::vector<std::uint8_t> blocked;  ///< obstruction flag per gateway
    double nearest_live_gw_m = -1.0;
    bool cloud_seen = false;
  };

  struct NodeState {
    RandomWaypoint walker;
    rng::Xoshiro256 sensor;
    rng::Xoshiro256 shadow;
    rng::Xoshiro256 txoff;
    rng::Xoshiro256 slot;
    rng::Xoshiro256 micro;
    rng::Xoshiro256 decode;
    double phase_s = 0.0;
    double battery_mah = 0.0;
    std::uint64_t next_seq = 0;
    std::deque<std::uint32_t> buffer;
    bool dead = false;
    double temp_phase = 0.0;
    double act_phase = 0.0;
    // node-side mirror of the alert rules, drives the event uplink
    double inact_start = -1.0;
    bool inact_armed = true;
    bool fever_armed = true;
    bool geofence_armed = true;

    NodeState(RandomWaypoint w, rng::Xoshiro256 sen, rng::Xoshiro256 sh, rng::Xoshiro256 tx,
              rng::Xoshiro256 sl, rng::Xoshiro256 mi, rng::Xoshiro256 de)
        : walker(std::move(w)), sensor(std::move(sen)), shadow(std::move(sh)),
          txoff(std::move(tx)), slot(std::move(sl)), micro(std::move(mi)), decode(std::move(de)) {}
  };

  struct GatewayState {
    GatewaySpec spec;
    bool live = true;
    double tokens = 0.0;
    double token_cap = 0.0;
    double last_refill_s = 0.0;
  };

  // --- setup -------------------------------------------------------------

  void setup() {
    field_ = sc_.field_polygon();
    for (const auto& obs : sc_.obstructions) obstacles_.emplace_back(obs);
    airtime_s_ = energy::time_on_air_s(sc_.radio);
    slot_s_ = sc_.slot_duration_s();
    slots_per_interval_ = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::llround(sc_.schedule.report_interval_s / slot_s_)));
    spp_ = sc_.schedule.samples_per_packet();
    gamma_th_ = channel::snr_threshold_db(sc_.channel_params, sc_.radio);

    energy::EnergyProfile profile = sc_.energy_profile;
    profile.report_interval_s = sc_.schedule.report_interval_s;
    cycle_charge_mah_ = energy::cycle_charge_mas(profile, sc_.radio) / 3600.0;
    tx_charge_mah_ = profile.i_tx_ma * airtime_s_ / 3600.0;
    // mJ -> mAh at nominal voltage: E = V * I * t, 1 mAh = 3600 mA*s.
    const double credit_mah = sc_.harvest_credit_mj_per_cycle / (3600.0 * sc_.battery.voltage_v);
    cycle_charge_mah_ = std::max(0.0, cycle_charge_mah_ - credit_mah);

    bool merged = false;
    outages_ = merge_failure_plan(sc_.failure_plan, sc_.gateways.size(), &merged);
    if (merged) report_.notes.push_back("overlapping failure windows were merged");

    for (const GatewaySpec& spec : sc_.gateways) {
      GatewayState gw;
      gw.spec = spec;
      gw.token_cap = spec.ingest_capacity_msg_per_s * spec.ingest_burst_window_s;
      gw.tokens = gw.token_cap;
      gateways_.push_back(gw);
    }
    for (std::size_t g = 0; g < outages_.size(); ++g) {
      for (const FailureWindow& w : outages_[g]) {
        push_event(w.start_s, EvClass::kGatewayChange, g, 0);
        push_event(w.end_s, EvClass::kGatewayChange, g, 1);
        outage_union_.push_back({0, w.start_s, w.end_s});
      }
    }
    // Collapse the union of outage windows for the recovery denominator.
    std::sort(outage_union_.begin(), outage_union_.end(),
              [](const FailureWindow& a, const FailureWindow& b) { return a.start_s < b.start_s; });
    std::vector<FailureWindow> collapsed;
    for (const FailureWindow& w : outage_union_) {
      if (!collapsed.empty() && w.start_s <= collapsed.back().end_s) {
        collapsed.back().end_s = std::max(collapsed.back().end_s, w.end_s);
      } else {
        collapsed.push_back(w);
      }
    }
    outage_union_ = std::move(collapsed);

    nodes_.reserve(sc_.herd_count);
    for (std::uint32_t n = 0; n < sc_.herd_count; ++n) {
      geom::Vec2 start;
      if (!sc_.initial_positions.empty()) {
        start = sc_.initial_positions[n];
      } else {
        auto place = rng::substream(sc_.seed, n, rng::Stream::kPlacement);
        start = field_.sample_uniform(place);
        for (int tries = 0; tries < 4096 && inside_any_obstruction(start); ++tries)
          start = field_.sample_uniform(place);
      }
      NodeState node(
          RandomWaypoint(&field_, sc_.mobility, start,
                         rng::substream(sc_.seed, n, rng::Stream::kMobility), &obstacles_),
          rng::substream(sc_.seed, n, rng::Stream::kSensor),
          rng::substream(sc_.seed, n, rng::Stream::kShadowing),
          rng::substream(sc_.seed, n, rng::Stream::kTxOffset),
          rng::substream(sc_.seed, n, rng::Stream::kSlot),
          rng::substream(sc_.seed, n, rng::Stream::kMicroslot),
          rng::substream(sc_.seed, n, rng::Stream::kDecode));
      node.battery_mah = sc_.battery.capacity_mah;
      node.temp_phase = node.sensor.uniform01();
      node.act_phase = node.sensor.uniform01();
      if (!sc_.mac.slotted) {
        auto phase = rng::substream(sc_.seed, n, rng::Stream::kPhase);
        node.phase_s = phase.uniform(0.0, sc_.schedule.report_interval_s);
      }
      nodes_.push_back(std::move(node));
      push_event(nodes_.back().phase_s, EvClass::kNodeCycle, n, 0);
    }

    battery_bucket_s_ = std::max(3600.0, sc_.schedule.report_interval_s);
    push_event(0.0, EvClass::kMetricsTick, 0, 0);

    // Distance histogram geometry.
    geom::Vec2 lo, hi;
    field_.bounds(lo, hi);
    double max_d = 0.0;
    for (const auto& gw : gateways_) {
      for (const geom::Vec2 corner :
           {lo, hi, geom::Vec2{lo.x, hi.y}, geom::Vec2{hi.x, lo.y}}) {
        max_d = std::max(max_d, geom::distance(gw.spec.position, corner));
      }
    }
    const int bins = 24;
    hist_bin_m_ = std::max(10.0, std::ceil(max_d / bins / 10.0) * 10.0);
    report_.distance_histogram.resize(bins);
    for (int b = 0; b < bins; ++b) {
      report_.distance_histogram[b].lo_m = b * hist_bin_m_;
      report_.distance_histogram[b].hi_m = (b + 1) * hist_bin_m_;
    }

    collect_samples_ = sc_.alerts.enabled || !sc_.anomalies.empty();
  }

  bool inside_any_obstruction(const geom::Vec2& p) const {
    for (const auto& poly : obstacles_) {
      if (poly.contains(p)) return true;
    }
    return false;
  }

  void push_event(double t, EvClass cls, std::uint64_t a, std::uint64_t b) {
    // Steady-state queue depth is O(herd + in-flight packets); anything near
    // this bound indicates a runaway scenario.
    if (queue_.size() >= kEventQueueBound)
      throw std::runtime_error("event queue overflow: resource bound exceeded");
    queue_.push(Event{t, static_cast<std::uint8_t>(cls), a, b, event_seq_++});
  }

  static constexpr std::size_t kEventQueueBound = 1u << 25;

  // --- sensing -----------------------------------------------------------

  double sample_temp(NodeState& node, std::uint32_t id, double t) {
    const double noise = node.sensor.normal(0.0, 0.08);
    double temp = 38.4 + 0.4 * std::sin(2.0 * 3.14159265358979323846 * (t / 86400.0 + node.temp_phase)) + noise;
    temp = std::clamp(temp, 37.5, 39.2);
    for (const AnomalyEpisode& ep : sc_.anomalies) {
      if (ep.animal == id && ep.kind == analytics::AlertKind::kFever && t >= ep.start_s &&
          t < ep.start_s + ep.duration_s) {
        temp = ep.value;
      }
    }
    return temp;
  }

  double sample_activity(NodeState& node, std::uint32_t id, double t) {
    const double noise = node.sensor.normal(0.0, 0.05);
    double act = 0.35 + 0.2 * std::sin(2.0 * 3.14159265358979323846 * (t / 86400.0 + node.act_phase)) + noise;
    act = std::clamp(act, 0.08, 1.0);
    for (const AnomalyEpisode& ep : sc_.anomalies) {
      if (ep.animal == id && ep.kind == analytics::AlertKind::kInactivity && t >= ep.start_s &&
          t < ep.start_s + ep.duration_s) {
        act = ep.value;
      }
    }
    return act;
  }

  // --- per-cycle logic ---------------------------------------------------

  void on_cycle(std::uint32_t node_id) {
    NodeState& node = nodes_[node_id];
    if (node.dead) return;
    if (node.battery_mah < cycle_charge_mah_) {
      node.dead = true;
      return;
    }
    const double t0 = now_;
    const double interval = sc_.schedule.report_interval_s;
    const double dt = sc_.schedule.sampling_interval_s;
    const std::int64_t cycle_index = static_cast<std::int64_t>(std::llround((t0 - node.phase_s) / interval));

    // Fixed draw order: tx offset (or slot/micro), drain offset, sensors.
    double tx_time = 0.0;
    std::int64_t slot_id = -1;
    std::uint32_t micro = 0;
    if (sc_.mac.slotted) {
      const std::uint64_t slot = node.slot.uniform_int(static_cast<std::uint64_t>(slots_per_interval_));
      micro = static_cast<std::uint32_t>(node.micro.uniform_int(sc_.mac.jitter_microslots));
      slot_id = cycle_index * slots_per_interval_ + static_cast<std::int64_t>(slot);
      tx_time = t0 + static_cast<double>(slot) * slot_s_;
    } else {
      tx_time = t0 + node.txoff.uniform(0.0, interval - airtime_s_);
    }
    const double drain_time = t0 + node.txoff.uniform(0.0, interval - airtime_s_);

    // Build the packet's measurements; positions evaluated in time order.
    const std::uint32_t first_meas = static_cast<std::uint32_t>(measurements_.size());
    std::vector<double> wanted{tx_time, drain_time};
    for (std::uint32_t j = 0; j < spp_; ++j) wanted.push_back(t0 + j * dt);
    std::sort(wanted.begin(), wanted.end());
    std::map<double, geom::Vec2> positions;
    for (double t : wanted) positions[t] = node.walker.advance_to(t);

    const std::uint32_t packet_index = static_cast<std::uint32_t>(packets_.size());
    PacketInfo pkt;
    pkt.node = node_id;
    pkt.seq = node.next_seq++;
    pkt.gen_s = t0;
    pkt.first_meas = first_meas;
    pkt.n_meas = spp_;
    packets_.push_back(pkt);
    ++report_.generated;

    struct EventTrigger {
      double sample_t;
      std::uint32_t meas;
    };
    std::vector<EventTrigger> triggers;
    for (std::uint32_t j = 0; j < spp_; ++j) {
      const double ts = t0 + j * dt;
      Measurement m;
      m.node = node_id;
      m.packet = packet_index;
      m.time_s = ts;
      m.pos = positions[ts];
      m.temp_c = sample_temp(node, node_id, ts);
      m.activity = sample_activity(node, node_id, ts);
      m.battery_mah = node.battery_mah;
      measurements_.push_back(m);
      if (sc_.schedule.event_uplink && sc_.alerts.enabled) {
        if (node_side_trigger(node, measurements_.back()))
          triggers.push_back({ts, static_cast<std::uint32_t>(measurements_.size() - 1)});
      }
    }

    const bool beacon = beacon_heard(positions[wanted.front()]);
    const bool buffering = !beacon && sc_.node_buffer_capacity > 0;

    if (buffering) {
      node.battery_mah =
          std::max(0.0, node.battery_mah - std::max(0.0, cycle_charge_mah_ - tx_charge_mah_));
      for (std::uint32_t j = 0; j < spp_; ++j) buffer_measurement(node, first_meas + j);
    } else {
      node.battery_mah = std::max(0.0, node.battery_mah - cycle_charge_mah_);
      std::vector<std::uint32_t> meas(spp_);
      for (std::uint32_t j = 0; j < spp_; ++j) meas[j] = first_meas + j;
      register_tx(node, tx_time, kRegular, packet_index, std::move(meas),
                  positions[tx_time], slot_id, micro);
      ++report_.tx_attempts;
      if (beacon && !node.buffer.empty()) {
        std::vector<std::uint32_t> drained;
        while (!node.buffer.empty() && drained.size() < spp_) {
          drained.push_back(node.buffer.front());
          node.buffer.pop_front();
        }
        node.battery_mah = std::max(0.0, node.battery_mah - tx_charge_mah_);
        register_tx(node, drain_time, kBufferDrain, 0, std::move(drained),
                    positions[drain_time], -1, micro);
      }
    }

    // Event-triggered immediate uplink: three short repeats per trigger.
    for (const EventTrigger& trig : triggers) {
      for (int r = 0; r < 3; ++r) {
        const double t_ev = trig.sample_t + sc_.energy_profile.t_proc_s + 2.0 * r;
        node.battery_mah = std::max(0.0, node.battery_mah - tx_charge_mah_);
        register_tx(node, t_ev, kEventUplink, 0, {trig.meas}, measurements_[trig.meas].pos, -1,
                    micro);
      }
    }

    const double next = t0 + interval;
    if (next < sc_.duration_s) push_event(next, EvClass::kNodeCycle, node_id, 0);
  }

  /// Node-side rule mirror; returns true when a new episode is detected.
  bool node_side_trigger(NodeState& node, const Measurement& m) {
    bool fired = false;
    double fever_thr = sc_.alerts.fever_threshold_c;
    if (m.temp_c >= fever_thr) {
      if (node.fever_armed) {
        fired = true;
        node.fever_armed = false;
      }
    } else {
      node.fever_armed = true;
    }
    if (m.activity < sc_.alerts.inactivity_floor) {
      if (node.inact_start < 0.0) node.inact_start = m.time_s;
      if (node.inact_armed && m.time_s - node.inact_start >= sc_.alerts.inactivity_window_s) {
        fired = true;
        node.inact_armed = false;
      }
    } else {
      node.inact_start = -1.0;
      node.inact_armed = true;
    }
    if (sc_.alerts.geofence) {
      const geom::Polygon fence(*sc_.alerts.geofence);
      if (!fence.contains(m.pos)) {
        if (node.geofence_armed) {
          fired = true;
          node.geofence_armed = false;
        }
      } else {
        node.geofence_armed = true;
      }
    }
    return fired;
  }

  bool beacon_heard(const geom::Vec2& pos) const {
    for (const GatewayState& gw : gateways_) {
      if (!gw.live) continue;
      if (link_obstructed(pos, gw.spec.position)) continue;
      const channel::LinkSample sample{std::max(1.0, geom::distance(pos, gw.spec.position)), false, 0.0};
      const double margin =
          channel::link_margin_db(channel::path_loss_db(sample, sc_.channel_params), sc_.radio);
      if (margin >= 0.0) return true;
    }
    return false;
  }

  bool link_obstructed(const geom::Vec2& a, const geom::Vec2& b) const {
    for (const auto& poly : obstacles_) {
      if (geom::segment_blocked_by(poly, a, b)) return true;
    }
    return false;
  }

  void buffer_measurement(NodeState& node, std::uint32_t meas_index) {
    measurements_[meas_index].state = kBufferedMeas;
    node.buffer.push_back(meas_index);
    while (node.buffer.size() > sc_.node_buffer_capacity) {
      const std::uint32_t evicted = node.buffer.front();
      node.buffer.pop_front();
      measurements_[evicted].state = kEvictedMeas;
      resolve_packet(measurements_[evicted].packet, PacketFate::kExpired);
    }
  }

  void register_tx(NodeState& node, double start, TxKind kind, std::uint32_t packet,
                   std::vector<std::uint32_t> meas, const geom::Vec2& pos, std::int64_t slot_id,
                   std::uint32_t micro) {
    Transmission tx;
    tx.start_s = start;
    tx.end_s = start + airtime_s_;
    tx.slot_id = slot_id;
    tx.micro = micro;
    tx.node = static_cast<std::uint32_t>(&node - nodes_.data());
    tx.kind = static_cast<std::uint8_t>(kind);
    tx.packet = packet;
    tx.meas = std::move(meas);
    tx.rx_dbm.resize(gateways_.size());
    tx.blocked.resize(gateways_.size());
    double nearest_live = -1.0;
    for (std::size_t g = 0; g < gateways_.size(); ++g) {
      const double d = std::max(1.0, geom::distance(pos, gateways_[g].spec.position));
      const bool blocked = link_obstructed(pos, gateways_[g].spec.position);
      const double shadow = node.shadow.normal(0.0, sc_.channel_params.shadowing_sigma_db);
      const channel::LinkSample sample{d, blocked, shadow};
      const double pl = channel::path_loss_db(sample, sc_.channel_params);
      tx.rx_dbm[g] = sc_.radio.eirp_dbm() + sc_.radio.gain_rx_dbi - pl;
      tx.blocked[g] = blocked ? 1 : 0;
      if (gateways_[g].live && (nearest_live < 0.0 || d < nearest_live)) nearest_live = d;
    }
    tx.nearest_live_gw_m = nearest_live;
    const std::uint64_t index = transmissions_.size();
    transmissions_.push_back(std::move(tx));
    push_event(transmissions_[index].end_s, EvClass::kTxEnd, index, 0);
  }

  // --- reception ---------------------------------------------------------

  void on_tx_end(std::uint64_t tx_index) {
    Transmission& tx = transmissions_[tx_index];
    NodeState& node = nodes_[tx.node];

    // Overlap set (single shared channel).
    std::vector<std::uint64_t> overlaps;
    while (prune_head_ < transmissions_.size() &&
           transmissions_[prune_head_].end_s + sc_.schedule.report_interval_s + 2.0 < now_) {
      ++prune_head_;
    }
    for (std::uint64_t i = prune_head_; i < transmissions_.size(); ++i) {
      if (i == tx_index) continue;
      const Transmission& other = transmissions_[i];
      if (sc_.mac.slotted && tx.slot_id >= 0 && other.slot_id >= 0) {
        if (other.slot_id == tx.slot_id && other.micro == tx.micro) overlaps.push_back(i);
      } else if (other.start_s < tx.end_s && tx.start_s < other.end_s) {
        overlaps.push_back(i);
      }
    }

    bool any_collision = false, any_snr = false, any_congestion = false;
    std::vector<std::size_t> accepted;
    for (std::size_t g = 0; g < gateways_.size(); ++g) {
      const double u = node.decode.uniform01();  // consumed for every gateway
      GatewayState& gw = gateways_[g];
      if (!gw.live) continue;

      bool destroyed = false;
      for (std::uint64_t o : overlaps) {
        if (!sc_.mac.capture_enabled ||
            transmissions_[o].rx_dbm[g] > tx.rx_dbm[g] - sc_.mac.capture_threshold_db) {
          destroyed = true;
          break;
        }
      }
      if (destroyed) {
        any_collision = true;
        continue;
      }

      bool decode_ok;
      if (sc_.mac.hard_threshold) {
        decode_ok = tx.rx_dbm[g] - sc_.radio.noise_figure_db - sc_.radio.sensitivity_dbm >= 0.0;
      } else {
        const double snr = tx.rx_dbm[g] - sc_.radio.noise_figure_db - sc_.radio.noise_floor();
        decode_ok = u < channel::packet_success_prob(snr, sc_.channel_params, gamma_th_);
      }
      if (!decode_ok) {
        if (!tx.blocked[g]) any_snr = true;
        continue;
      }

      // Gateway ingest token bucket, in message units.
      gw.tokens = std::min(gw.token_cap,
                           gw.tokens + gw.spec.ingest_capacity_msg_per_s * (now_ - gw.last_refill_s));
      gw.last_refill_s = now_;
      const double need = static_cast<double>(tx.meas.size());
      if (gw.tokens < need) {
        any_congestion = true;
        ++report_.congestion_drops;
        continue;
      }
      gw.tokens -= need;
      accepted.push_back(g);
    }

    const bool delivered = !accepted.empty();
    if (delivered) {
      for (std::size_t g : accepted) {
        push_event(now_ + gateways_[g].spec.backhaul_delay_s, EvClass::kCloudArrival, tx_index, g);
      }
      for (std::uint32_t m : tx.meas) measurements_[m].state = kDeliveredMeas;
    }

    if (tx.kind == kRegular) {
      if (tx.nearest_live_gw_m >= 0.0) {
        auto& hist = report_.distance_histogram;
        const std::size_t bin = std::min(
            hist.size() - 1, static_cast<std::size_t>(tx.nearest_live_gw_m / hist_bin_m_));
        ++hist[bin].attempts;
        if (delivered) ++hist[bin].successes;
      }
      if (delivered) {
        resolve_packet(tx.packet, PacketFate::kDelivered);
      } else if (any_collision || any_congestion) {
        resolve_packet(tx.packet, PacketFate::kLostCollision);
        ++report_.collision_losses;
      } else if (any_snr) {
        resolve_packet(tx.packet, PacketFate::kLostSnr);
      } else {
        resolve_packet(tx.packet, PacketFate::kLostObstruction);
      }
    } else if (tx.kind == kBufferDrain) {
      if (delivered) {
        for (std::uint32_t m : tx.meas) try_resolve_buffered_packet(measurements_[m].packet);
      } else {
        // back to the head of the queue, order preserved
        for (auto it = tx.meas.rbegin(); it != tx.meas.rend(); ++it) {
          measurements_[*it].state = kBufferedMeas;
          node.buffer.push_front(*it);
        }
      }
    }
    // Event uplinks only accelerate detection; the regular packet still
    // carries the sample for delivery accounting.
  }

  void resolve_packet(std::uint32_t packet_index, PacketFate fate) {
    PacketInfo& pkt = packets_[packet_index];
    if (pkt.resolved) return;
    pkt.resolved = true;
    pkt.fate = fate;
    ++report_.fate_counts[static_cast<int>(fate)];
  }

  void try_resolve_buffered_packet(std::uint32_t packet_index) {
    PacketInfo& pkt = packets_[packet_index];
    if (pkt.resolved) return;
    for (std::uint32_t m = pkt.first_meas; m < pkt.first_meas + pkt.n_meas; ++m) {
      if (measurements_[m].state != kDeliveredMeas) return;
    }
    resolve_packet(packet_index, PacketFate::kBufferedThenDelivered);
  }

  // --- cloud stage -------------------------------------------------------

  void on_cloud_arrival(std::uint64_t tx_index, std::uint64_t /*gateway*/) {
    Transmission& tx = transmissions_[tx_index];
    if (tx.cloud_seen) return;  // duplicate copy from another gateway
    tx.cloud_seen = true;
    const double m = static_cast<double>(tx.meas.size());
    const double backlog = std::max(0.0, (cloud_busy_until_ - now_)) * sc_.cloud.service_rate_msg_per_s;
    if (backlog + m > sc_.cloud.queue_bound_msgs) {
      report_.cloud_msgs_dropped += tx.meas.size();
      return;
    }
    const double done = std::max(cloud_busy_until_, now_) + m / sc_.cloud.service_rate_msg_per_s;
    cloud_busy_until_ = done;
    report_.cloud_msgs_processed += tx.meas.size();
    if (done <= sc_.duration_s) processed_in_window_ += tx.meas.size();
    const std::size_t bucket = static_cast<std::size_t>(done / report_.throughput_bucket_s);
    if (report_.throughput_msgs.size() <= bucket) report_.throughput_msgs.resize(bucket + 1, 0.0);
    report_.throughput_msgs[bucket] += m;

    const double detection = done + sc_.cloud.processing_delay_s;
    const double delivery = detection + sc_.cloud.alert_delivery_delay_s;
    for (std::uint32_t mi : tx.meas) {
      Measurement& meas = measurements_[mi];
      if (detection < meas.detection_s) {
        meas.detection_s = detection;
        meas.delivery_s = delivery;
      }
    }
  }

  void on_metrics_tick() {
    report_.battery_times_s.push_back(now_);
    std::vector<double> row(nodes_.size());
    for (std::size_t n = 0; n < nodes_.size(); ++n) row[n] = nodes_[n].battery_mah;
    report_.battery_mah.push_back(std::move(row));
    const double next = now_ + battery_bucket_s_;
    if (next <= sc_.duration_s) push_event(next, EvClass::kMetricsTick, 0, 0);
  }

  // --- wrap-up -----------------------------------------------------------

  MetricsReport finalize() {
    for (std::uint32_t p = 0; p < packets_.size(); ++p) {
      if (!packets_[p].resolved) resolve_packet(p, PacketFate::kExpired);
    }

    std::uint64_t fate_total = 0;
    for (std::uint64_t c : report_.fate_counts) fate_total += c;
    if (fate_total != report_.generated)
      throw std::logic_error("packet conservation violated: generated != sum of fates");

    const auto delivered = report_.fate(PacketFate::kDelivered);
    const auto buffered = report_.fate(PacketFate::kBufferedThenDelivered);
    report_.pdr = report_.generated ? static_cast<double>(delivered) / report_.generated : 1.0;
    report_.eventual_pdr =
        report_.generated ? static_cast<double>(delivered + buffered) / report_.generated : 1.0;

    std::uint64_t outage_generated = 0, outage_recovered = 0;
    for (const PacketInfo& pkt : packets_) {
      bool in_outage = false;
      for (const FailureWindow& w : outage_union_) {
        if (pkt.gen_s >= w.start_s && pkt.gen_s < w.end_s) {
          in_outage = true;
          break;
        }
      }
      if (!in_outage) continue;
      ++outage_generated;
      if (pkt.fate == PacketFate::kDelivered || pkt.fate == PacketFate::kBufferedThenDelivered)
        ++outage_recovered;
    }
    report_.generated_during_outage = outage_generated;
    report_.recovered_during_outage = outage_recovered;
    report_.recovery_ratio =
        outage_generated ? static_cast<double>(outage_recovered) / outage_generated : 1.0;

    report_.mean_throughput_msg_s = processed_in_window_ / sc_.duration_s;
    double peak = 0.0;
    for (double msgs : report_.throughput_msgs)
      peak = std::max(peak, msgs / report_.throughput_bucket_s);
    report_.peak_throughput_msg_s = peak;
    report_.battery_bucket_s = battery_bucket_s_;

    if (collect_samples_) run_analytics();

    report_.scenario_name = sc_.name;
    report_.seed = sc_.seed;
    report_.effective_config = sc_.to_json();
    report_.effective_config["derived"] = {
        {"airtime_s", airtime_s_},
        {"slot_s", slot_s_},
        {"samples_per_packet", spp_},
        {"snr_threshold_db", gamma_th_},
        {"cycle_charge_mah", cycle_charge_mah_},
        {"tau", slot_s_ / sc_.schedule.report_interval_s},
    };
    return std::move(report_);
  }

  void run_analytics() {
    // Cloud-side telemetry stream: delivered samples in per-animal time order.
    std::vector<analytics::TelemetrySample> stream;
    for (const Measurement& m : measurements_) {
      if (m.state != kDeliveredMeas || !std::isfinite(m.detection_s)) continue;
      stream.push_back({m.node, m.time_s, m.pos, m.temp_c, m.activity, m.detection_s, m.delivery_s});
    }
    std::sort(stream.begin(), stream.end(),
              [](const analytics::TelemetrySample& a, const analytics::TelemetrySample& b) {
                if (a.animal_id != b.animal_id) return a.animal_id < b.animal_id;
                return a.time_s < b.time_s;
              });

    if (sc_.alerts.enabled) {
      analytics::AlertRules rules;
      rules.fever_threshold_c = sc_.alerts.fever_threshold_c;
      rules.inactivity_floor = sc_.alerts.inactivity_floor;
      rules.inactivity_window_s = sc_.alerts.inactivity_window_s;
      if (sc_.alerts.geofence) rules.geofence = geom::Polygon(*sc_.alerts.geofence);
      report_.alerts = analytics::evaluate_rules(stream, rules);
    }

    // Behavioral features over the delivered stream.
    struct Acc {
      double sum_a = 0, sum_a2 = 0, sum_t = 0, dist = 0;
      std::uint64_t n = 0;
      geom::Vec2 last;
      bool has_last = false;
    };
    std::vector<Acc> accs(nodes_.size());
    for (const auto& s : stream) {
      Acc& a = accs[s.animal_id];
      a.sum_a += s.activity;
      a.sum_a2 += s.activity * s.activity;
      a.sum_t += s.body_temp_c;
      if (a.has_last) a.dist += geom::distance(a.last, s.position);
      a.last = s.position;
      a.has_last = true;
      ++a.n;
    }
    for (std::uint32_t n = 0; n < accs.size(); ++n) {
      const Acc& a = accs[n];
      if (a.n == 0) continue;
      analytics::BehaviorFeature f;
      f.animal_id = n;
      f.mean_activity = a.sum_a / a.n;
      f.activity_variance = std::max(0.0, a.sum_a2 / a.n - f.mean_activity * f.mean_activity);
      f.mean_temp_c = a.sum_t / a.n;
      f.distance_m = a.dist;
      report_.features.push_back(f);
    }

    if (report_.features.size() >= 3) {
      const std::uint32_t k = std::min<std::uint32_t>(3, static_cast<std::uint32_t>(report_.features.size()));
      auto clusters = analytics::kmeans_cluster(report_.features, k, sc_.seed);
      report_.cluster_assignment = clusters.assignment;
      auto outliers = analytics::zscore_outliers(report_.features, 3.0);
      report_.outlier_ids = outliers.flagged_ids;

      if (!sc_.anomalies.empty()) {
        // Synthetic-label harness: injected animals are the positives and
        // the z-score norm is the anomaly score.
        std::vector<int> is_anomalous(nodes_.size(), 0);
        for (const AnomalyEpisode& ep : sc_.anomalies) is_anomalous[ep.animal] = 1;
        std::vector<double> scores;
        std::vector<int> labels;
        scores.reserve(report_.features.size());
        labels.reserve(report_.features.size());
        for (const auto& f : report_.features) {
          scores.push_back(anomaly_score(f, report_.features));
          labels.push_back(is_anomalous[f.animal_id]);
        }
        bool has_pos = false, has_neg = false;
        for (int l : labels) (l ? has_pos : has_neg) = true;
        if (has_pos && has_neg) {
          report_.anomaly_auroc = analytics::auroc(scores, labels);
          report_.roc = analytics::roc_points(scores, labels);
        }
      }
    }
  }

  static double anomaly_score(const analytics::BehaviorFeature& f,
                              const std::vector<analytics::BehaviorFeature>& all) {
    // Norm of the per-dimension z-scores relative to the herd.
    std::array<double, 4> mean{}, var{};
    for (const auto& g : all) {
      const auto v = g.values();
      for (int d = 0; d < 4; ++d) mean[d] += v[d] / all.size();
    }
    for (const auto& g : all) {
      const auto v = g.values();
      for (int d = 0; d < 4; ++d) var[d] += (v[d] - mean[d]) * (v[d] - mean[d]) / all.size();
    }
    const auto v = f.values();
    double acc = 0.0;
    for (int d = 0; d < 4; ++d) {
      if (var[d] > 0.0) {
        const double z = (v[d] - mean[d]) / std::sqrt(var[d]);
        acc += z * z;
      }
    }
    return std::sqrt(acc);
  }

  Scenario sc_;
  geom::Polygon field_;
  std::vector<geom::Polygon> obstacles_;
  std::vector<NodeState> nodes_;
  std::vector<GatewayState> gateways_;
  std::vector<std::vector<FailureWindow>> outages_;
  std::vector<FailureWindow> outage_union_;

  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  std::uint64_t event_seq_ = 0;
  double now_ = 0.0;

  std::vector<Measurement> measurements_;
  std::vector<PacketInfo> packets_;
  std::vector<Transmission> transmissions_;
  std::uint64_t prune_head_ = 0;

  double cloud_busy_until_ = 0.0;
  double processed_in_window_ = 0.0;

  double airtime_s_ = 0.0;
  double slot_s_ = 0.0;
  std::int64_t slots_per_interval_ = 1;
  std::uint32_t spp_ = 1;
  double gamma_th_ = 0.0;
  double cycle_charge_mah_ = 0.0;
  double tx_charge_mah_ = 0.0;
  double battery_bucket_s_ = 3600.0;
  double hist_bin_m_ = 50.0;
  bool collect_samples_ = false;

  MetricsReport report_;
};

/// Run a scenario and return the metrics report.
inline MetricsReport run(const Scenario& scenario) { return Simulator(scenario).run(); }

}  // namespace agrotrack::sim
