#pragma once

#include <cmath>
#include <stdexcept>

#include "agrotrack/channel.hpp"

namespace agrotrack::energy {

/// Per-cycle current/duration profile of a collar node. One cycle spans one
/// reporting interval: sense, process, transmit, receive, then sleep for the
/// remainder.
struct EnergyProfile {
  double i_sense_ma = 37.75;  ///< GPS fix dominates the sensing window
  double i_proc_ma = 10.0;
  double i_tx_ma = 120.0;
  double i_rx_ma = 11.0;
  double i_sleep_ma = 0.01;
  double t_sense_s = 35.0;
  double t_proc_s = 0.5;
  double t_rx_s = 0.3;
  double t_tx_s = std::nan("");  ///< NaN: derive from time_on_air
  double report_interval_s = 300.0;

  double tx_time(const channel::RadioParams& radio) const;
  double active_time(const channel::RadioParams& radio) const {
    return t_sense_s + t_proc_s + tx_time(radio) + t_rx_s;
  }

  void validate(const channel::RadioParams& radio) const {
    if (i_sense_ma < 0 || i_proc_ma < 0 || i_tx_ma < 0 || i_rx_ma < 0 || i_sleep_ma < 0)
      throw std::domain_error("currents must be >= 0");
    if (t_sense_s < 0 || t_proc_s < 0 || t_rx_s < 0)
      throw std::domain_error("durations must be >= 0");
    if (report_interval_s <= 0) throw std::domain_error("report interval must be > 0");
    if (active_time(radio) > report_interval_s)
      throw std::domain_error("active time exceeds the reporting interval");
  }
};

struct BatterySpec {
  double capacity_mah = 3000.0;
  double voltage_v = 3.7;

  void validate() const {
    if (capacity_mah <= 0.0) throw std::domain_error("capacity must be > 0");
    if (voltage_v <= 0.0) throw std::domain_error("voltage must be > 0");
  }
};

/// LoRa packet time on air: explicit header, CRC on, low-data-rate
/// optimization at SF11+/125 kHz.
inline double time_on_air_s(const channel::RadioParams& radio) {
  radio.validate();
  const int sf = radio.spreading_factor;
  const double symbol_s = std::pow(2.0, sf) / radio.bandwidth_hz;
  const bool low_dr = sf >= 11 && radio.bandwidth_hz == 125000.0;
  const int crc = 1, implicit_header = 0;
  const double num = 8.0 * radio.payload_bytes - 4.0 * sf + 28.0 + 16.0 * crc -
                     20.0 * implicit_header;
  const double den = 4.0 * (sf - (low_dr ? 2 : 0));
  const double payload_symbols =
      8.0 + std::max(0.0, std::ceil(num / den) * (radio.coding_rate + 4.0));
  return (radio.preamble_symbols + 4.25 + payload_symbols) * symbol_s;
}

inline double EnergyProfile::tx_time(const channel::RadioParams& radio) const {
  return std::isnan(t_tx_s) ? time_on_air_s(radio) : t_tx_s;
}

/// Battery capacity over average draw, in hours.
inline double lifetime_hours(const BatterySpec& bat, double i_avg_ma) {
  bat.validate();
  if (i_avg_ma <= 0.0) throw std::domain_error("average current must be > 0");
  return bat.capacity_mah / i_avg_ma;
}

/// Two-state duty-cycle average current.
inline double avg_current_two_state(double i_active_ma, double t_active_s, double i_sleep_ma,
                                    double t_sleep_s) {
  const double total = t_active_s + t_sleep_s;
  if (total <= 0.0) throw std::domain_error("cycle time must be > 0");
  return (i_active_ma * t_active_s + i_sleep_ma * t_sleep_s) / total;
}

/// Charge drawn over one full cycle, in mA*s.
inline double cycle_charge_mas(const EnergyProfile& p, const channel::RadioParams& radio) {
  p.validate(radio);
  const double t_tx = p.tx_time(radio);
  const double t_sleep = p.report_interval_s - (p.t_sense_s + p.t_proc_s + t_tx + p.t_rx_s);
  return p.i_sense_ma * p.t_sense_s + p.i_proc_ma * p.t_proc_s + p.i_tx_ma * t_tx +
         p.i_rx_ma * p.t_rx_s + p.i_sleep_ma * t_sleep;
}

/// Five-state duty-cycle average current over the reporting interval.
inline double avg_current_ma(const EnergyProfile& p, const channel::RadioParams& radio) {
  return cycle_charge_mas(p, radio) / p.report_interval_s;
}

/// Energy spent per cycle at nominal battery voltage, in millijoules.
inline double cycle_energy_mj(const EnergyProfile& p, const channel::RadioParams& radio,
                              const BatterySpec& bat) {
  bat.validate();
  return bat.voltage_v * cycle_charge_mas(p, radio);
}

/// Lifetime via the per-cycle energy route. Algebraically identical to
/// lifetime_hours(bat, avg_current_ma(profile)).
inline double lifetime_from_energy_hours(const EnergyProfile& p, const channel::RadioParams& radio,
                                         const BatterySpec& bat) {
  const double e_cyc = cycle_energy_mj(p, radio, bat);
  if (e_cyc <= 0.0) throw std::domain_error("cycle energy must be > 0");
  // capacity [mAh] * 3600 [s/h] * voltage = total energy in mJ
  return bat.capacity_mah * 3600.0 * bat.voltage_v / e_cyc * p.report_interval_s / 3600.0;
}

}  // namespace agrotrack::energy
