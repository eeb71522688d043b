#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace agrotrack::channel {

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Thermal noise power N0*B in dBm for a given bandwidth.
inline double noise_floor_dbm(double bandwidth_hz) {
  if (bandwidth_hz <= 0.0) throw std::domain_error("bandwidth must be positive");
  return -174.0 + 10.0 * std::log10(bandwidth_hz);
}

/// Demodulation SNR threshold ladder per spreading factor.
inline double snr_threshold_db(int spreading_factor) {
  switch (spreading_factor) {
    case 7: return -7.5;
    case 8: return -10.0;
    case 9: return -12.5;
    case 10: return -15.0;
    case 11: return -17.5;
    case 12: return -20.0;
    default: throw std::domain_error("spreading factor must be in [7, 12]");
  }
}

/// Large-scale propagation constants for the log-distance model with
/// shadowing, an obstruction penalty and the logistic success curve.
struct ChannelParams {
  double pl_d0_db = 79.0;             ///< path loss at the reference distance
  double d0_m = 100.0;                ///< reference distance
  double path_loss_exponent = 2.9;    ///< n
  double shadowing_sigma_db = 6.0;    ///< sigma of the zero-mean Gaussian term
  double obstruction_penalty_db = 18.0;
  double logistic_alpha_per_db = 1.5; ///< steepness of the success roll-off
  double snr_threshold_override_db = std::nan("");  ///< NaN: use the SF ladder

  void validate() const {
    if (d0_m <= 0.0) throw std::domain_error("d0_m must be > 0");
    if (path_loss_exponent < 1.0) throw std::domain_error("path_loss_exponent must be >= 1");
    if (shadowing_sigma_db < 0.0) throw std::domain_error("shadowing_sigma_db must be >= 0");
    if (obstruction_penalty_db < 0.0) throw std::domain_error("obstruction_penalty_db must be >= 0");
    if (logistic_alpha_per_db <= 0.0) throw std::domain_error("logistic_alpha_per_db must be > 0");
  }
};

/// Radio configuration of the collar transmitter and gateway receiver.
struct RadioParams {
  double tx_power_dbm = 14.0;
  double gain_tx_dbi = 2.0;
  double gain_rx_dbi = 2.0;
  double noise_figure_db = 6.0;
  double sensitivity_dbm = -123.0;
  int spreading_factor = 7;
  double bandwidth_hz = 125000.0;
  int coding_rate = 1;      ///< denominator offset: CR 4/(4+coding_rate)
  int payload_bytes = 20;
  int preamble_symbols = 8;

  double noise_floor() const { return noise_floor_dbm(bandwidth_hz); }
  double eirp_dbm() const { return tx_power_dbm + gain_tx_dbi; }

  void validate() const {
    if (spreading_factor < 7 || spreading_factor > 12)
      throw std::domain_error("spreading factor must be in [7, 12]");
    if (bandwidth_hz != 125000.0 && bandwidth_hz != 250000.0 && bandwidth_hz != 500000.0)
      throw std::domain_error("bandwidth must be 125, 250 or 500 kHz");
    if (coding_rate < 1 || coding_rate > 4)
      throw std::domain_error("coding rate offset must be in [1, 4]");
    if (payload_bytes < 1) throw std::domain_error("payload_bytes must be >= 1");
    if (preamble_symbols < 1) throw std::domain_error("preamble_symbols must be >= 1");
  }
};

/// Effective SNR threshold for a radio under these channel params.
inline double snr_threshold_db(const ChannelParams& ch, const RadioParams& radio) {
  if (!std::isnan(ch.snr_threshold_override_db)) return ch.snr_threshold_override_db;
  return snr_threshold_db(radio.spreading_factor);
}

/// One realized link: distance, blockage flag and the shadowing draw.
struct LinkSample {
  double distance_m = 0.0;
  bool obstructed = false;
  double shadow_db = 0.0;
};

/// Log-distance path loss with shadowing and the obstruction indicator.
inline double path_loss_db(const LinkSample& sample, const ChannelParams& params) {
  params.validate();
  if (sample.distance_m <= 0.0) throw std::domain_error("distance must be > 0");
  double pl = params.pl_d0_db +
              10.0 * params.path_loss_exponent * std::log10(sample.distance_m / params.d0_m) +
              sample.shadow_db;
  if (sample.obstructed) pl += params.obstruction_penalty_db;
  return pl;
}

/// Margin above receiver sensitivity; reception succeeds at >= 0 under the
/// hard-threshold model.
inline double link_margin_db(double path_loss, const RadioParams& radio) {
  return radio.tx_power_dbm + radio.gain_tx_dbi + radio.gain_rx_dbi - path_loss -
         radio.noise_figure_db - radio.sensitivity_dbm;
}

/// Signal-to-noise ratio at the receiver for a given path loss.
inline double snr_db(double path_loss, const RadioParams& radio) {
  return radio.tx_power_dbm + radio.gain_tx_dbi + radio.gain_rx_dbi - path_loss -
         radio.noise_figure_db - radio.noise_floor();
}

/// Logistic packet-success curve around the demodulation threshold.
inline double packet_success_prob(double snr, const ChannelParams& params, double threshold_db) {
  if (params.logistic_alpha_per_db <= 0.0) throw std::domain_error("alpha must be > 0");
  return 1.0 / (1.0 + std::exp(-params.logistic_alpha_per_db * (snr - threshold_db)));
}

/// Full composition: distance + blockage + shadow draw -> success probability.
inline double success_probability(double distance_m, bool obstructed, double shadow_db,
                                  const ChannelParams& ch, const RadioParams& radio) {
  const LinkSample sample{distance_m, obstructed, shadow_db};
  const double snr = snr_db(path_loss_db(sample, ch), radio);
  return packet_success_prob(snr, ch, snr_threshold_db(ch, radio));
}

/// E[p_succ] over the Gaussian shadowing term, by Gauss-Hermite quadrature.
inline double expected_success_prob(double distance_m, bool obstructed, const ChannelParams& ch,
                                    const RadioParams& radio) {
  // 40-node Gauss-Hermite rule, generated from the recurrence at startup.
  static constexpr int kNodes = 40;
  struct Rule {
    double x[kNodes];
    double w[kNodes];
  };
  static const Rule rule = [] {
    // Golub-Welsch via symmetric tridiagonal QL is overkill here; Newton
    // iteration on the Hermite polynomial is compact and accurate.
    Rule r{};
    const int n = kNodes;
    double guess = 0.0;
    for (int i = 0; i < (n + 1) / 2; ++i) {
      if (i == 0) {
        guess = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
      } else if (i == 1) {
        guess -= 1.14 * std::pow(n, 0.426) / guess;
      } else if (i == 2) {
        guess = 1.86 * guess - 0.86 * r.x[0];
      } else if (i == 3) {
        guess = 1.91 * guess - 0.91 * r.x[1];
      } else {
        guess = 2.0 * guess - r.x[i - 2];
      }
      double p0 = 0.0, p1 = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        p0 = std::pow(3.14159265358979323846, -0.25);
        p1 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = guess * std::sqrt(2.0 / (j + 1.0)) * p1 - std::sqrt(j / (j + 1.0)) * p2;
        }
        const double deriv = std::sqrt(2.0 * n) * p1;
        const double step = p0 / deriv;
        guess -= step;
        if (std::abs(step) < 1e-15) break;
      }
      const double deriv = std::sqrt(2.0 * n) * p1;
      r.x[i] = guess;
      r.x[n - 1 - i] = -guess;
      r.w[i] = 2.0 / (deriv * deriv);
      r.w[n - 1 - i] = r.w[i];
    }
    return r;
  }();

  if (ch.shadowing_sigma_db == 0.0) {
    return success_probability(distance_m, obstructed, 0.0, ch, radio);
  }
  const double scale = std::sqrt(2.0) * ch.shadowing_sigma_db;
  double acc = 0.0;
  for (int i = 0; i < kNodes; ++i) {
    acc += rule.w[i] * success_probability(distance_m, obstructed, scale * rule.x[i], ch, radio);
  }
  return acc / std::sqrt(3.14159265358979323846);
}

/// Pr(SNR < threshold) under Gaussian shadowing; sigma = 0 degenerates to a
/// step function.
inline double obstruction_outage_prob(double mean_snr_db, double sigma_db, double threshold_db) {
  if (sigma_db < 0.0) throw std::domain_error("sigma must be >= 0");
  if (sigma_db == 0.0) return mean_snr_db < threshold_db ? 1.0 : 0.0;
  return normal_cdf((threshold_db - mean_snr_db) / sigma_db);
}

/// Mixture of two stretched exponentials: open-field and obstructed regimes.
struct TwoRegimeFit {
  double obstructed_fraction = 0.0;  ///< mixture weight of the obstructed term
  double open_scale_m = 1000.0;      ///< d_c
  double open_shape = 2.0;           ///< beta
  double obstructed_scale_m = 500.0; ///< d_c of the obstructed regime
  double obstructed_shape = 2.0;

  void validate() const {
    if (obstructed_fraction < 0.0 || obstructed_fraction > 1.0)
      throw std::domain_error("obstructed_fraction must be in [0, 1]");
    if (open_scale_m <= 0.0 || obstructed_scale_m <= 0.0)
      throw std::domain_error("scales must be > 0");
    if (open_shape <= 0.0 || obstructed_shape <= 0.0)
      throw std::domain_error("shapes must be > 0");
  }
};

inline double success_two_regime(double distance_m, const TwoRegimeFit& fit) {
  fit.validate();
  if (distance_m < 0.0) throw std::domain_error("distance must be >= 0");
  const double open_term = std::exp(-std::pow(distance_m / fit.open_scale_m, fit.open_shape));
  const double obs_term =
      std::exp(-std::pow(distance_m / fit.obstructed_scale_m, fit.obstructed_shape));
  return (1.0 - fit.obstructed_fraction) * open_term + fit.obstructed_fraction * obs_term;
}

}  // namespace agrotrack::channel
