#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "agrotrack/geometry.hpp"
#include "agrotrack/rng.hpp"

namespace agrotrack::analytics {

enum class AlertKind { kGeofence, kInactivity, kFever };

inline const char* to_string(AlertKind kind) {
  switch (kind) {
    case AlertKind::kGeofence: return "geofence";
    case AlertKind::kInactivity: return "inactivity";
    case AlertKind::kFever: return "fever";
  }
  return "?";
}

/// Thresholds applied cloud-side to the delivered telemetry stream.
/// Per-animal overrides replace the herd-wide fever threshold.
struct AlertRules {
  double fever_threshold_c = 39.5;
  double inactivity_floor = 0.05;
  double inactivity_window_s = 3600.0;
  std::optional<geom::Polygon> geofence;  ///< boundary counts as inside
  std::map<std::uint32_t, double> fever_override_c;

  void validate() const {
    if (inactivity_window_s <= 0.0) throw std::domain_error("inactivity window must be > 0");
    if (fever_threshold_c < 30.0 || fever_threshold_c > 45.0)
      throw std::domain_error("fever threshold outside the physiologic range");
  }
};

/// One delivered telemetry sample, annotated with pipeline timing.
struct TelemetrySample {
  std::uint32_t animal_id = 0;
  double time_s = 0.0;        ///< when the measurement was taken
  geom::Vec2 position;
  double body_temp_c = 0.0;
  double activity = 0.0;
  double detection_s = 0.0;   ///< cloud processing instant
  double delivery_s = 0.0;    ///< farmer notification instant
};

struct AlertEvent {
  std::uint32_t animal_id = 0;
  AlertKind kind = AlertKind::kFever;
  double trigger_s = 0.0;
  double detection_s = 0.0;
  double delivery_s = 0.0;

  double latency_s() const { return delivery_s - trigger_s; }
};

/// Evaluate the alert rules over per-animal, time-ordered samples. Each rule
/// fires once per continuous episode and re-arms after recovery.
inline std::vector<AlertEvent> evaluate_rules(const std::vector<TelemetrySample>& samples,
                                              const AlertRules& rules) {
  rules.validate();
  struct State {
    double last_time = -1.0;
    double inactivity_start = -1.0;
    bool inactivity_armed = true;
    bool fever_armed = true;
    bool geofence_armed = true;
  };
  std::map<std::uint32_t, State> states;
  std::vector<AlertEvent> events;

  for (const TelemetrySample& s : samples) {
    State& st = states[s.animal_id];
    if (s.time_s < st.last_time)
      throw std::invalid_argument("telemetry stream is not time-ordered per animal");
    st.last_time = s.time_s;

    double fever_thr = rules.fever_threshold_c;
    if (auto it = rules.fever_override_c.find(s.animal_id); it != rules.fever_override_c.end())
      fever_thr = it->second;

    if (s.body_temp_c >= fever_thr) {
      if (st.fever_armed) {
        events.push_back({s.animal_id, AlertKind::kFever, s.time_s, s.detection_s, s.delivery_s});
        st.fever_armed = false;
      }
    } else {
      st.fever_armed = true;
    }

    if (s.activity < rules.inactivity_floor) {
      if (st.inactivity_start < 0.0) st.inactivity_start = s.time_s;
      if (st.inactivity_armed && s.time_s - st.inactivity_start >= rules.inactivity_window_s) {
        events.push_back(
            {s.animal_id, AlertKind::kInactivity, s.time_s, s.detection_s, s.delivery_s});
        st.inactivity_armed = false;
      }
    } else {
      st.inactivity_start = -1.0;
      st.inactivity_armed = true;
    }

    if (rules.geofence) {
      if (!rules.geofence->contains(s.position)) {
        if (st.geofence_armed) {
          events.push_back(
              {s.animal_id, AlertKind::kGeofence, s.time_s, s.detection_s, s.delivery_s});
          st.geofence_armed = false;
        }
      } else {
        st.geofence_armed = true;
      }
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const AlertEvent& a, const AlertEvent& b) {
    return a.trigger_s < b.trigger_s;
  });
  return events;
}

/// End-to-end alert latency from pipeline stage delays.
inline double alert_latency_s(double uplink_wait_s, double airtime_s, double backhaul_s,
                              double cloud_s) {
  if (uplink_wait_s < 0 || airtime_s < 0 || backhaul_s < 0 || cloud_s < 0)
    throw std::domain_error("pipeline delays must be >= 0");
  return uplink_wait_s + airtime_s + backhaul_s + cloud_s;
}

/// Per-animal window aggregates used for clustering and outlier flagging.
struct BehaviorFeature {
  std::uint32_t animal_id = 0;
  double mean_activity = 0.0;
  double activity_variance = 0.0;
  double mean_temp_c = 0.0;
  double distance_m = 0.0;

  std::array<double, 4> values() const {
    return {mean_activity, activity_variance, mean_temp_c, distance_m};
  }
};

namespace detail {

inline std::vector<std::array<double, 4>> standardize(const std::vector<BehaviorFeature>& feats,
                                                      bool* any_variance = nullptr) {
  const std::size_t n = feats.size();
  std::array<double, 4> mean{}, var{};
  for (const auto& f : feats) {
    const auto v = f.values();
    for (int d = 0; d < 4; ++d) mean[d] += v[d];
  }
  for (int d = 0; d < 4; ++d) mean[d] /= static_cast<double>(n);
  for (const auto& f : feats) {
    const auto v = f.values();
    for (int d = 0; d < 4; ++d) var[d] += (v[d] - mean[d]) * (v[d] - mean[d]);
  }
  bool some = false;
  for (int d = 0; d < 4; ++d) {
    var[d] /= static_cast<double>(n);
    if (var[d] > 0.0) some = true;
  }
  if (any_variance) *any_variance = some;
  std::vector<std::array<double, 4>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = feats[i].values();
    for (int d = 0; d < 4; ++d) {
      out[i][d] = var[d] > 0.0 ? (v[d] - mean[d]) / std::sqrt(var[d]) : 0.0;
    }
  }
  return out;
}

inline double sq_dist(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  double acc = 0.0;
  for (int d = 0; d < 4; ++d) acc += (a[d] - b[d]) * (a[d] - b[d]);
  return acc;
}

}  // namespace detail

struct KMeansResult {
  std::vector<std::uint32_t> assignment;
  std::vector<std::array<double, 4>> centroids;  ///< in standardized space
  double wcss = 0.0;
  std::vector<double> wcss_history;  ///< per Lloyd iteration, non-increasing
};

/// Deterministic k-means over standardized features: k-means++ seeding from
/// the given seed, Lloyd iterations to tolerance 1e-8 or 300 iterations.
inline KMeansResult kmeans_cluster(const std::vector<BehaviorFeature>& features, std::uint32_t k,
                                   std::uint64_t seed) {
  if (k < 1) throw std::domain_error("k must be >= 1");
  if (k > features.size()) throw std::domain_error("k exceeds the number of feature vectors");
  const auto pts = detail::standardize(features);
  const std::size_t n = pts.size();
  auto gen = rng::substream(seed, 0, rng::Stream::kAnalytics);

  KMeansResult result;
  result.centroids.reserve(k);
  result.centroids.push_back(pts[gen.uniform_int(n)]);
  std::vector<double> d2(n);
  while (result.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = detail::sq_dist(pts[i], result.centroids.front());
      for (std::size_t c = 1; c < result.centroids.size(); ++c)
        best = std::min(best, detail::sq_dist(pts[i], result.centroids[c]));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      result.centroids.push_back(pts[gen.uniform_int(n)]);
      continue;
    }
    double pick = gen.uniform01() * total;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      pick -= d2[i];
      if (pick <= 0.0) {
        chosen = i;
        break;
      }
    }
    result.centroids.push_back(pts[chosen]);
  }

  result.assignment.assign(n, 0);
  for (int iter = 0; iter < 300; ++iter) {
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = detail::sq_dist(pts[i], result.centroids[0]);
      std::uint32_t arg = 0;
      for (std::uint32_t c = 1; c < k; ++c) {
        const double d = detail::sq_dist(pts[i], result.centroids[c]);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      result.assignment[i] = arg;
      wcss += best;
    }
    result.wcss_history.push_back(wcss);
    result.wcss = wcss;

    std::vector<std::array<double, 4>> next(k, std::array<double, 4>{});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (int d = 0; d < 4; ++d) next[result.assignment[i]][d] += pts[i][d];
      ++counts[result.assignment[i]];
    }
    double shift = 0.0;
    for (std::uint32_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (int d = 0; d < 4; ++d) next[c][d] /= static_cast<double>(counts[c]);
      shift = std::max(shift, detail::sq_dist(next[c], result.centroids[c]));
      result.centroids[c] = next[c];
    }
    if (shift < 1e-8) break;
  }
  return result;
}

struct OutlierResult {
  std::vector<std::uint32_t> flagged_ids;
  bool zero_variance_warning = false;
};

/// Flag animals whose standardized feature norm exceeds the threshold.
inline OutlierResult zscore_outliers(const std::vector<BehaviorFeature>& features,
                                     double threshold_sigmas) {
  if (features.size() < 3) throw std::domain_error("need at least 3 animals");
  if (threshold_sigmas <= 0.0) throw std::domain_error("threshold must be > 0");
  bool any_variance = false;
  const auto pts = detail::standardize(features, &any_variance);
  OutlierResult out;
  if (!any_variance) {
    out.zero_variance_warning = true;
    return out;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double norm = std::sqrt(detail::sq_dist(pts[i], std::array<double, 4>{}));
    if (norm > threshold_sigmas) out.flagged_ids.push_back(features[i].animal_id);
  }
  return out;
}

/// Rank-based AUROC with ties counted 0.5: the probability that a random
/// positive outranks a random negative.
inline double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores/labels size mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (int label : labels) (label ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auroc is undefined with a single class");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks over tie groups, then the Mann-Whitney statistic.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t t = i; t <= j; ++t) {
      if (labels[order[t]]) rank_sum_pos += midrank;
    }
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// ROC curve points (fpr, tpr) sweeping the threshold from high to low.
inline std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores,
                                                         const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores/labels size mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (int label : labels) (label ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("roc is undefined with a single class");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t) (labels[order[t]] ? tp : fp)++;
    pts.emplace_back(static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos);
    i = j + 1;
  }
  return pts;
}

}  // namespace agrotrack::analytics
