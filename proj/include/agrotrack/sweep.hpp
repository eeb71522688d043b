#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "agrotrack/engine.hpp"

namespace agrotrack::sim {

struct SweepRow {
  std::uint32_t n_animals = 0;
  std::uint32_t replicates = 0;
  double pdr_mean = 0.0;
  double pdr_sd = 0.0;
  double loss_mean = 0.0;
  double loss_sd = 0.0;
  double throughput_mean = 0.0;
  double throughput_sd = 0.0;
};

struct RecoveryRow {
  std::uint32_t failures = 0;
  double recovery_mean = 0.0;
  double recovery_sd = 0.0;
};

/// Scale the field, obstructions and gateway layout about the field centroid
/// so herd density stays constant when the animal count changes.
inline Scenario scale_scenario(const Scenario& base, std::uint32_t n_animals) {
  Scenario sc = base;
  sc.herd_count = n_animals;
  sc.initial_positions.clear();  // seeded placement in the scaled field
  const double k = std::sqrt(static_cast<double>(n_animals) / base.herd_count);
  const geom::Vec2 c = base.field_polygon().centroid();
  auto scale_point = [&](const geom::Vec2& p) { return c + (p - c) * k; };
  for (auto& v : sc.field_boundary) v = scale_point(v);
  for (auto& poly : sc.obstructions) {
    for (auto& v : poly) v = scale_point(v);
  }
  for (auto& gw : sc.gateways) gw.position = scale_point(gw.position);
  if (sc.alerts.geofence) {
    for (auto& v : *sc.alerts.geofence) v = scale_point(v);
  }
  if (n_animals != base.herd_count) {
    sc.calibration["field_scaling"] =
        "constant-density: field, obstructions and gateway layout scaled about the field centroid";
  }
  return sc;
}

namespace sweep_detail {

inline void run_jobs(std::vector<std::function<void()>>& jobs, unsigned n_jobs) {
  if (n_jobs <= 1) {
    for (auto& job : jobs) job();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const unsigned count = std::min<unsigned>(n_jobs, jobs.size());
  workers.reserve(count);
  for (unsigned w = 0; w < count; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        jobs[i]();
      }
    });
  }
  for (auto& t : workers) t.join();
}

struct Stats {
  double mean = 0.0;
  double sd = 0.0;
};

inline Stats mean_sd(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= xs.size();
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.sd = xs.size() > 1 ? std::sqrt(var / (xs.size() - 1)) : 0.0;
  return s;
}

}  // namespace sweep_detail

/// Constant-density scalability sweep. Runs `replicates` seeds per count in
/// parallel; results are reduced in (count, replicate) order regardless of
/// completion order, so the output is independent of the job count.
inline std::vector<SweepRow> sweep(const Scenario& base, const std::vector<std::uint32_t>& counts,
                                   std::uint32_t replicates, unsigned n_jobs = 1) {
  if (counts.empty()) throw std::invalid_argument("sweep needs at least one animal count");
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i] <= counts[i - 1])
      throw std::invalid_argument("animal counts must be positive and ascending");
  }
  if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");

  std::vector<std::vector<MetricsReport>> results(counts.size());
  for (auto& row : results) row.resize(replicates);
  std::vector<std::function<void()>> jobs;
  for (std::size_t ci = 0; ci < counts.size(); ++ci) {
    for (std::uint32_t r = 0; r < replicates; ++r) {
      jobs.push_back([&, ci, r] {
        Scenario sc = scale_scenario(base, counts[ci]);
        std::uint64_t h = base.seed;
        rng::splitmix64(h);
        h ^= counts[ci];
        rng::splitmix64(h);
        h ^= r;
        sc.seed = rng::splitmix64(h);
        sc.name = base.name + "_n" + std::to_string(counts[ci]) + "_r" + std::to_string(r);
        results[ci][r] = run(sc);
      });
    }
  }
  sweep_detail::run_jobs(jobs, n_jobs);

  std::vector<SweepRow> rows;
  for (std::size_t ci = 0; ci < counts.size(); ++ci) {
    std::vector<double> pdr, loss, thr;
    for (const MetricsReport& rep : results[ci]) {
      pdr.push_back(rep.pdr);
      loss.push_back(rep.loss_fraction());
      thr.push_back(rep.mean_throughput_msg_s);
    }
    SweepRow row;
    row.n_animals = counts[ci];
    row.replicates = replicates;
    const auto p = sweep_detail::mean_sd(pdr);
    const auto l = sweep_detail::mean_sd(loss);
    const auto t = sweep_detail::mean_sd(thr);
    row.pdr_mean = p.mean;
    row.pdr_sd = p.sd;
    row.loss_mean = l.mean;
    row.loss_sd = l.sd;
    row.throughput_mean = t.mean;
    row.throughput_sd = t.sd;
    rows.push_back(row);
  }
  return rows;
}

/// Gateway-failure robustness sweep: rows for 0..max_failures simultaneous
/// outages. Failed gateways are taken from the end of the gateway list; the
/// outage window is copied from the base plan (or defaults to the middle of
/// the run when the base plan is empty).
inline std::vector<RecoveryRow> failure_sweep(const Scenario& base, std::uint32_t max_failures,
                                              std::uint32_t replicates, unsigned n_jobs = 1) {
  if (base.gateways.size() < max_failures + 1)
    throw std::invalid_argument("scenario needs at least max_failures + 1 gateways");
  if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");

  double window_start = 0.25 * base.duration_s;
  double window_end = 0.55 * base.duration_s;
  if (!base.failure_plan.empty()) {
    window_start = base.failure_plan.front().start_s;
    window_end = base.failure_plan.front().end_s;
    for (const FailureWindow& w : base.failure_plan) {
      window_start = std::min(window_start, w.start_s);
      window_end = std::max(window_end, w.end_s);
    }
  }

  std::vector<std::vector<MetricsReport>> results(max_failures + 1);
  for (auto& row : results) row.resize(replicates);
  std::vector<std::function<void()>> jobs;
  for (std::uint32_t f = 0; f <= max_failures; ++f) {
    for (std::uint32_t r = 0; r < replicates; ++r) {
      jobs.push_back([&, f, r] {
        Scenario sc = base;
        sc.failure_plan.clear();
        for (std::uint32_t i = 0; i < f; ++i) {
          const std::uint32_t gw = static_cast<std::uint32_t>(base.gateways.size()) - 1 - i;
          sc.failure_plan.push_back({gw, window_start, window_end});
        }
        sc.seed = base.seed + r;
        sc.name = base.name + "_f" + std::to_string(f) + "_r" + std::to_string(r);
        results[f][r] = run(sc);
      });
    }
  }
  sweep_detail::run_jobs(jobs, n_jobs);

  std::vector<RecoveryRow> rows;
  for (std::uint32_t f = 0; f <= max_failures; ++f) {
    std::vector<double> rec;
    for (const MetricsReport& rep : results[f]) rec.push_back(rep.recovery_ratio);
    const auto s = sweep_detail::mean_sd(rec);
    rows.push_back({f, s.mean, s.sd});
  }
  return rows;
}

}  // namespace agrotrack::sim
