#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "agrotrack/channel.hpp"

namespace agrotrack::channel {

struct FitPoint {
  double distance_m = 0.0;
  double success = 0.0;
};

struct FitResult {
  TwoRegimeFit fit;
  double sse = 0.0;            ///< sum of squared residuals
  double rms_residual = 0.0;
};

namespace fit_detail {

// Parameter vector order: pi_obs, log(d_c), beta, log(d_c_obs), beta_obs.
// Shapes are bounded to [1, 6] so the fitted curve stays non-increasing.
struct Bounds {
  double lo;
  double hi;
};

inline std::array<Bounds, 5> bounds(double d_lo, double d_hi) {
  const double log_lo = std::log(std::max(1e-3, 0.05 * d_lo));
  const double log_hi = std::log(20.0 * d_hi);
  return {Bounds{0.0, 1.0}, Bounds{log_lo, log_hi}, Bounds{1.0, 6.0}, Bounds{log_lo, log_hi},
          Bounds{1.0, 6.0}};
}

inline TwoRegimeFit decode(const std::array<double, 5>& v) {
  TwoRegimeFit f;
  f.obstructed_fraction = v[0];
  f.open_scale_m = std::exp(v[1]);
  f.open_shape = v[2];
  f.obstructed_scale_m = std::exp(v[3]);
  f.obstructed_shape = v[4];
  return f;
}

inline double sse_of(const std::array<double, 5>& v, const std::vector<FitPoint>& pts) {
  const TwoRegimeFit f = decode(v);
  double acc = 0.0;
  for (const FitPoint& p : pts) {
    const double r = success_two_regime(p.distance_m, f) - p.success;
    acc += r * r;
  }
  return acc;
}

/// Damped Gauss-Newton polish. Coordinate descent gets close; this drives
/// the residual to machine precision on exact-model data.
inline double gauss_newton_polish(std::array<double, 5>& v, const std::vector<FitPoint>& pts,
                                  const std::array<Bounds, 5>& box) {
  double current = sse_of(v, pts);
  double lambda = 1e-3;
  for (int iter = 0; iter < 200; ++iter) {
    // Numeric Jacobian of the residual vector.
    const std::size_t n = pts.size();
    std::vector<std::array<double, 5>> jac(n);
    std::vector<double> res(n);
    {
      const TwoRegimeFit f = decode(v);
      for (std::size_t i = 0; i < n; ++i) {
        res[i] = success_two_regime(pts[i].distance_m, f) - pts[i].success;
      }
    }
    for (int k = 0; k < 5; ++k) {
      const double h = std::max(1e-7, 1e-7 * std::abs(v[k]));
      std::array<double, 5> vp = v, vm = v;
      vp[k] = std::min(box[k].hi, v[k] + h);
      vm[k] = std::max(box[k].lo, v[k] - h);
      const double dk = vp[k] - vm[k];
      const TwoRegimeFit fp = decode(vp), fm = decode(vm);
      for (std::size_t i = 0; i < n; ++i) {
        jac[i][k] = dk > 0.0
                        ? (success_two_regime(pts[i].distance_m, fp) -
                           success_two_regime(pts[i].distance_m, fm)) / dk
                        : 0.0;
      }
    }
    // Normal equations with Levenberg damping.
    double jtj[5][5] = {};
    double jtr[5] = {};
    for (std::size_t i = 0; i < n; ++i) {
      for (int a = 0; a < 5; ++a) {
        jtr[a] += jac[i][a] * res[i];
        for (int b = 0; b < 5; ++b) jtj[a][b] += jac[i][a] * jac[i][b];
      }
    }
    bool improved = false;
    for (int attempt = 0; attempt < 8 && !improved; ++attempt) {
      double m[5][6];
      for (int a = 0; a < 5; ++a) {
        for (int b = 0; b < 5; ++b) m[a][b] = jtj[a][b] + (a == b ? lambda * (jtj[a][a] + 1e-12) : 0.0);
        m[a][5] = -jtr[a];
      }
      // Gaussian elimination with partial pivoting.
      bool singular = false;
      for (int col = 0; col < 5; ++col) {
        int pivot = col;
        for (int row = col + 1; row < 5; ++row) {
          if (std::abs(m[row][col]) > std::abs(m[pivot][col])) pivot = row;
        }
        if (std::abs(m[pivot][col]) < 1e-14) {
          singular = true;
          break;
        }
        if (pivot != col) {
          for (int c2 = 0; c2 < 6; ++c2) std::swap(m[pivot][c2], m[col][c2]);
        }
        for (int row = col + 1; row < 5; ++row) {
          const double f = m[row][col] / m[col][col];
          for (int c2 = col; c2 < 6; ++c2) m[row][c2] -= f * m[col][c2];
        }
      }
      if (singular) {
        lambda *= 10.0;
        continue;
      }
      std::array<double, 5> step{};
      for (int row = 4; row >= 0; --row) {
        double acc = m[row][5];
        for (int c2 = row + 1; c2 < 5; ++c2) acc -= m[row][c2] * step[c2];
        step[row] = acc / m[row][row];
      }
      std::array<double, 5> probe = v;
      for (int k = 0; k < 5; ++k) {
        probe[k] = std::clamp(v[k] + step[k], box[k].lo, box[k].hi);
      }
      const double s = sse_of(probe, pts);
      if (s < current) {
        v = probe;
        current = s;
        lambda = std::max(1e-12, lambda * 0.3);
        improved = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved || current < 1e-24) break;
  }
  return current;
}

/// Golden-section minimization of the objective along one coordinate.
template <typename Objective>
double golden_section(Objective&& objective, double lo, double hi, int iterations) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  for (int i = 0; i < iterations; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = objective(d);
    }
  }
  return fc < fd ? c : d;
}

}  // namespace fit_detail

/// Least-squares fit of the two-regime success curve: coarse log-spaced grid
/// search followed by coordinate-descent refinement from the best grid cells.
/// Deterministic; suitable for up to a few hundred points.
inline FitResult fit_two_regime(const std::vector<FitPoint>& points) {
  if (points.size() < 5) throw std::invalid_argument("fit_two_regime needs at least 5 points");
  double d_lo = points.front().distance_m, d_hi = points.front().distance_m;
  for (const FitPoint& p : points) {
    if (p.distance_m <= 0.0) throw std::invalid_argument("distances must be > 0");
    if (p.success < 0.0 || p.success > 1.0)
      throw std::invalid_argument("success probabilities must be in [0, 1]");
    d_lo = std::min(d_lo, p.distance_m);
    d_hi = std::max(d_hi, p.distance_m);
  }
  if (d_lo == d_hi) throw std::invalid_argument("fit is ill-posed: all distances equal");

  using fit_detail::bounds;
  using fit_detail::decode;
  using fit_detail::golden_section;
  using fit_detail::sse_of;
  const auto box = bounds(d_lo, d_hi);

  // Coarse grid over the five parameters.
  std::vector<double> pi_grid{0.0, 0.15, 0.3, 0.5, 0.7, 1.0};
  std::vector<double> shape_grid{1.0, 1.5, 2.2, 3.2, 4.6, 6.0};
  std::vector<double> scale_grid;
  for (int i = 0; i < 8; ++i) {
    scale_grid.push_back(box[1].lo + (box[1].hi - box[1].lo) * (i + 0.5) / 8.0);
  }

  struct Candidate {
    std::array<double, 5> v;
    double sse;
  };
  std::vector<Candidate> best;
  auto consider = [&](const std::array<double, 5>& v) {
    const double s = sse_of(v, points);
    best.push_back({v, s});
    std::sort(best.begin(), best.end(),
              [](const Candidate& a, const Candidate& b) { return a.sse < b.sse; });
    if (best.size() > 12) best.pop_back();
  };
  for (double pi : pi_grid) {
    for (double ls1 : scale_grid) {
      for (double b1 : shape_grid) {
        for (double ls2 : scale_grid) {
          for (double b2 : shape_grid) {
            consider({pi, ls1, b1, ls2, b2});
          }
        }
      }
    }
  }

  // The mixture is symmetric under swapping its two components, so seed each
  // start in both orientations.
  const std::size_t n_grid_starts = best.size();
  for (std::size_t i = 0; i < n_grid_starts; ++i) {
    const auto& v = best[i].v;
    const std::array<double, 5> swapped{1.0 - v[0], v[3], v[4], v[1], v[2]};
    best.push_back({swapped, sse_of(swapped, points)});
  }

  // Coordinate descent with a shrinking trust window around each start.
  Candidate winner = best.front();
  for (const Candidate& start : best) {
    std::array<double, 5> v = start.v;
    double current = start.sse;
    double window = 0.5;
    for (int sweep = 0; sweep < 60; ++sweep) {
      const double before = current;
      for (int k = 0; k < 5; ++k) {
        const double span = (box[k].hi - box[k].lo) * window;
        const double lo = std::max(box[k].lo, v[k] - span);
        const double hi = std::min(box[k].hi, v[k] + span);
        const double arg = golden_section(
            [&](double x) {
              std::array<double, 5> probe = v;
              probe[k] = x;
              return sse_of(probe, points);
            },
            lo, hi, 48);
        std::array<double, 5> probe = v;
        probe[k] = arg;
        const double s = sse_of(probe, points);
        if (s < current) {
          v = probe;
          current = s;
        }
      }
      window = std::max(0.02, window * 0.85);
      if (before - current < 1e-18 && sweep > 8) break;
    }
    current = fit_detail::gauss_newton_polish(v, points, box);
    if (current < winner.sse) winner = {v, current};
  }

  FitResult out;
  out.fit = decode(winner.v);
  out.sse = winner.sse;
  out.rms_residual = std::sqrt(winner.sse / static_cast<double>(points.size()));
  return out;
}

}  // namespace agrotrack::channel
