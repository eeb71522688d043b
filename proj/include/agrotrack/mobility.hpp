#pragma once

#include <cmath>
#include <stdexcept>

#include "agrotrack/geometry.hpp"
#include "agrotrack/rng.hpp"
#include "agrotrack/scenario.hpp"

namespace agrotrack::sim {

/// Random-waypoint walker over a convex field polygon. The trajectory is a
/// deterministic function of its stream, so positions can be evaluated
/// lazily at any monotonically increasing sequence of times.
class RandomWaypoint {
 public:
  RandomWaypoint(const geom::Polygon* field, const MobilitySpec& spec, geom::Vec2 start,
                 rng::Xoshiro256 stream, const std::vector<geom::Polygon>* avoid = nullptr)
      : field_(field), avoid_(avoid), spec_(spec), position_(start), gen_(std::move(stream)) {
    pick_waypoint();
  }

  /// Advance the walk to `t` (seconds, non-decreasing) and return position.
  geom::Vec2 advance_to(double t) {
    if (t < now_) throw std::logic_error("mobility cannot run backwards");
    while (now_ < t) {
      if (paused_until_ > now_) {
        const double dt = std::min(paused_until_, t) - now_;
        now_ += dt;
        continue;
      }
      if (speed_ <= 0.0) {
        now_ = t;  // immobile herd: position never changes
        break;
      }
      const double dist_left = geom::distance(position_, waypoint_);
      if (dist_left <= 1e-9) {
        position_ = waypoint_;
        begin_pause();
        continue;
      }
      const double time_left = dist_left / speed_;
      const double dt = std::min(time_left, t - now_);
      const double frac = dt / time_left;
      position_ = position_ + (waypoint_ - position_) * frac;
      now_ += dt;
      if (dt >= time_left - 1e-12 && now_ < t) {
        position_ = waypoint_;
        begin_pause();
      }
    }
    return position_;
  }

  geom::Vec2 position() const { return position_; }

 private:
  void begin_pause() {
    paused_until_ = now_ + gen_.uniform(spec_.pause_min_s, spec_.pause_max_s);
    pick_waypoint();
  }

  void pick_waypoint() {
    // Graze targets avoid terrain obstacles; transit legs may still clip them.
    waypoint_ = field_->sample_uniform(gen_);
    if (avoid_) {
      for (int tries = 0; tries < 512 && inside_avoided(waypoint_); ++tries) {
        waypoint_ = field_->sample_uniform(gen_);
      }
    }
    speed_ = gen_.uniform(spec_.speed_min_mps, spec_.speed_max_mps);
  }

  bool inside_avoided(const geom::Vec2& p) const {
    for (const auto& poly : *avoid_) {
      if (poly.contains(p)) return true;
    }
    return false;
  }

  const geom::Polygon* field_;
  const std::vector<geom::Polygon>* avoid_ = nullptr;
  MobilitySpec spec_;
  geom::Vec2 position_;
  geom::Vec2 waypoint_;
  double speed_ = 0.0;
  double now_ = 0.0;
  double paused_until_ = 0.0;
  rng::Xoshiro256 gen_;
};

}  // namespace agrotrack::sim
