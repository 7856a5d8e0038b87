// Adaptive sliding-window step control driven by the spatial overlap degree.
//
// The window has a fixed temporal span (frame_length). Each update consumes
// shift_time of new stream data:
//
//   seg_time   = ceil((1 - O) / seg_step) + 1
//   shift_time = frame_length * 2 / seg_time, clamped to [min_shift, frame_length]
//   echo_time  = (seg_time <= 2) ? 1 : seg_time
//
// echo_time counts how many consecutive updates keep the current step before
// the plan is recomputed; a worsening overlap (larger candidate seg_time)
// adopts the new plan immediately.

#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "aslio/types.hpp"

namespace aslio {

struct WindowConfig {
  double frame_length = 0.1;           // s, total window span
  double seg_step = 0.05;              // SOD decline gradient
  double min_shift = 0.008;            // s, lower clamp on shift_time
  double history_weight_factor = 1.0;  // age-based down-weighting strength

  void validate() const {
    if (!(frame_length > 0.0)) throw std::invalid_argument("frame_length must be > 0");
    if (!(seg_step > 0.0 && seg_step <= 1.0)) throw std::invalid_argument("seg_step must be in (0, 1]");
    if (!(min_shift > 0.0 && min_shift <= frame_length))
      throw std::invalid_argument("min_shift must be in (0, frame_length]");
    if (history_weight_factor < 0.0)
      throw std::invalid_argument("history_weight_factor must be >= 0");
  }
};

struct StepPlan {
  int seg_time = 1;
  double shift_time = 0.0;  // s
  int echo_time = 1;        // remaining echoed steps
};

/// Step plan for an overlap value in [0, 1]. The ceiling is evaluated with a
/// 1e-9 guard so exact-division grid points are not pushed up by the rounding
/// of the quotient.
inline StepPlan compute_step(double overlap, const WindowConfig& cfg) {
  StepPlan plan;
  plan.seg_time = static_cast<int>(std::ceil((1.0 - overlap) / cfg.seg_step - 1e-9)) + 1;
  const double raw_shift = cfg.frame_length * 2.0 / static_cast<double>(plan.seg_time);
  plan.shift_time = std::clamp(raw_shift, cfg.min_shift, cfg.frame_length);
  plan.echo_time = plan.seg_time <= 2 ? 1 : plan.seg_time;
  return plan;
}

/// Weight of a historical point as a function of its age at the window end.
inline double history_weight(double age, const WindowConfig& cfg) {
  return 1.0 / (1.0 + cfg.history_weight_factor * age / cfg.frame_length);
}

/// Holds the plan in force and applies the echo strategy on each new overlap
/// observation.
class WindowController {
 public:
  explicit WindowController(const WindowConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    current_ = compute_step(1.0, cfg_);
  }

  const StepPlan& current() const { return current_; }
  const WindowConfig& config() const { return cfg_; }

  void reset(double overlap = 1.0) { current_ = compute_step(overlap, cfg_); }

  /// Plan in force for the next update. Worsening overlap adopts the new
  /// plan immediately; otherwise the current step is echoed until its
  /// echo_time runs out.
  StepPlan on_update(double new_overlap) {
    const StepPlan candidate = compute_step(new_overlap, cfg_);
    if (candidate.seg_time > current_.seg_time) {
      current_ = candidate;
    } else {
      --current_.echo_time;
      if (current_.echo_time <= 0) current_ = candidate;
    }
    return current_;
  }

 private:
  WindowConfig cfg_;
  StepPlan current_;
};

/// Time-ordered stream of sensor-frame points, one producer one consumer.
class StreamBuffer {
 public:
  void push(const TimedPoint& point) {
    if (!points_.empty() && point.t < points_.back().t)
      throw std::invalid_argument("StreamBuffer: timestamps must be non-decreasing");
    points_.push_back(point);
  }

  void push(std::span<const TimedPoint> points) {
    for (const auto& p : points) push(p);
  }

  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }
  double front_time() const { return points_.front().t; }
  double back_time() const { return points_.back().t; }
  bool covers(double t) const { return !points_.empty() && points_.back().t >= t; }
  const std::deque<TimedPoint>& data() const { return points_; }

  /// Drops points older than end_time - horizon.
  void evict(double end_time, double horizon) {
    const double cutoff = end_time - horizon;
    while (!points_.empty() && points_.front().t < cutoff) points_.pop_front();
  }

 private:
  std::deque<TimedPoint> points_;
};

/// One update's point set: the newly shifted-in interval plus the retained
/// historical remainder of the window, with age-based weights.
struct Frame {
  std::vector<TimedPoint> latest;              // t in (end_time - shift, end_time]
  std::vector<TimedPoint> historical;          // t in (end_time - frame_length, end_time - shift]
  std::vector<double> historical_weights;      // parallel to historical, in (0, 1]
  double end_time = 0.0;
};

/// Extracts the window ending at prev_end + plan.shift_time. Returns nullopt
/// while the buffer does not yet cover the window end.
inline std::optional<Frame> extract_frame(const StreamBuffer& buffer, const StepPlan& plan,
                                          double prev_end, const WindowConfig& cfg) {
  const double end_time = prev_end + plan.shift_time;
  if (!buffer.covers(end_time)) return std::nullopt;

  Frame frame;
  frame.end_time = end_time;
  const double window_start = end_time - cfg.frame_length;
  for (const auto& pt : buffer.data()) {
    if (pt.t <= window_start) continue;
    if (pt.t > end_time) break;
    if (pt.t > prev_end) {
      frame.latest.push_back(pt);
    } else {
      frame.historical.push_back(pt);
      frame.historical_weights.push_back(history_weight(end_time - pt.t, cfg));
    }
  }
  return frame;
}

}  // namespace aslio
