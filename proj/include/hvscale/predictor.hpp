#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <optional>

namespace hvscale {

// Forecasts the peak arrival rate over the next few seconds from per-second
// arrival counts. The transition controller only consumes the scalar
// forecast, so any model (e.g. a learned one) can sit behind this interface
// as long as it is deterministic for a given observation history.
class RatePredictor {
 public:
  virtual ~RatePredictor() = default;

  // Records `rps` arrivals during simulation second `t`. Throws
  // NonMonotonicTime unless t is greater than every previous t.
  virtual void observe(long t, double rps) = 0;

  // Maximum rate expected over the next `horizon_s` seconds. Throws
  // NoHistory before the first observation.
  virtual double predict_max(int horizon_s = 10) const = 0;

  virtual std::size_t history_size() const = 0;

  virtual std::unique_ptr<RatePredictor> clone() const = 0;
};

struct WindowedMaxConfig {
  std::size_t window = 120;    // observations retained
  std::size_t lookback = 30;   // seconds the maximum is taken over
  double headroom = 1.0;       // multiplier on the observed maximum
};

// Baseline: recent peak times a headroom factor.
class WindowedMaxPredictor final : public RatePredictor {
 public:
  explicit WindowedMaxPredictor(WindowedMaxConfig config = {});

  void observe(long t, double rps) override;
  double predict_max(int horizon_s = 10) const override;
  std::size_t history_size() const override { return history_.size(); }
  std::unique_ptr<RatePredictor> clone() const override;

  const WindowedMaxConfig& config() const { return config_; }

 private:
  WindowedMaxConfig config_;
  std::deque<double> history_;
  std::optional<long> last_t_;
};

}  // namespace hvscale
