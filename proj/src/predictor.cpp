#include "hvscale/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hvscale/error.hpp"

namespace hvscale {

WindowedMaxPredictor::WindowedMaxPredictor(WindowedMaxConfig config) : config_(config) {
  if (config_.window == 0 || config_.lookback == 0) {
    throw InvalidArgument("predictor window and lookback must be positive");
  }
  if (!(config_.headroom > 0.0) || !std::isfinite(config_.headroom)) {
    throw InvalidArgument("predictor headroom must be positive");
  }
}

void WindowedMaxPredictor::observe(long t, double rps) {
  if (last_t_ && t <= *last_t_) {
    throw NonMonotonicTime("observation at t=" + std::to_string(t) + " after t=" +
                           std::to_string(*last_t_));
  }
  if (!(rps >= 0.0) || !std::isfinite(rps)) throw InvalidArgument("observed rate must be >= 0");
  last_t_ = t;
  history_.push_back(rps);
  while (history_.size() > config_.window) history_.pop_front();
}

double WindowedMaxPredictor::predict_max(int horizon_s) const {
  if (history_.empty()) throw NoHistory("predict_max called before any observation");
  if (horizon_s < 1) throw InvalidArgument("horizon must be >= 1 second");
  // Never look back less than the horizon, so the forecast covers every
  // peak seen within it.
  const std::size_t span =
      std::min(history_.size(), std::max(config_.lookback, static_cast<std::size_t>(horizon_s)));
  const double peak = *std::max_element(history_.end() - static_cast<std::ptrdiff_t>(span),
                                         history_.end());
  return peak * config_.headroom;
}

std::unique_ptr<RatePredictor> WindowedMaxPredictor::clone() const {
  return std::make_unique<WindowedMaxPredictor>(*this);
}

}  // namespace hvscale
