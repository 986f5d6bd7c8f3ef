#include "kinetunnel/feedback.hpp"

#include "kinetunnel/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kinetunnel {

SphereLook feedback_for_error(double distance, ConfidenceInterval ci, const FeedbackConfig& config) {
  if (std::isnan(distance) || distance < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "distance must be non-negative");
  }
  const double u = std::clamp(distance / allowed_radius(ci), 0.0, 1.0);
  // std::lerp is exact at both ends and monotone in u.
  return {std::lerp(config.scale_min, 1.0, u),
          {std::lerp(config.on_path.r, config.off_path.r, u),
           std::lerp(config.on_path.g, config.off_path.g, u),
           std::lerp(config.on_path.b, config.off_path.b, u)}};
}

std::string_view to_string(FeedbackMode mode) noexcept {
  return mode == FeedbackMode::Overwrite ? "overwrite" : "reset_per_rep";
}

FeedbackMode parse_feedback_mode(std::string_view text) {
  if (text == "overwrite") return FeedbackMode::Overwrite;
  if (text == "reset_per_rep") return FeedbackMode::ResetPerRep;
  throw Error(ErrorCode::InvalidArgument, "unknown feedback mode '" + std::string(text) + "'");
}

TunnelState::TunnelState(std::size_t spheres, ConfidenceInterval ci, const FeedbackConfig& config)
    : ci_(ci),
      config_(config),
      best_(spheres, std::numeric_limits<double>::infinity()),
      looks_(spheres, SphereLook{1.0, config.off_path}) {}

bool TunnelState::record(std::size_t index, double error) {
  if (!(error < best_[index])) return false;
  best_[index] = error;
  const SphereLook look = feedback_for_error(error, ci_, config_);
  if (look == looks_[index]) return false;
  looks_[index] = look;
  return true;
}

void TunnelState::reset(std::vector<SphereChange>* changes) {
  const SphereLook red{1.0, config_.off_path};
  for (std::size_t i = 0; i < best_.size(); ++i) {
    best_[i] = std::numeric_limits<double>::infinity();
    if (looks_[i] != red) {
      looks_[i] = red;
      if (changes) changes->push_back({i, red});
    }
  }
}

}  // namespace kinetunnel
