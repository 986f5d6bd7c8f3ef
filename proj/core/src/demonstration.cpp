#include "kinetunnel/error.hpp"
#include "kinetunnel/session.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>

namespace kinetunnel {

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Trajectory record_demonstration(const std::vector<HandSample>& samples, double spacing,
                                std::size_t smooth_window, std::string author, std::string id) {
  if (samples.size() < 2) {
    throw Error(ErrorCode::DegeneratePath, "demonstration needs at least two samples");
  }
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].t_ms < samples[i - 1].t_ms) {
      throw Error(ErrorCode::NonMonotonicTime, "demonstration samples go back in time");
    }
  }

  const std::size_t half = smooth_window / 2;
  const std::size_t n = samples.size();
  std::vector<Vec3> smoothed(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t h = std::min({half, i, n - 1 - i});
    Vec3 sum = Vec3::Zero();
    for (std::size_t j = i - h; j <= i + h; ++j) sum += samples[j].pos;
    smoothed[i] = sum / static_cast<double>(2 * h + 1);
  }

  Trajectory traj;
  traj.id = std::move(id);
  traj.spacing = spacing;
  traj.via_points = resample_polyline(smoothed, spacing);
  traj.metadata.author = std::move(author);
  traj.metadata.created = utc_now();
  traj.metadata.exercise = "custom";
  return traj;
}

}  // namespace kinetunnel
