#pragma once

#include "kinetunnel/geometry.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace kinetunnel {

using Json = nlohmann::ordered_json;

/// Canonical JSON document: id, spacing_m, via_points_m, metadata.
Json trajectory_to_json(const Trajectory& trajectory);

/// Strict reader. Unknown top-level fields, missing fields, wrong types and
/// invalid geometry raise SchemaViolation naming the offending field.
Trajectory trajectory_from_json(const Json& doc);

std::string serialize_trajectory(const Trajectory& trajectory);
/// Parses a trajectory document. Syntax errors report line and column.
Trajectory parse_trajectory(std::string_view text);

void save_trajectory(const std::filesystem::path& path, const Trajectory& trajectory);
Trajectory load_trajectory(const std::filesystem::path& path);

/// Named trajectories available to "select" commands.
class TrajectoryLibrary {
 public:
  /// Library holding the generated exercises T1..T4.
  static TrajectoryLibrary with_exercises(const ExerciseParams& params = {});

  /// Adds every *.json trajectory found directly inside `directory`.
  void load_directory(const std::filesystem::path& directory);
  void add(Trajectory trajectory);

  const Trajectory* find(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, Trajectory> items_;
};

}  // namespace kinetunnel
