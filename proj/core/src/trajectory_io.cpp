#include "kinetunnel/trajectory_io.hpp"

#include "kinetunnel/error.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace kinetunnel {

namespace {

[[noreturn]] void violation(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, "field '" + field + "': " + what);
}

const Json& required(const Json& doc, const char* field) {
  const auto it = doc.find(field);
  if (it == doc.end()) violation(field, "missing");
  return *it;
}

std::string optional_string(const Json& meta, const char* field) {
  const auto it = meta.find(field);
  if (it == meta.end() || it->is_null()) return {};
  if (!it->is_string()) violation(std::string("metadata.") + field, "expected a string");
  return it->get<std::string>();
}

// Maps a byte offset into 1-based line and column.
std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t offset) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

Json trajectory_to_json(const Trajectory& trajectory) {
  Json points = Json::array();
  for (const Vec3& p : trajectory.via_points) points.push_back({p.x(), p.y(), p.z()});
  Json doc;
  doc["id"] = trajectory.id;
  doc["spacing_m"] = trajectory.spacing;
  doc["via_points_m"] = std::move(points);
  doc["metadata"] = {{"author", trajectory.metadata.author},
                     {"created", trajectory.metadata.created},
                     {"exercise", trajectory.metadata.exercise}};
  return doc;
}

Trajectory trajectory_from_json(const Json& doc) {
  if (!doc.is_object()) violation("<root>", "expected an object");
  static const std::set<std::string> known{"id", "spacing_m", "via_points_m", "metadata"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) violation(key, "unknown top-level field");
  }

  Trajectory traj;
  const Json& id = required(doc, "id");
  if (!id.is_string()) violation("id", "expected a string");
  traj.id = id.get<std::string>();

  const Json& spacing = required(doc, "spacing_m");
  if (!spacing.is_number()) violation("spacing_m", "expected a number");
  traj.spacing = spacing.get<double>();
  if (!(traj.spacing > 0.0)) violation("spacing_m", "must be positive");

  const Json& points = required(doc, "via_points_m");
  if (!points.is_array()) violation("via_points_m", "expected an array");
  if (points.size() < 2) violation("via_points_m", "needs at least two via-points");
  traj.via_points.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Json& p = points[i];
    const std::string where = "via_points_m[" + std::to_string(i) + "]";
    if (!p.is_array() || p.size() != 3) violation(where, "expected [x, y, z]");
    Vec3 v;
    for (int a = 0; a < 3; ++a) {
      if (!p[static_cast<std::size_t>(a)].is_number()) violation(where, "coordinates must be numbers");
      v[a] = p[static_cast<std::size_t>(a)].get<double>();
    }
    if (!v.allFinite()) violation(where, "coordinates must be finite");
    traj.via_points.push_back(v);
  }

  if (const auto meta = doc.find("metadata"); meta != doc.end() && !meta->is_null()) {
    if (!meta->is_object()) violation("metadata", "expected an object");
    traj.metadata.author = optional_string(*meta, "author");
    traj.metadata.created = optional_string(*meta, "created");
    traj.metadata.exercise = optional_string(*meta, "exercise");
  }
  return traj;
}

std::string serialize_trajectory(const Trajectory& trajectory) {
  return trajectory_to_json(trajectory).dump(2) + "\n";
}

Trajectory parse_trajectory(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line) + ", column " +
                                                std::to_string(col) + ": malformed JSON");
  }
  return trajectory_from_json(doc);
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& trajectory) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << serialize_trajectory(trajectory);
  if (!out) throw Error(ErrorCode::InvalidArgument, "failed writing " + path.string());
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_trajectory(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

TrajectoryLibrary TrajectoryLibrary::with_exercises(const ExerciseParams& params) {
  TrajectoryLibrary lib;
  for (Exercise ex : {Exercise::T1, Exercise::T2, Exercise::T3, Exercise::T4}) {
    lib.add(generate_exercise(ex, params));
  }
  return lib;
}

void TrajectoryLibrary::load_directory(const std::filesystem::path& directory) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) add(load_trajectory(f));
}

void TrajectoryLibrary::add(Trajectory trajectory) {
  std::string id = trajectory.id;
  items_.insert_or_assign(std::move(id), std::move(trajectory));
}

const Trajectory* TrajectoryLibrary::find(const std::string& id) const {
  const auto it = items_.find(id);
  return it == items_.end() ? nullptr : &it->second;
}

std::vector<std::string> TrajectoryLibrary::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, t] : items_) out.push_back(id);
  return out;
}

}  // namespace kinetunnel
