#pragma once

#include "kinetunnel/analytics.hpp"
#include "kinetunnel/arm_model.hpp"
#include "kinetunnel/feedback.hpp"
#include "kinetunnel/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace kinetunnel {

/// One value of a key-value document.
using ConfigValue = std::variant<bool, double, std::string, std::vector<double>>;

/// Flat view of a TOML-style document: keys are "section.key".
///
/// Supported: `[section]` headers, `key = value`, `#` comments, numbers,
/// booleans, double-quoted strings and flat numeric arrays.
class KeyValueDocument {
 public:
  static KeyValueDocument parse(std::string_view text);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, ConfigValue>& values() const { return values_; }
  /// Source line of a key, for diagnostics.
  std::size_t line_of(const std::string& key) const;

 private:
  std::map<std::string, ConfigValue> values_;
  std::map<std::string, std::size_t> lines_;
};

struct ServerSettings {
  std::string host = "127.0.0.1";
  std::uint16_t tcp_port = 7600;
  std::uint16_t ws_port = 7601;
  bool websocket = true;
  /// Per-connection sample budget; faster clients are slowed down, not dropped.
  double max_sample_rate_hz = 240.0;
  std::string log_path;
  /// Directory of extra trajectory documents; empty means built-ins only.
  std::string trajectory_library;
};

struct ServiceConfig {
  ArmGeometry arm;
  FeedbackConfig feedback;
  ExerciseParams exercises;
  AnalysisOptions analysis;
  ServerSettings server;
};

/// Unknown sections or keys and mistyped values raise SchemaViolation with the line.
ServiceConfig parse_config(std::string_view text);
ServiceConfig load_config(const std::filesystem::path& path);
/// Writes every setting, so the output documents the defaults.
std::string render_config(const ServiceConfig& config);

}  // namespace kinetunnel
