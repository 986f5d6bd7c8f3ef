#include "kinetunnel/config.hpp"

#include "kinetunnel/error.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace kinetunnel {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line) + ": " + what);
}

// Removes a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

bool parse_number(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

ConfigValue parse_value(std::string_view raw, std::size_t line) {
  const std::string_view s = trim(raw);
  if (s.empty()) fail(line, "missing value");
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') fail(line, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        ++i;
        out.push_back(s[i] == 'n' ? '\n' : s[i] == 't' ? '\t' : s[i]);
      } else {
        out.push_back(s[i]);
      }
    }
    return out;
  }
  if (s.front() == '[') {
    if (s.back() != ']') fail(line, "unterminated array");
    std::vector<double> out;
    std::string_view body = trim(s.substr(1, s.size() - 2));
    while (!body.empty()) {
      const auto comma = body.find(',');
      double v = 0.0;
      if (!parse_number(body.substr(0, comma), v)) fail(line, "arrays hold numbers only");
      out.push_back(v);
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
    }
    return out;
  }
  double v = 0.0;
  if (!parse_number(s, v)) fail(line, "cannot read value '" + std::string(s) + "'");
  return v;
}

double as_number(const KeyValueDocument& doc, const std::string& key, const ConfigValue& v) {
  if (const double* d = std::get_if<double>(&v)) return *d;
  fail(doc.line_of(key), "'" + key + "' must be a number");
}

std::string as_string(const KeyValueDocument& doc, const std::string& key, const ConfigValue& v) {
  if (const std::string* s = std::get_if<std::string>(&v)) return *s;
  fail(doc.line_of(key), "'" + key + "' must be a string");
}

bool as_bool(const KeyValueDocument& doc, const std::string& key, const ConfigValue& v) {
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  fail(doc.line_of(key), "'" + key + "' must be true or false");
}

std::vector<double> as_array(const KeyValueDocument& doc, const std::string& key, const ConfigValue& v,
                             std::size_t size) {
  const auto* a = std::get_if<std::vector<double>>(&v);
  if (!a || a->size() != size) {
    fail(doc.line_of(key), "'" + key + "' must be an array of " + std::to_string(size) + " numbers");
  }
  return *a;
}

Vec3 as_vec3(const KeyValueDocument& doc, const std::string& key, const ConfigValue& v) {
  const auto a = as_array(doc, key, v, 3);
  return {a[0], a[1], a[2]};
}

Rgb as_rgb(const KeyValueDocument& doc, const std::string& key, const ConfigValue& v) {
  const auto a = as_array(doc, key, v, 3);
  for (double c : a) {
    if (c < 0.0 || c > 255.0) fail(doc.line_of(key), "'" + key + "' channels must be in 0..255");
  }
  return {a[0], a[1], a[2]};
}

std::size_t as_count(const KeyValueDocument& doc, const std::string& key, const ConfigValue& v) {
  const double d = as_number(doc, key, v);
  if (d < 0.0 || d != static_cast<double>(static_cast<std::size_t>(d))) {
    fail(doc.line_of(key), "'" + key + "' must be a non-negative integer");
  }
  return static_cast<std::size_t>(d);
}

std::uint16_t as_port(const KeyValueDocument& doc, const std::string& key, const ConfigValue& v) {
  const std::size_t p = as_count(doc, key, v);
  if (p > 65535) fail(doc.line_of(key), "'" + key + "' is not a port number");
  return static_cast<std::uint16_t>(p);
}

double positive(const KeyValueDocument& doc, const std::string& key, const ConfigValue& v) {
  const double d = as_number(doc, key, v);
  if (!(d > 0.0)) fail(doc.line_of(key), "'" + key + "' must be positive");
  return d;
}

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_vec(const double* v, std::size_t n) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < n; ++i) os << (i ? ", " : "") << num(v[i]);
  os << ']';
  return os.str();
}

}  // namespace

KeyValueDocument KeyValueDocument::parse(std::string_view text) {
  KeyValueDocument doc;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) fail(line_no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
    const std::string_view name = trim(line.substr(0, eq));
    if (name.empty()) fail(line_no, "missing key");
    const std::string key = section.empty() ? std::string(name) : section + "." + std::string(name);
    if (doc.values_.count(key)) fail(line_no, "duplicate key '" + key + "'");
    doc.values_.emplace(key, parse_value(line.substr(eq + 1), line_no));
    doc.lines_.emplace(key, line_no);
  }
  return doc;
}

std::size_t KeyValueDocument::line_of(const std::string& key) const {
  const auto it = lines_.find(key);
  return it == lines_.end() ? 0 : it->second;
}

ServiceConfig parse_config(std::string_view text) {
  const KeyValueDocument doc = KeyValueDocument::parse(text);
  ServiceConfig cfg;
  using Setter = std::function<void(const std::string&, const ConfigValue&)>;
  const std::map<std::string, Setter> setters{
      {"arm.upper_arm_m", [&](auto& k, auto& v) { cfg.arm.upper_arm_length = positive(doc, k, v); }},
      {"arm.forearm_m", [&](auto& k, auto& v) { cfg.arm.forearm_length = positive(doc, k, v); }},
      {"arm.shoulder_origin_m", [&](auto& k, auto& v) { cfg.arm.shoulder_origin = as_vec3(doc, k, v); }},
      {"arm.lower_limits_rad",
       [&](auto& k, auto& v) {
         const auto a = as_array(doc, k, v, 4);
         cfg.arm.limits.lower = JointVector(a[0], a[1], a[2], a[3]);
       }},
      {"arm.upper_limits_rad",
       [&](auto& k, auto& v) {
         const auto a = as_array(doc, k, v, 4);
         cfg.arm.limits.upper = JointVector(a[0], a[1], a[2], a[3]);
       }},
      {"feedback.scale_min", [&](auto& k, auto& v) { cfg.feedback.scale_min = as_number(doc, k, v); }},
      {"feedback.on_path_rgb", [&](auto& k, auto& v) { cfg.feedback.on_path = as_rgb(doc, k, v); }},
      {"feedback.off_path_rgb", [&](auto& k, auto& v) { cfg.feedback.off_path = as_rgb(doc, k, v); }},
      {"feedback.repetition_radius_m",
       [&](auto& k, auto& v) { cfg.feedback.repetition_radius = positive(doc, k, v); }},
      {"feedback.deadband_fraction",
       [&](auto& k, auto& v) { cfg.feedback.deadband_fraction = as_number(doc, k, v); }},
      {"exercises.reach_m", [&](auto& k, auto& v) { cfg.exercises.reach = positive(doc, k, v); }},
      {"exercises.table_height_m", [&](auto& k, auto& v) { cfg.exercises.table_height = as_number(doc, k, v); }},
      {"exercises.shoulder_height_m",
       [&](auto& k, auto& v) { cfg.exercises.shoulder_height = as_number(doc, k, v); }},
      {"exercises.circle_radius_m", [&](auto& k, auto& v) { cfg.exercises.circle_radius = positive(doc, k, v); }},
      {"exercises.spacing_m", [&](auto& k, auto& v) { cfg.exercises.spacing = positive(doc, k, v); }},
      {"exercises.start_point_m", [&](auto& k, auto& v) { cfg.exercises.start_point = as_vec3(doc, k, v); }},
      {"analysis.repetitions", [&](auto& k, auto& v) { cfg.analysis.repetitions = as_count(doc, k, v); }},
      {"analysis.samples", [&](auto& k, auto& v) { cfg.analysis.samples = as_count(doc, k, v); }},
      {"analysis.segmentation_radius_m",
       [&](auto& k, auto& v) { cfg.analysis.segmentation.radius = positive(doc, k, v); }},
      {"analysis.debounce_ms",
       [&](auto& k, auto& v) { cfg.analysis.segmentation.debounce_ms = as_number(doc, k, v); }},
      {"analysis.snap_to_start",
       [&](auto& k, auto& v) { cfg.analysis.segmentation.snap_to_start = as_bool(doc, k, v); }},
      {"server.host", [&](auto& k, auto& v) { cfg.server.host = as_string(doc, k, v); }},
      {"server.tcp_port", [&](auto& k, auto& v) { cfg.server.tcp_port = as_port(doc, k, v); }},
      {"server.ws_port", [&](auto& k, auto& v) { cfg.server.ws_port = as_port(doc, k, v); }},
      {"server.websocket", [&](auto& k, auto& v) { cfg.server.websocket = as_bool(doc, k, v); }},
      {"server.max_sample_rate_hz",
       [&](auto& k, auto& v) { cfg.server.max_sample_rate_hz = positive(doc, k, v); }},
      {"server.log_path", [&](auto& k, auto& v) { cfg.server.log_path = as_string(doc, k, v); }},
      {"server.trajectory_library",
       [&](auto& k, auto& v) { cfg.server.trajectory_library = as_string(doc, k, v); }},
  };
  for (const auto& [key, value] : doc.values()) {
    const auto it = setters.find(key);
    if (it == setters.end()) fail(doc.line_of(key), "unknown setting '" + key + "'");
    it->second(key, value);
  }
  if (cfg.feedback.scale_min < 0.0 || cfg.feedback.scale_min > 1.0) {
    fail(doc.line_of("feedback.scale_min"), "'feedback.scale_min' must be within 0..1");
  }
  if (cfg.feedback.deadband_fraction < 0.0 || cfg.feedback.deadband_fraction > 1.0) {
    fail(doc.line_of("feedback.deadband_fraction"), "'feedback.deadband_fraction' must be within 0..1");
  }
  for (int j = 0; j < 4; ++j) {
    if (cfg.arm.limits.lower[j] > cfg.arm.limits.upper[j]) {
      fail(doc.line_of("arm.lower_limits_rad"), "joint limits are inverted");
    }
  }
  return cfg;
}

ServiceConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string render_config(const ServiceConfig& c) {
  std::ostringstream os;
  const auto rgb = [](const Rgb& x) {
    const double v[3] = {x.r, x.g, x.b};
    return fmt_vec(v, 3);
  };
  const auto quoted = [](const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
      if (ch == '"' || ch == '\\') out.push_back('\\');
      out.push_back(ch);
    }
    return out + "\"";
  };
  os << "[arm]\n"
     << "upper_arm_m = " << num(c.arm.upper_arm_length) << "\n"
     << "forearm_m = " << num(c.arm.forearm_length) << "\n"
     << "shoulder_origin_m = " << fmt_vec(c.arm.shoulder_origin.data(), 3) << "\n"
     << "lower_limits_rad = " << fmt_vec(c.arm.limits.lower.data(), 4) << "\n"
     << "upper_limits_rad = " << fmt_vec(c.arm.limits.upper.data(), 4) << "\n\n"
     << "[feedback]\n"
     << "scale_min = " << num(c.feedback.scale_min) << "\n"
     << "on_path_rgb = " << rgb(c.feedback.on_path) << "\n"
     << "off_path_rgb = " << rgb(c.feedback.off_path) << "\n"
     << "repetition_radius_m = " << num(c.feedback.repetition_radius) << "\n"
     << "deadband_fraction = " << num(c.feedback.deadband_fraction) << "\n\n"
     << "[exercises]\n"
     << "reach_m = " << num(c.exercises.reach) << "\n"
     << "table_height_m = " << num(c.exercises.table_height) << "\n"
     << "shoulder_height_m = " << num(c.exercises.shoulder_height) << "\n"
     << "circle_radius_m = " << num(c.exercises.circle_radius) << "\n"
     << "spacing_m = " << num(c.exercises.spacing) << "\n"
     << "start_point_m = " << fmt_vec(c.exercises.start_point.data(), 3) << "\n\n"
     << "[analysis]\n"
     << "repetitions = " << c.analysis.repetitions << "\n"
     << "samples = " << c.analysis.samples << "\n"
     << "segmentation_radius_m = " << num(c.analysis.segmentation.radius) << "\n"
     << "debounce_ms = " << num(c.analysis.segmentation.debounce_ms) << "\n"
     << "snap_to_start = " << (c.analysis.segmentation.snap_to_start ? "true" : "false") << "\n\n"
     << "[server]\n"
     << "host = " << quoted(c.server.host) << "\n"
     << "tcp_port = " << c.server.tcp_port << "\n"
     << "ws_port = " << c.server.ws_port << "\n"
     << "websocket = " << (c.server.websocket ? "true" : "false") << "\n"
     << "max_sample_rate_hz = " << num(c.server.max_sample_rate_hz) << "\n"
     << "log_path = " << quoted(c.server.log_path) << "\n"
     << "trajectory_library = " << quoted(c.server.trajectory_library) << "\n";
  return os.str();
}

}  // namespace kinetunnel
