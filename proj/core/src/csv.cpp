#include "kinetunnel/csv.hpp"

#include "kinetunnel/error.hpp"

#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <tuple>

namespace kinetunnel {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line) + ": " + what);
}

std::string trimmed(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool read_double(const std::string& s, double& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trimmed(std::move(field)));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(trimmed(std::move(field)));
  return out;
}

// Shortest text that reads back to the same double.
static std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

ErrRow to_err_row(const ErrorSummary& s) {
  return {s.subject_id, s.exercise_id, s.condition, s.space, s.err};
}

void write_err_csv(std::ostream& out, const std::vector<ErrRow>& rows) {
  out << "subject,exercise,condition,space,err\n";
  for (const ErrRow& r : rows) {
    out << quote_if_needed(r.subject) << ',' << quote_if_needed(r.exercise) << ','
        << to_string(r.condition) << ',' << to_string(r.space) << ',' << shortest(r.err) << '\n';
  }
}

std::vector<ErrRow> read_err_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail(1, "empty file");
  ++line_no;
  const auto header = split_csv_line(line);
  const std::vector<std::string> expected{"subject", "exercise", "condition", "space", "err"};
  if (header != expected) fail(line_no, "expected header subject,exercise,condition,space,err");

  std::vector<ErrRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 5) fail(line_no, "expected 5 columns");
    ErrRow row;
    row.subject = cells[0];
    row.exercise = cells[1];
    try {
      row.condition = parse_condition(cells[2]);
      row.space = parse_error_space(cells[3]);
    } catch (const Error& e) {
      fail(line_no, e.what());
    }
    if (!read_double(cells[4], row.err)) fail(line_no, "err is not a number");
    rows.push_back(std::move(row));
  }
  return rows;
}

stats::QuestionnaireMatrix read_questionnaire_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail(1, "empty file");
  ++line_no;
  const auto header = split_csv_line(line);

  stats::QuestionnaireMatrix m;
  std::vector<std::size_t> columns;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string name = header[c];
    stats::Polarity pol;
    if (ends_with(name, "+")) {
      pol = stats::Polarity::Positive;
      name.pop_back();
    } else if (ends_with(name, "-")) {
      pol = stats::Polarity::Negative;
      name.pop_back();
    } else if (ends_with(name, "−")) {
      pol = stats::Polarity::Negative;
      name.resize(name.size() - 3);
    } else {
      continue;
    }
    columns.push_back(c);
    m.polarity.push_back(pol);
    m.item_names.push_back(trimmed(name));
  }
  if (columns.empty()) fail(line_no, "no item columns (mark headers with + or -)");

  while (std::getline(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) fail(line_no, "column count differs from header");
    std::vector<int> answers;
    for (std::size_t c : columns) {
      int v = 0;
      const std::string& s = cells[c];
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size() || v < 1 || v > 5) {
        fail(line_no, "answer '" + s + "' is not a Likert value 1..5");
      }
      answers.push_back(v);
    }
    m.responses.push_back(std::move(answers));
  }
  return m;
}

namespace {

PairedErr pair_where(const std::vector<ErrRow>& rows, bool (*is_treated)(Condition, Condition),
                     Condition treated, Condition baseline) {
  using Key = std::tuple<std::string, std::string, ErrorSpace>;
  std::map<Key, double> base;
  for (const ErrRow& r : rows) {
    if (r.condition == baseline) base[{r.subject, r.exercise, r.space}] = r.err;
  }
  PairedErr out;
  for (const ErrRow& r : rows) {
    if (r.condition == baseline || !is_treated(r.condition, treated)) continue;
    const auto it = base.find({r.subject, r.exercise, r.space});
    if (it == base.end()) continue;
    out.keys.push_back(r.subject + "/" + r.exercise + "/" + std::string(to_string(r.condition)) + "/" +
                       std::string(to_string(r.space)));
    out.with_feedback.push_back(r.err);
    out.baseline.push_back(it->second);
  }
  return out;
}

}  // namespace

PairedErr pair_conditions(const std::vector<ErrRow>& rows, Condition condition, Condition baseline) {
  return pair_where(
      rows, [](Condition c, Condition wanted) { return c == wanted; }, condition, baseline);
}

PairedErr pair_any_feedback(const std::vector<ErrRow>& rows) {
  return pair_where(
      rows, [](Condition c, Condition) { return c != Condition::NoFeedback; }, Condition::C1,
      Condition::NoFeedback);
}

}  // namespace kinetunnel
