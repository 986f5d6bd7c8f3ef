#pragma once

#include "kinetunnel/analytics.hpp"
#include "kinetunnel/stats.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace kinetunnel {

/// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);

/// One line of the analytics table: subject,exercise,condition,space,err.
struct ErrRow {
  std::string subject;
  std::string exercise;
  Condition condition = Condition::NoFeedback;
  ErrorSpace space = ErrorSpace::EndEffector;
  double err = 0.0;
};

ErrRow to_err_row(const ErrorSummary& summary);
void write_err_csv(std::ostream& out, const std::vector<ErrRow>& rows);
/// Throws SchemaViolation with the line number on malformed input.
std::vector<ErrRow> read_err_csv(std::istream& in);

/// Reads a subjects x items questionnaire.
///
/// Header cells ending in '+' or '-' (ASCII or U+2212) are items with that
/// polarity; other columns, such as a subject id, are skipped.
stats::QuestionnaireMatrix read_questionnaire_csv(std::istream& in);

/// Feedback-vs-baseline pairs matched on subject, exercise and space.
struct PairedErr {
  std::vector<std::string> keys;
  std::vector<double> with_feedback;
  std::vector<double> baseline;
};

/// Pairs each row of `condition` with the row of the `baseline` condition that
/// shares subject, exercise and space. Unmatched rows are ignored.
PairedErr pair_conditions(const std::vector<ErrRow>& rows, Condition condition,
                          Condition baseline = Condition::NoFeedback);
/// Same, taking every feedback condition (C1, C2, C3) against the baseline.
PairedErr pair_any_feedback(const std::vector<ErrRow>& rows);

}  // namespace kinetunnel
