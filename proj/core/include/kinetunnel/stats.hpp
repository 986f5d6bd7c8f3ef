#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace kinetunnel::stats {

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank
// ---------------------------------------------------------------------------

enum class WilcoxonMethod { Auto, Exact, Normal };

struct WilcoxonOptions {
  WilcoxonMethod method = WilcoxonMethod::Auto;
  /// Largest n (after dropping zero differences) handled by exact enumeration in Auto mode.
  std::size_t exact_max_n = 12;
  std::size_t min_pairs = 5;
};

struct WilcoxonResult {
  /// Sum of ranks of the positive differences.
  double w_plus = 0.0;
  double w_minus = 0.0;
  /// w_plus - w_minus; changes sign when x and y are swapped.
  double signed_rank_sum = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  bool exact = false;
  double z = 0.0;
};

/// Paired two-sided test on x - y.
///
/// Zero differences are dropped and tied magnitudes share their average rank.
/// Throws TooFewPairs when fewer than `min_pairs` non-zero differences remain.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    const WilcoxonOptions& options = {});

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov against a normal
// ---------------------------------------------------------------------------

struct KsResult {
  double d = 0.0;
  double p_value = 1.0;
  double mean = 0.0;
  double sd = 1.0;
  /// True when mean and sd were estimated from the sample (no Lilliefors
  /// correction is applied, so p is approximate).
  bool estimated_parameters = true;
};

/// One-sample KS against N(sample mean, sample sd). Needs n >= 5 and a non-zero sd.
KsResult ks_normality(std::span<const double> sample);
/// One-sample KS against a fully specified N(mean, sd).
KsResult ks_normal(std::span<const double> sample, double mean, double sd);

/// Asymptotic Kolmogorov survival function Q(lambda) = P(K > lambda).
double kolmogorov_survival(double lambda);

// ---------------------------------------------------------------------------
// Questionnaires
// ---------------------------------------------------------------------------

/// Standard 10-item SUS score in [0, 100]. Odd items are positive, even items negative.
double sus_score(std::span<const int> answers);

enum class Polarity { Positive, Negative };

struct QuestionnaireMatrix {
  /// subjects x items, Likert 1..5
  std::vector<std::vector<int>> responses;
  std::vector<Polarity> polarity;
  std::vector<std::string> item_names;

  std::size_t subjects() const { return responses.size(); }
  std::size_t items() const { return polarity.size(); }
  /// Responses with negative items reversed (6 - a). Validates the matrix.
  Eigen::MatrixXd scored() const;
};

/// Cronbach's alpha on reverse-scored responses, sample variances (n - 1).
double cronbach_alpha(const QuestionnaireMatrix& m);

struct CategoryScores {
  std::vector<std::string> names;
  /// subjects x categories: mean of each category's reverse-scored items.
  Eigen::MatrixXd scores;
  std::map<std::string, std::vector<std::size_t>> items;
};

/// Groups items by the alphabetic prefix of their names (e.g. "PU3" -> "PU").
CategoryScores category_scores(const QuestionnaireMatrix& m);

// ---------------------------------------------------------------------------
// Correlation and regression
// ---------------------------------------------------------------------------

struct PearsonResult {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

PearsonResult pearson(std::span<const double> x, std::span<const double> y);

struct OlsResult {
  /// Intercept first when requested.
  Eigen::VectorXd coefficients;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd t_values;
  Eigen::VectorXd p_values;
  Eigen::VectorXd residuals;
  double r_squared = 0.0;
  std::size_t dof = 0;
  bool intercept = false;
};

/// Least squares via column-pivoted Householder QR.
///
/// Throws RankDeficient when the design is not of full column rank and
/// TooFewSamples when rows <= columns.
OlsResult ols_regression(const Eigen::MatrixXd& predictors, const Eigen::VectorXd& y, bool intercept);

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

double mean(std::span<const double> v);
/// Sample standard deviation (n - 1).
double sample_sd(std::span<const double> v);
double normal_cdf(double z);
/// Two-sided p-value of a Student t statistic.
double student_t_two_sided(double t, double dof);

}  // namespace kinetunnel::stats
