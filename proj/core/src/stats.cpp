#include "kinetunnel/stats.hpp"

#include "kinetunnel/error.hpp"

#include <Eigen/QR>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>

namespace kinetunnel::stats {

double mean(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorCode::TooFewSamples, "mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) throw Error(ErrorCode::TooFewSamples, "standard deviation needs two values");
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double student_t_two_sided(double t, double dof) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t dist(dof);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

// ---------------------------------------------------------------------------

namespace {

// Average ranks (1-based) of the values, ties sharing the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& values, std::vector<std::size_t>* tie_sizes) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    if (tie_sizes) tie_sizes->push_back(j - i + 1);
    i = j + 1;
  }
  return ranks;
}

// Exact two-sided p for W+ by counting all 2^n sign assignments of the ranks.
// Ranks are doubled so half-integer average ranks stay integral.
double exact_signed_rank_p(const std::vector<double>& ranks, double w_plus) {
  std::vector<long> doubled(ranks.size());
  long total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    doubled[i] = std::lround(2.0 * ranks[i]);
    total += doubled[i];
  }
  // counts[s] = number of sign patterns whose positive ranks sum to s / 2.
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  long reach = 0;
  for (long r : doubled) {
    for (long s = reach; s >= 0; --s) {
      if (counts[static_cast<std::size_t>(s)] != 0.0) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
    }
    reach += r;
  }
  const long observed = std::lround(2.0 * w_plus);
  double below = 0.0;
  double above = 0.0;
  double all = 0.0;
  for (long s = 0; s <= total; ++s) {
    const double c = counts[static_cast<std::size_t>(s)];
    all += c;
    if (s <= observed) below += c;
    if (s >= observed) above += c;
  }
  return std::min(1.0, 2.0 * std::min(below, above) / all);
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    const WilcoxonOptions& options) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::BadLength, "paired samples differ in length");
  }
  std::vector<double> magnitude;
  std::vector<int> sign;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw Error(ErrorCode::InvalidArgument, "paired samples must be finite");
    }
    const double d = x[i] - y[i];
    if (d == 0.0) continue;
    magnitude.push_back(std::abs(d));
    sign.push_back(d > 0.0 ? 1 : -1);
  }
  const std::size_t n = magnitude.size();
  if (n < std::max<std::size_t>(options.min_pairs, 1)) {
    throw Error(ErrorCode::TooFewPairs, "only " + std::to_string(n) + " non-zero differences");
  }

  std::vector<std::size_t> ties;
  const std::vector<double> ranks = average_ranks(magnitude, &ties);

  WilcoxonResult result;
  result.n = n;
  for (std::size_t i = 0; i < n; ++i) {
    (sign[i] > 0 ? result.w_plus : result.w_minus) += ranks[i];
  }
  result.signed_rank_sum = result.w_plus - result.w_minus;

  const double nn = static_cast<double>(n);
  const double mu = nn * (nn + 1.0) / 4.0;
  double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
  for (std::size_t t : ties) {
    const double tt = static_cast<double>(t);
    var -= (tt * tt * tt - tt) / 48.0;
  }
  const double sd = std::sqrt(var);
  result.z = sd > 0.0 ? (result.w_plus - mu) / sd : 0.0;

  const bool exact = options.method == WilcoxonMethod::Exact ||
                     (options.method == WilcoxonMethod::Auto && n <= options.exact_max_n);
  result.exact = exact;
  if (exact) {
    result.p_value = exact_signed_rank_p(ranks, result.w_plus);
  } else {
    const double corrected = std::max(0.0, std::abs(result.w_plus - mu) - 0.5);
    const double z = sd > 0.0 ? corrected / sd : 0.0;
    result.p_value = std::min(1.0, std::erfc(z / std::numbers::sqrt2));
  }
  return result;
}

// ---------------------------------------------------------------------------

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-theta form converges quickly for small lambda.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double sum = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
      sum += term;
      if (term < 1e-18) break;
    }
    const double cdf = std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_normal(std::span<const double> sample, double mean_value, double sd) {
  if (sample.size() < 5) {
    throw Error(ErrorCode::TooFewSamples, "KS test needs at least 5 samples");
  }
  if (!(sd > 0.0) || !std::isfinite(sd)) {
    throw Error(ErrorCode::DegenerateVariance, "KS reference normal needs a positive sd");
  }
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = normal_cdf((sorted[i] - mean_value) / sd);
    const double above = static_cast<double>(i + 1) / n - f;
    const double below = f - static_cast<double>(i) / n;
    d = std::max({d, above, below});
  }
  KsResult result;
  result.d = d;
  result.mean = mean_value;
  result.sd = sd;
  result.estimated_parameters = false;
  const double root_n = std::sqrt(n);
  result.p_value = kolmogorov_survival((root_n + 0.12 + 0.11 / root_n) * d);
  return result;
}

KsResult ks_normality(std::span<const double> sample) {
  if (sample.size() < 5) {
    throw Error(ErrorCode::TooFewSamples, "KS test needs at least 5 samples");
  }
  const double m = mean(sample);
  const double sd = sample_sd(sample);
  if (!(sd > 0.0)) {
    throw Error(ErrorCode::DegenerateVariance, "sample has zero variance");
  }
  KsResult result = ks_normal(sample, m, sd);
  result.estimated_parameters = true;
  return result;
}

// ---------------------------------------------------------------------------

double sus_score(std::span<const int> answers) {
  if (answers.size() != 10) {
    throw Error(ErrorCode::BadLength, "SUS needs exactly 10 answers");
  }
  int total = 0;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    const int a = answers[i];
    if (a < 1 || a > 5) {
      throw Error(ErrorCode::OutOfRange, "SUS answers must be in 1..5");
    }
    total += (i % 2 == 0) ? a - 1 : 5 - a;
  }
  return 2.5 * total;
}

Eigen::MatrixXd QuestionnaireMatrix::scored() const {
  const std::size_t k = polarity.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(responses.size()), static_cast<Eigen::Index>(k));
  for (std::size_t s = 0; s < responses.size(); ++s) {
    if (responses[s].size() != k) {
      throw Error(ErrorCode::BadLength, "questionnaire row " + std::to_string(s) + " has the wrong item count");
    }
    for (std::size_t i = 0; i < k; ++i) {
      const int a = responses[s][i];
      if (a < 1 || a > 5) {
        throw Error(ErrorCode::OutOfRange, "Likert answers must be in 1..5");
      }
      out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) =
          polarity[i] == Polarity::Negative ? 6.0 - a : static_cast<double>(a);
    }
  }
  return out;
}

namespace {

double column_variance(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

std::string category_of(const std::string& item) {
  std::string prefix;
  for (char c : item) {
    if (!std::isalpha(static_cast<unsigned char>(c)) && c != '_') break;
    prefix.push_back(c);
  }
  return prefix.empty() ? item : prefix;
}

}  // namespace

double cronbach_alpha(const QuestionnaireMatrix& m) {
  if (m.items() < 2 || m.subjects() < 2) {
    throw Error(ErrorCode::TooFewSamples, "Cronbach's alpha needs at least 2 items and 2 subjects");
  }
  const Eigen::MatrixXd x = m.scored();
  const double k = static_cast<double>(x.cols());
  double item_var = 0.0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) item_var += column_variance(x.col(i));
  const double total_var = column_variance(x.rowwise().sum());
  if (!(total_var > 0.0)) {
    throw Error(ErrorCode::DegenerateVariance, "total score has zero variance");
  }
  return k / (k - 1.0) * (1.0 - item_var / total_var);
}

CategoryScores category_scores(const QuestionnaireMatrix& m) {
  const Eigen::MatrixXd x = m.scored();
  CategoryScores out;
  for (std::size_t i = 0; i < m.items(); ++i) {
    const std::string name = i < m.item_names.size() ? category_of(m.item_names[i]) : "ITEM";
    auto [it, inserted] = out.items.try_emplace(name);
    if (inserted) out.names.push_back(name);
    it->second.push_back(i);
  }
  out.scores.resize(x.rows(), static_cast<Eigen::Index>(out.names.size()));
  for (std::size_t c = 0; c < out.names.size(); ++c) {
    const auto& cols = out.items[out.names[c]];
    for (Eigen::Index s = 0; s < x.rows(); ++s) {
      double sum = 0.0;
      for (std::size_t i : cols) sum += x(s, static_cast<Eigen::Index>(i));
      out.scores(s, static_cast<Eigen::Index>(c)) = sum / static_cast<double>(cols.size());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::BadLength, "pearson inputs differ in length");
  }
  if (x.size() < 3) {
    throw Error(ErrorCode::TooFewSamples, "pearson needs at least 3 pairs");
  }
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw Error(ErrorCode::DegenerateVariance, "pearson input has zero variance");
  }
  PearsonResult result;
  result.n = x.size();
  result.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double dof = static_cast<double>(x.size()) - 2.0;
  if (std::abs(result.r) >= 1.0) {
    result.p_value = 0.0;
  } else if (dof > 0.0) {
    const double t = result.r * std::sqrt(dof / (1.0 - result.r * result.r));
    result.p_value = student_t_two_sided(t, dof);
  }
  return result;
}

OlsResult ols_regression(const Eigen::MatrixXd& predictors, const Eigen::VectorXd& y, bool intercept) {
  if (predictors.rows() != y.size()) {
    throw Error(ErrorCode::BadLength, "predictor rows and response length differ");
  }
  const Eigen::Index n = predictors.rows();
  const Eigen::Index p = predictors.cols() + (intercept ? 1 : 0);
  if (p == 0) {
    throw Error(ErrorCode::InvalidArgument, "regression needs at least one column");
  }
  if (n <= p) {
    throw Error(ErrorCode::TooFewSamples, "regression needs more rows than columns");
  }
  Eigen::MatrixXd design(n, p);
  if (intercept) {
    design.col(0).setOnes();
    design.rightCols(predictors.cols()) = predictors;
  } else {
    design = predictors;
  }

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < p) {
    throw Error(ErrorCode::RankDeficient, "design matrix is rank deficient");
  }

  OlsResult result;
  result.intercept = intercept;
  result.coefficients = qr.solve(y);
  result.residuals = y - design * result.coefficients;
  result.dof = static_cast<std::size_t>(n - p);

  const double rss = result.residuals.squaredNorm();
  const double tss = intercept ? (y.array() - y.mean()).square().sum() : y.squaredNorm();
  result.r_squared = tss > 0.0 ? 1.0 - rss / tss : 1.0;

  // (X'X)^-1 = P R^-1 R^-T P'
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd xtx_inv_perm = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  const Eigen::MatrixXd xtx_inv = perm * xtx_inv_perm * perm.transpose();

  const double sigma2 = rss / static_cast<double>(result.dof);
  result.std_errors = (sigma2 * xtx_inv.diagonal()).cwiseSqrt();
  result.t_values.resize(p);
  result.p_values.resize(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double se = result.std_errors[i];
    const double b = result.coefficients[i];
    if (se > 0.0) {
      result.t_values[i] = b / se;
      result.p_values[i] = student_t_two_sided(result.t_values[i], static_cast<double>(result.dof));
    } else {
      result.t_values[i] = b == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), b);
      result.p_values[i] = b == 0.0 ? 1.0 : 0.0;
    }
  }
  return result;
}

}  // namespace kinetunnel::stats
