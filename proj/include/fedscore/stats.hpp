#pragma once

#include <span>
#include <vector>

namespace fedscore {

double mean_of(std::span<const double> v);

// Sample standard deviation (n - 1 denominator).
double sample_sd(std::span<const double> v);

struct AdResult {
  double statistic = 0.0;  // standardized k-sample statistic
  double p_value = 0.25;
};

// K-sample Anderson-Darling test in the midrank (tied-data) version, with
// the usual table-based p-value interpolation. The p-value saturates at 0.25
// above and 0.001 below the tabulated range; pooled samples with a single
// distinct value report the 0.25 cap directly. Every sample needs at least
// two observations.
AdResult anderson_darling(const std::vector<std::vector<double>>& samples);

// Two-sample convenience wrapper.
AdResult anderson_darling(const std::vector<double>& a, const std::vector<double>& b);

// Raw midrank statistic before standardization (exposed for cross-checks).
double anderson_darling_a2akn(const std::vector<std::vector<double>>& samples);

enum class TTail { greater, less, two_sided };

// Student-t CDF with df degrees of freedom.
double student_t_cdf(double t, double df);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// One-sample t-test on paired differences. Tail `greater` tests a positive
// mean. Zero-variance conventions: all-zero differences give p = 1; a
// nonzero constant gives p = 0 when its sign matches the tail (two_sided
// included), else 1.
double paired_t_test(std::span<const double> diffs, TTail tail);

double rmse(std::span<const double> a, std::span<const double> b);

struct DivergenceResult {
  bool flagged = false;
  int first_round = -1;  // 0-based index into the loss sequence
};

// Flags the first position whose trailing-window mean exceeds factor times
// the smallest trailing-window mean seen so far.
DivergenceResult loss_divergence_monitor(std::span<const double> losses, int window = 3,
                                         double factor = 1.5);

// Spearman rank correlation with midranks for ties; 0 when either side is
// constant.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace fedscore
