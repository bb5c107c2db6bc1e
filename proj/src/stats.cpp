#include "fedscore/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fedscore {

double mean_of(std::span<const double> v) {
  if (v.empty()) {
    throw std::invalid_argument("stats: mean of empty sample");
  }
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) {
    throw std::invalid_argument("stats: sd needs at least two values");
  }
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) {
    acc += (x - m) * (x - m);
  }
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

double anderson_darling_a2akn(const std::vector<std::vector<double>>& samples) {
  const std::size_t k = samples.size();
  if (k < 2) {
    throw std::invalid_argument("anderson_darling: need at least two samples");
  }
  std::vector<double> pooled;
  for (const auto& s : samples) {
    if (s.size() < 2) {
      throw std::invalid_argument("anderson_darling: each sample needs at least two values");
    }
    pooled.insert(pooled.end(), s.begin(), s.end());
  }
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> distinct = pooled;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  const double n_pooled = static_cast<double>(pooled.size());
  double a2 = 0.0;
  for (const auto& raw : samples) {
    std::vector<double> s = raw;
    std::sort(s.begin(), s.end());
    const double ni = static_cast<double>(s.size());
    double inner = 0.0;
    for (double z : distinct) {
      const double left = static_cast<double>(
          std::lower_bound(pooled.begin(), pooled.end(), z) - pooled.begin());
      const double right = static_cast<double>(
          std::upper_bound(pooled.begin(), pooled.end(), z) - pooled.begin());
      const double lj = right - left;          // multiplicity in the pooled sample
      const double bj = left + lj / 2.0;       // midrank position
      const double s_right =
          static_cast<double>(std::upper_bound(s.begin(), s.end(), z) - s.begin());
      const double s_left =
          static_cast<double>(std::lower_bound(s.begin(), s.end(), z) - s.begin());
      const double mij = s_right - (s_right - s_left) / 2.0;
      const double denom = bj * (n_pooled - bj) - n_pooled * lj / 4.0;
      if (denom <= 0.0) {
        continue;  // only possible when the pool has a single distinct value
      }
      const double num = n_pooled * mij - bj * ni;
      inner += lj / n_pooled * num * num / denom;
    }
    a2 += inner / ni;
  }
  return a2 * (n_pooled - 1.0) / n_pooled;
}

namespace {

// Least-squares quadratic fit, highest power first.
std::array<double, 3> quad_fit(std::span<const double> x, std::span<const double> y) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  double t0 = 0, t1 = 0, t2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double x2 = xi * xi;
    s0 += 1.0;
    s1 += xi;
    s2 += x2;
    s3 += x2 * xi;
    s4 += x2 * x2;
    t0 += y[i];
    t1 += y[i] * xi;
    t2 += y[i] * x2;
  }
  // Solve [s4 s3 s2; s3 s2 s1; s2 s1 s0] [a b c]' = [t2 t1 t0]' by Cramer.
  const double det = s4 * (s2 * s0 - s1 * s1) - s3 * (s3 * s0 - s1 * s2) +
                     s2 * (s3 * s1 - s2 * s2);
  const double da = t2 * (s2 * s0 - s1 * s1) - s3 * (t1 * s0 - t0 * s1) +
                    s2 * (t1 * s1 - t0 * s2);
  const double db = s4 * (t1 * s0 - t0 * s1) - t2 * (s3 * s0 - s1 * s2) +
                    s2 * (s3 * t0 - s2 * t1);
  const double dc = s4 * (s2 * t0 - s1 * t1) - s3 * (s3 * t0 - s2 * t1) +
                    t2 * (s3 * s1 - s2 * s2);
  return {da / det, db / det, dc / det};
}

}  // namespace

AdResult anderson_darling(const std::vector<std::vector<double>>& samples) {
  const std::size_t k = samples.size();
  std::size_t n_pooled = 0;
  for (const auto& s : samples) {
    if (s.size() < 2) {
      throw std::invalid_argument("anderson_darling: each sample needs at least two values");
    }
    n_pooled += s.size();
  }
  if (k < 2) {
    throw std::invalid_argument("anderson_darling: need at least two samples");
  }

  // Degenerate pool: one distinct value carries no evidence either way.
  std::vector<double> pooled;
  for (const auto& s : samples) {
    pooled.insert(pooled.end(), s.begin(), s.end());
  }
  if (std::all_of(pooled.begin(), pooled.end(),
                  [&](double v) { return v == pooled.front(); })) {
    return {0.0, 0.25};
  }

  const double a2akn = anderson_darling_a2akn(samples);

  const double n = static_cast<double>(n_pooled);
  const double kd = static_cast<double>(k);
  double inv_sum = 0.0;  // H
  for (const auto& s : samples) {
    inv_sum += 1.0 / static_cast<double>(s.size());
  }
  double h = 0.0;
  for (std::size_t i = 1; i < n_pooled; ++i) {
    h += 1.0 / static_cast<double>(i);
  }
  double g = 0.0;
  {
    double cs = 0.0;
    for (std::size_t t = 0; t + 3 <= n_pooled; ++t) {
      cs += 1.0 / static_cast<double>(n_pooled - 1 - t);
      g += cs / static_cast<double>(t + 2);
    }
  }
  const double a = (4.0 * g - 6.0) * (kd - 1.0) + (10.0 - 6.0 * g) * inv_sum;
  const double b = (2.0 * g - 4.0) * kd * kd + 8.0 * h * kd +
                   (2.0 * g - 14.0 * h - 4.0) * inv_sum - 8.0 * h + 4.0 * g - 6.0;
  const double c = (6.0 * h + 2.0 * g - 2.0) * kd * kd + (4.0 * h - 4.0 * g + 6.0) * kd +
                   (2.0 * h - 6.0) * inv_sum + 4.0 * h;
  const double d = (2.0 * h + 6.0) * kd * kd - 4.0 * h * kd;
  const double sigma_sq =
      (a * n * n * n + b * n * n + c * n + d) / ((n - 1.0) * (n - 2.0) * (n - 3.0));
  if (!(sigma_sq > 0.0)) {
    throw std::invalid_argument("anderson_darling: pooled sample too small");
  }
  const double m = kd - 1.0;
  const double a2 = (a2akn - m) / std::sqrt(sigma_sq);

  // Interpolation table for the standardized statistic (Scholz & Stephens).
  static constexpr std::array<double, 7> b0 = {0.675, 1.281, 1.645, 1.960,
                                               2.326, 2.573, 3.085};
  static constexpr std::array<double, 7> b1 = {-0.245, 0.25, 0.678, 1.149,
                                               1.822, 2.364, 3.615};
  static constexpr std::array<double, 7> b2 = {-0.105, -0.305, -0.362, -0.391,
                                               -0.396, -0.345, -0.154};
  static constexpr std::array<double, 7> sig = {0.25, 0.1, 0.05, 0.025,
                                                0.01, 0.005, 0.001};
  std::array<double, 7> critical;
  for (std::size_t i = 0; i < 7; ++i) {
    critical[i] = b0[i] + b1[i] / std::sqrt(m) + b2[i] / m;
  }

  double p;
  if (a2 < critical.front()) {
    p = sig.front();
  } else if (a2 > critical.back()) {
    p = sig.back();
  } else {
    std::array<double, 7> log_sig;
    for (std::size_t i = 0; i < 7; ++i) {
      log_sig[i] = std::log(sig[i]);
    }
    const auto pf = quad_fit(critical, log_sig);
    p = std::exp(pf[0] * a2 * a2 + pf[1] * a2 + pf[2]);
    p = std::clamp(p, 0.001, 0.25);
  }
  return {a2, p};
}

AdResult anderson_darling(const std::vector<double>& a, const std::vector<double>& b) {
  return anderson_darling(std::vector<std::vector<double>>{a, b});
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::invalid_argument("incomplete_beta: a and b must be positive");
  }
  if (x <= 0.0) {
    return 0.0;
  }
  if (x >= 1.0) {
    return 1.0;
  }
  // Continued fraction (modified Lentz), as in the usual betai formulation.
  auto contfrac = [](double aa, double bb, double xx) {
    const double qab = aa + bb;
    const double qap = aa + 1.0;
    const double qam = aa - 1.0;
    const double tiny = 1e-300;
    double c = 1.0;
    double d = 1.0 - qab * xx / qap;
    if (std::fabs(d) < tiny) {
      d = tiny;
    }
    d = 1.0 / d;
    double result = d;
    for (int m = 1; m <= 300; ++m) {
      const double md = static_cast<double>(m);
      double num = md * (bb - md) * xx / ((qam + 2.0 * md) * (aa + 2.0 * md));
      d = 1.0 + num * d;
      if (std::fabs(d) < tiny) {
        d = tiny;
      }
      c = 1.0 + num / c;
      if (std::fabs(c) < tiny) {
        c = tiny;
      }
      d = 1.0 / d;
      result *= d * c;
      num = -(aa + md) * (qab + md) * xx / ((aa + 2.0 * md) * (qap + 2.0 * md));
      d = 1.0 + num * d;
      if (std::fabs(d) < tiny) {
        d = tiny;
      }
      c = 1.0 + num / c;
      if (std::fabs(c) < tiny) {
        c = tiny;
      }
      d = 1.0 / d;
      const double delta = d * c;
      result *= delta;
      if (std::fabs(delta - 1.0) < 1e-15) {
        break;
      }
    }
    return result;
  };
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * contfrac(a, b, x) / a;
  }
  return 1.0 - front * contfrac(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) {
    throw std::invalid_argument("student_t_cdf: df must be positive");
  }
  if (t == 0.0) {
    return 0.5;
  }
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

double paired_t_test(std::span<const double> diffs, TTail tail) {
  if (diffs.size() < 2) {
    throw std::invalid_argument("paired_t_test: need at least two differences");
  }
  const double m = mean_of(diffs);
  const double sd = sample_sd(diffs);
  if (sd == 0.0) {
    if (m == 0.0) {
      return 1.0;
    }
    switch (tail) {
      case TTail::greater:
        return m > 0.0 ? 0.0 : 1.0;
      case TTail::less:
        return m < 0.0 ? 0.0 : 1.0;
      case TTail::two_sided:
        return 0.0;
    }
  }
  const double n = static_cast<double>(diffs.size());
  const double t = m / (sd / std::sqrt(n));
  const double df = n - 1.0;
  switch (tail) {
    case TTail::greater:
      return 1.0 - student_t_cdf(t, df);
    case TTail::less:
      return student_t_cdf(t, df);
    case TTail::two_sided:
      return 2.0 * (1.0 - student_t_cdf(std::fabs(t), df));
  }
  return 1.0;
}

double rmse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("rmse: need two equal-length nonempty vectors");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += (a[i] - b[i]) * (a[i] - b[i]);
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

DivergenceResult loss_divergence_monitor(std::span<const double> losses, int window,
                                         double factor) {
  if (window < 1) {
    throw std::invalid_argument("divergence: window must be >= 1");
  }
  if (!(factor >= 1.0)) {
    throw std::invalid_argument("divergence: factor must be >= 1");
  }
  DivergenceResult res;
  if (losses.size() < static_cast<std::size_t>(window)) {
    return res;
  }
  double best = std::numeric_limits<double>::infinity();
  double rolling = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    rolling += losses[i];
    if (i >= static_cast<std::size_t>(window)) {
      rolling -= losses[i - window];
    }
    if (i + 1 < static_cast<std::size_t>(window)) {
      continue;
    }
    const double mean_w = rolling / static_cast<double>(window);
    if (mean_w > factor * best) {
      res.flagged = true;
      res.first_round = static_cast<int>(i);
      return res;
    }
    best = std::min(best, mean_w);
  }
  return res;
}

namespace {

std::vector<double> midranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return v[a] < v[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) {
      ++j;
    }
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t s = i; s <= j; ++s) {
      ranks[order[s]] = r;
    }
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("spearman: need two equal-length samples of size >= 2");
  }
  const auto ra = midranks(a);
  const auto rb = midranks(b);
  const double ma = mean_of(ra);
  const double mb = mean_of(rb);
  double num = 0.0;
  double da = 0.0;
  double db = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  if (da == 0.0 || db == 0.0) {
    return 0.0;
  }
  return num / std::sqrt(da * db);
}

}  // namespace fedscore
