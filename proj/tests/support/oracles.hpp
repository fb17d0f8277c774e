#pragma once

// Independent reference computations. These deliberately avoid the library's
// own helpers so that a shared bug cannot make both sides agree.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "vlogvis/neural.hpp"

namespace oracle {

/// Single-pass Pearson over raw bytes in long double.
inline double pearson(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b)
{
  long double n = static_cast<long double>(a.size());
  long double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double x = a[i], y = b[i];
    sa += x;
    sb += y;
    saa += x * x;
    sbb += y * y;
    sab += x * y;
  }
  const long double cov = n * sab - sa * sb;
  const long double va = n * saa - sa * sa;
  const long double vb = n * sbb - sb * sb;
  return static_cast<double>(cov / std::sqrt(va * vb));
}

/// Fleiss' kappa written out term by term from the textbook definition.
inline double fleiss(const std::vector<std::vector<int>>& table, int raters)
{
  const std::size_t N = table.size();
  const std::size_t k = table.front().size();
  long double agree = 0;
  std::vector<long double> share(k, 0);
  for (const auto& row : table) {
    long double pairs = 0;
    for (std::size_t j = 0; j < k; ++j) {
      pairs += static_cast<long double>(row[j]) * (row[j] - 1);
      share[j] += row[j];
    }
    agree += pairs / (static_cast<long double>(raters) * (raters - 1));
  }
  const long double p_bar = agree / N;
  long double p_e = 0;
  for (auto s : share) {
    const long double p = s / (static_cast<long double>(N) * raters);
    p_e += p * p;
  }
  return static_cast<double>((p_bar - p_e) / (1 - p_e));
}

/// Two-tailed Student-t p-value from Boost's CDF.
inline double t_two_tailed(double t, double dof)
{
  boost::math::students_t dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

/// Paired t-test computed from scratch in long double.
inline std::pair<double, double> paired_t(std::span<const double> a, std::span<const double> b)
{
  const std::size_t n = a.size();
  long double mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += static_cast<long double>(a[i]) - b[i];
  mean /= n;
  long double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double d = static_cast<long double>(a[i]) - b[i] - mean;
    ss += d * d;
  }
  const long double sd = std::sqrt(ss / (n - 1));
  const double t = static_cast<double>(mean / (sd / std::sqrt(static_cast<long double>(n))));
  return {t, t_two_tailed(t, static_cast<double>(n - 1))};
}

inline double median(std::vector<double> v)
{
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

// ---- finite differences ------------------------------------------------------------

/// Largest elementwise relative error between analytic gradients and central
/// differences of `loss` over every entry of `params`. Entries where both
/// sides are below `floor` in magnitude are compared against `floor`.
inline double max_gradient_error(const vlogvis::nn::ParamList& params, const vlogvis::nn::ParamList& analytic,
                                 const std::function<double()>& loss, double eps = 1e-5, double floor = 1e-6)
{
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double saved = p[k];
      p[k] = saved + eps;
      const double up = loss();
      p[k] = saved - eps;
      const double down = loss();
      p[k] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[t][k];
      const double err = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), floor});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

} // namespace oracle
