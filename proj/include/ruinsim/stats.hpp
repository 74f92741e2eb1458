#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ruinsim::stats {

double normal_cdf(double x, double mean = 0.0, double sd = 1.0);

/// sup_x |F_n(x) - F(x)|.
double ks_one_sample(std::vector<double> sample, const std::function<double(double)>& cdf);

/// sup_x |F_n(x) - G_m(x)|; ties handled by advancing through equal values.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Asymptotic Kolmogorov quantile c with P(K > c) = level (1.6276 at 0.01).
double kolmogorov_quantile(double level);

/// One-sample critical value c / sqrt(n).
double ks_critical(double level, double n);

/// Two-sample critical value c sqrt((n + m) / (n m)).
double ks_critical_two(double level, double n, double m);

/// Dvoretzky-Kiefer-Wolfowitz band half-width sqrt(log(2 / level) / (2n)).
double dkw_band(double level, double n);

/// Upper quantile of chi-square with `dof` degrees of freedom.
double chi2_quantile(double level, double dof);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(std::span<const double> xs);

}  // namespace ruinsim::stats
