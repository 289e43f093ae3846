#pragma once

#include <functional>
#include <span>
#include <vector>

namespace wikitox::stats {

double mean(std::span<const double> xs);
// Unbiased (n - 1) sample variance; 0 for fewer than two values.
double sample_variance(std::span<const double> xs);

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p_value = 1.0;  // two-sided
};

// Two-sample unequal-variance t-test. When both groups have zero variance the
// p-value is 1 if the means coincide and 0 otherwise.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

// Linear-interpolation quantile (R type 7) of an unsorted sample, q in [0, 1].
double quantile(std::vector<double> xs, double q);

// Survival function of the Kolmogorov distribution, P(sqrt(n) D > lambda) asymptotically.
double kolmogorov_survival(double lambda);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// One-sample Kolmogorov-Smirnov test against a continuous CDF.
KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf);

}  // namespace wikitox::stats
