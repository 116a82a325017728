#pragma once

#include <cstddef>
#include <span>

#include <nlohmann/json.hpp>

namespace ragattack {

struct PairedStats {
    double mean_diff = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    /// Infinite when degenerate with a nonzero mean difference.
    double t_stat = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    /// Zero variance in the differences: p is 0 or 1 by rule.
    bool degenerate = false;
};

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);
/// Student-t CDF with `df` degrees of freedom.
double student_t_cdf(double t, double df);
/// Inverse of student_t_cdf for p in (0, 1).
double student_t_quantile(double p, double df);

/// Two-sided paired t-test on d_i = after_i - before_i with sample standard
/// deviation. Throws InvalidInputError on a length mismatch or n < 2.
PairedStats paired_ttest(std::span<const double> before, std::span<const double> after);

nlohmann::json to_json(const PairedStats& s);

}  // namespace ragattack
