#include "ragattack/stats.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "ragattack/errors.hpp"

namespace ragattack {

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw InvalidInputError("incomplete_beta needs a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
    if (df <= 0.0) throw InvalidInputError("degrees of freedom must be positive");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double x = df / (df + t * t);
    const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, x);
    return t > 0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidInputError("quantile probability must be in (0, 1)");
    if (p == 0.5) return 0.0;
    // Bracket, then bisect; the CDF is monotone so this always converges.
    double lo = -1.0, hi = 1.0;
    while (student_t_cdf(lo, df) > p) lo *= 2.0;
    while (student_t_cdf(hi, df) < p) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-14 * std::max(1.0, std::fabs(hi)); ++i) {
        const double mid = 0.5 * (lo + hi);
        (student_t_cdf(mid, df) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

PairedStats paired_ttest(std::span<const double> before, std::span<const double> after) {
    if (before.size() != after.size())
        throw InvalidInputError("paired samples differ in length: " + std::to_string(before.size()) + " vs " +
                                std::to_string(after.size()));
    if (before.size() < 2) throw InvalidInputError("paired t-test needs n >= 2");
    const auto n = static_cast<Eigen::Index>(before.size());
    const Eigen::ArrayXd d = Eigen::Map<const Eigen::ArrayXd>(after.data(), n) -
                             Eigen::Map<const Eigen::ArrayXd>(before.data(), n);

    PairedStats s;
    s.n = before.size();
    s.mean_diff = d.mean();
    const double var = (d - s.mean_diff).square().sum() / static_cast<double>(n - 1);
    s.std_error = std::sqrt(var / static_cast<double>(n));
    const double df = static_cast<double>(n - 1);
    if (s.std_error == 0.0) {
        s.degenerate = true;
        s.ci_low = s.ci_high = s.mean_diff;
        if (s.mean_diff == 0.0) {
            s.t_stat = 0.0;
            s.p_value = 1.0;
        } else {
            s.t_stat = std::copysign(std::numeric_limits<double>::infinity(), s.mean_diff);
            s.p_value = 0.0;
        }
        return s;
    }
    s.t_stat = s.mean_diff / s.std_error;
    s.p_value = std::min(1.0, 2.0 * student_t_cdf(-std::fabs(s.t_stat), df));
    const double t_crit = student_t_quantile(0.975, df);
    s.ci_low = s.mean_diff - t_crit * s.std_error;
    s.ci_high = s.mean_diff + t_crit * s.std_error;
    return s;
}

nlohmann::json to_json(const PairedStats& s) {
    nlohmann::json t = std::isfinite(s.t_stat) ? nlohmann::json(s.t_stat) : nlohmann::json(nullptr);
    return {{"mean_diff", s.mean_diff}, {"std_error", s.std_error}, {"ci95", {s.ci_low, s.ci_high}},
            {"t_stat", t},          {"p_value", s.p_value},     {"n", s.n},
            {"degenerate", s.degenerate}};
}

}  // namespace ragattack
