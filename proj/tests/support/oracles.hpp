#pragma once

// Independent reference implementations used to check the library. They
// follow the textbook formulas directly and share no code with src/.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace oracle {

inline std::vector<std::string> tokens(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

/// Okapi BM25 of one document, straight from the formula.
inline double bm25(const std::vector<std::string>& docs, std::size_t doc, const std::string& query, double k1,
                   double b) {
    std::vector<std::vector<std::string>> toks;
    double total = 0;
    for (const auto& d : docs) {
        toks.push_back(tokens(d));
        total += static_cast<double>(toks.back().size());
    }
    const double n = static_cast<double>(docs.size());
    const double avgdl = total / n;
    const double dl = static_cast<double>(toks[doc].size());
    double score = 0;
    for (const auto& term : tokens(query)) {
        double df = 0;
        for (const auto& t : toks)
            if (std::find(t.begin(), t.end(), term) != t.end()) df += 1;
        const double tf = static_cast<double>(std::count(toks[doc].begin(), toks[doc].end(), term));
        if (tf == 0) continue;
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
    }
    return score;
}

/// DCG / IDCG with 1-based ranks and log2(i + 1) discounts; -1 for the
/// excluded case (no poison available).
inline double ndcg(const std::vector<bool>& gains, std::size_t k, std::size_t p_q) {
    if (p_q == 0 || k == 0) return -1.0;
    double dcg = 0;
    for (std::size_t i = 1; i <= std::min(k, gains.size()); ++i)
        if (gains[i - 1]) dcg += 1.0 / std::log2(static_cast<double>(i) + 1.0);
    double idcg = 0;
    for (std::size_t i = 1; i <= std::min(k, p_q); ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 1.0);
    return dcg / idcg;
}

struct TTest {
    double mean = 0, se = 0, t = 0, p = 0, lo = 0, hi = 0;
};

/// Paired t-test via Boost's Student-t distribution.
inline TTest paired(const std::vector<double>& before, const std::vector<double>& after) {
    const std::size_t n = before.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = after[i] - before[i];
    TTest r;
    for (double x : d) r.mean += x;
    r.mean /= static_cast<double>(n);
    double ss = 0;
    for (double x : d) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
    r.t = r.mean / r.se;
    boost::math::students_t dist(static_cast<double>(n - 1));
    r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
    const double crit = boost::math::quantile(dist, 0.975);
    r.lo = r.mean - crit * r.se;
    r.hi = r.mean + crit * r.se;
    return r;
}

}  // namespace oracle
