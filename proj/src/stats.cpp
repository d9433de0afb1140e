#include "stats.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace foleygram {

double mean(std::span<const double> x) {
    if (x.empty()) fail(ErrorCode::InvalidArgument, "mean of an empty sequence");
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        fail(ErrorCode::DimensionMismatch, "pearson needs two sequences of equal length >= 2");
    }
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 1e-300 || syy <= 1e-300) {
        fail(ErrorCode::DegenerateVariance, "correlation undefined for a constant sequence");
    }
    return sxy / std::sqrt(sxx * syy);
}

double mann_whitney_less_p(std::span<const double> x, std::span<const double> y) {
    const size_t n1 = x.size();
    const size_t n2 = y.size();
    if (n1 == 0 || n2 == 0) fail(ErrorCode::InvalidArgument, "Mann-Whitney needs two non-empty samples");
    struct Item {
        double value;
        int group;
    };
    std::vector<Item> all;
    all.reserve(n1 + n2);
    for (double v : x) all.push_back({v, 0});
    for (double v : y) all.push_back({v, 1});
    std::sort(all.begin(), all.end(), [](const Item & a, const Item & b) { return a.value < b.value; });

    double rank_sum_x = 0.0;
    double tie_term = 0.0;
    for (size_t i = 0; i < all.size();) {
        size_t j = i;
        while (j < all.size() && all[j].value == all[i].value) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        for (size_t k = i; k < j; ++k)
            if (all[k].group == 0) rank_sum_x += avg_rank;
        i = j;
    }
    const double a = static_cast<double>(n1);
    const double b = static_cast<double>(n2);
    const double u = rank_sum_x - a * (a + 1.0) / 2.0;
    const double mu = a * b / 2.0;
    const double n = a + b;
    const double var = a * b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var <= 0.0) return 0.5;
    // continuity-corrected z for "U small"
    const double z = (u - mu + 0.5) / std::sqrt(var);
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double binomial_upper_tail(std::int64_t k, std::int64_t n, double p) {
    if (n < 0 || p < 0.0 || p > 1.0) fail(ErrorCode::InvalidArgument, "invalid binomial parameters");
    if (k <= 0) return 1.0;
    if (k > n) return 0.0;
    if (p == 1.0) return 1.0;
    double tail = 0.0;
    for (std::int64_t i = k; i <= n; ++i) {
        const double log_term = std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(i) + 1.0) -
                                std::lgamma(static_cast<double>(n - i) + 1.0) +
                                static_cast<double>(i) * std::log(p) + static_cast<double>(n - i) * std::log1p(-p);
        tail += std::exp(log_term);
    }
    return std::min(tail, 1.0);
}

} // namespace foleygram
