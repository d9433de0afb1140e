#pragma once

#include <cstdint>
#include <span>

namespace foleygram {

double mean(std::span<const double> x);
double pearson(std::span<const double> x, std::span<const double> y);

/// One-sided Mann-Whitney U test (normal approximation with tie correction):
/// p-value for the alternative "x tends to be smaller than y".
double mann_whitney_less_p(std::span<const double> x, std::span<const double> y);

/// P[X >= k] for X ~ Binomial(n, p).
double binomial_upper_tail(std::int64_t k, std::int64_t n, double p);

} // namespace foleygram
