#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace ifsd::detail {

/// Linear-interpolation quantile ("type 7") of an ascending-sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) return 0.0;
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::vector<double> sorted_copy(std::span<const double> xs) {
    std::vector<double> s(xs.begin(), xs.end());
    std::sort(s.begin(), s.end());
    return s;
}

inline double median(std::span<const double> xs) {
    auto s = sorted_copy(xs);
    return quantile_sorted(s, 0.5);
}

inline double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Population standard deviation (divides by n).
inline double stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double mu = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

/// mean, std, min, max, median of a sample; all zero when empty.
struct Describe {
    double mean = 0, std = 0, min = 0, max = 0, median = 0;
};

inline Describe describe(std::span<const double> xs) {
    Describe d;
    if (xs.empty()) return d;
    auto s = sorted_copy(xs);
    d.mean = mean(xs);
    d.std = stddev(xs);
    d.min = s.front();
    d.max = s.back();
    d.median = quantile_sorted(s, 0.5);
    return d;
}

}  // namespace ifsd::detail
