#pragma once

// Slow, direct reimplementations used as test oracles. Nothing here calls
// into the library's own statistics or interval code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "ifsd/flow_model.hpp"

namespace oracle {

// Type-7 quantile by direct sort.
inline double quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

// Robust-z flags with the IQR fallback when MAD is zero.
inline std::vector<bool> robust_z_flags(const std::vector<double>& x, double z = 3.5, double k = 1.5) {
    std::vector<bool> f(x.size(), false);
    const double med = median(x);
    std::vector<double> dev;
    for (double v : x) dev.push_back(std::fabs(v - med));
    const double mad = median(dev);
    if (mad > 0) {
        for (std::size_t i = 0; i < x.size(); ++i) f[i] = 0.6745 * (x[i] - med) / mad > z;
        return f;
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == med; })) return f;
    const double q1 = quantile(x, 0.25), q3 = quantile(x, 0.75);
    for (std::size_t i = 0; i < x.size(); ++i) f[i] = x[i] > q3 + k * (q3 - q1);
    return f;
}

// Inclusive index runs of length >= min_run.
inline std::vector<std::pair<std::size_t, std::size_t>> runs(const std::vector<bool>& f, std::size_t min_run) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < f.size();) {
        if (!f[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < f.size() && f[j + 1]) ++j;
        if (j - i + 1 >= min_run) out.emplace_back(i, j);
        i = j + 1;
    }
    return out;
}

// One covering pair as the brute force sees it.
struct Pair {
    std::string target, covering;
    bool full = false;
    std::vector<std::size_t> idx;

    friend bool operator==(const Pair&, const Pair&) = default;
    friend bool operator<(const Pair& a, const Pair& b) {
        return std::tie(a.target, a.covering) < std::tie(b.target, b.covering);
    }
};

// O(n^2) enumeration straight from the definitions: a target is any flow
// with more than m measurements; its window runs from the end of measurement
// m to flow start + active timeout; a covering flow contributes each of its
// first min(m, n) measurements lying wholly inside the window.
inline std::vector<Pair> covering_pairs(const std::vector<ifsd::FlowRecord>& flows, std::size_t m,
                                        std::int64_t active_timeout) {
    std::vector<Pair> out;
    for (const auto& t : flows) {
        if (t.measurements.size() <= m) continue;
        const auto lo = t.measurements[m - 1].start_ts + t.measurements[m - 1].duration;
        const auto hi = t.measurements.front().start_ts + active_timeout;
        if (hi <= lo) continue;
        for (const auto& c : flows) {
            if (c.flow_id == t.flow_id) continue;
            const auto obs = std::min(m, c.measurements.size());
            Pair p{t.flow_id, c.flow_id, false, {}};
            for (std::size_t i = 0; i < obs; ++i) {
                const auto& x = c.measurements[i];
                if (x.start_ts >= lo && x.start_ts + x.duration <= hi) p.idx.push_back(i);
            }
            if (p.idx.empty()) continue;
            p.full = p.idx.size() == obs;
            out.push_back(std::move(p));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// AUROC as the fraction of (positive, negative) pairs ranked correctly,
// ties counting one half.
inline double auroc(const std::vector<double>& s, const std::vector<int>& y) {
    double good = 0, total = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[i] == 1 && y[j] == 0) {
                total += 1;
                good += s[i] > s[j] ? 1 : s[i] == s[j] ? 0.5 : 0;
            }
    return good / total;
}

}  // namespace oracle
