#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "ifsd/error.hpp"
#include "ifsd/flow_model.hpp"

namespace ifsd {

inline constexpr DurationNs kDefaultActiveTimeout = 300 * kNanosPerSecond;

enum class OverlapClass { fully_contained, partial_overlap };

inline std::string_view to_string(OverlapClass c) {
    return c == OverlapClass::fully_contained ? "fully_contained" : "partial_overlap";
}

inline std::optional<OverlapClass> parse_overlap_class(std::string_view s) {
    if (s == "fully_contained") return OverlapClass::fully_contained;
    if (s == "partial_overlap") return OverlapClass::partial_overlap;
    return std::nullopt;
}

/// How the window's upper bound is anchored.
///
/// `from_flow_start` ends the window at flow start + active_timeout, so it
/// begins at the O/NO transition and lasts active_timeout - dt_O.
/// `literal_bound` adds that same duration to the flow start instead, which
/// is what the closed-form covering condition writes; it is kept for
/// comparison and yields an empty window whenever dt_O >= active_timeout / 2.
enum class WindowMode { from_flow_start, literal_bound };

struct SplitPoint {
    std::size_t m = 0;
    TimeNs transition_ts = 0;      // end of measurement m
    DurationNs observable_span = 0;  // transition_ts - flow start
};

/// Where `flow` leaves the observable state. Flows with <= m measurements
/// never do and can only act as covering flows.
inline SplitPoint ono_split(const FlowRecord& flow, const ONOSplit& split) {
    if (flow.size() <= split.m)
        throw NeverOffloaded("flow " + flow.flow_id + " has " + std::to_string(flow.size()) +
                             " measurements, needs more than m=" + std::to_string(split.m));
    SplitPoint p;
    p.m = split.m;
    p.transition_ts = flow.measurements[split.m - 1].end_ts();
    p.observable_span = p.transition_ts - flow.start_ts();
    return p;
}

struct CorrelationWindow {
    std::string target_id;
    TimeNs start_ts = 0;
    TimeNs end_ts = 0;
    DurationNs delta_t = 0;

    /// Both inequalities are inclusive: the whole measurement has to fit.
    bool contains(const DelayMeasurement& d) const { return start_ts <= d.start_ts && d.end_ts() <= end_ts; }
};

inline CorrelationWindow correlation_window(const FlowRecord& target, const ONOSplit& split,
                                            DurationNs active_timeout,
                                            WindowMode mode = WindowMode::from_flow_start) {
    const auto p = ono_split(target, split);
    if (active_timeout <= p.observable_span)
        throw EmptyWindow("active timeout does not exceed the observable span of flow " + target.flow_id);
    CorrelationWindow w;
    w.target_id = target.flow_id;
    w.start_ts = p.transition_ts;
    const DurationNs dt = active_timeout - p.observable_span;
    w.end_ts = mode == WindowMode::from_flow_start ? target.start_ts() + active_timeout : target.start_ts() + dt;
    if (w.end_ts <= w.start_ts) throw EmptyWindow("window of flow " + target.flow_id + " is empty");
    w.delta_t = w.end_ts - w.start_ts;
    return w;
}

/// One (target, covering) pair of the correlation space.
struct CoveringMatch {
    std::string target_id;
    std::string covering_id;
    OverlapClass overlap_class = OverlapClass::partial_overlap;
    std::vector<std::size_t> in_window_indices;  // 0-based, observable measurements only
    TimeNs first_in_window_start = 0;

    friend bool operator==(const CoveringMatch&, const CoveringMatch&) = default;
};

/// Test one candidate against a window. Only the candidate's observable
/// measurements (the first min(m, n)) are usable.
inline std::optional<CoveringMatch> match_covering(const CorrelationWindow& window, const FlowRecord& candidate,
                                                   const ONOSplit& split) {
    if (candidate.flow_id == window.target_id) return std::nullopt;
    const std::size_t observable = std::min(split.m, candidate.size());
    CoveringMatch match;
    for (std::size_t i = 0; i < observable; ++i)
        if (window.contains(candidate.measurements[i])) match.in_window_indices.push_back(i);
    if (match.in_window_indices.empty()) return std::nullopt;
    match.target_id = window.target_id;
    match.covering_id = candidate.flow_id;
    match.overlap_class = match.in_window_indices.size() == observable ? OverlapClass::fully_contained
                                                                       : OverlapClass::partial_overlap;
    match.first_in_window_start = candidate.measurements[match.in_window_indices.front()].start_ts;
    return match;
}

/// Ordering of a target's matches: first in-window start, then covering id.
inline void sort_matches(std::vector<CoveringMatch>& matches) {
    std::sort(matches.begin(), matches.end(), [](const CoveringMatch& a, const CoveringMatch& b) {
        if (a.first_in_window_start != b.first_in_window_start)
            return a.first_in_window_start < b.first_in_window_start;
        return a.covering_id < b.covering_id;
    });
}

inline std::vector<CoveringMatch> find_covering(const CorrelationWindow& window,
                                                std::span<const FlowRecord* const> candidates,
                                                const ONOSplit& split) {
    std::vector<CoveringMatch> out;
    for (const FlowRecord* c : candidates)
        if (auto m = match_covering(window, *c, split)) out.push_back(std::move(*m));
    sort_matches(out);
    return out;
}

inline std::vector<CoveringMatch> find_covering(const CorrelationWindow& window, const FlowSet& candidates,
                                                const ONOSplit& split) {
    std::vector<const FlowRecord*> ptrs;
    ptrs.reserve(candidates.size());
    for (const auto& f : candidates.flows()) ptrs.push_back(&f);
    return find_covering(window, ptrs, split);
}

/// Static index over every flow's observable-segment extent
/// [first observable start, last observable end].
///
/// Entries are sorted by extent start; a max-heap-shaped segment tree over
/// extent ends lets an overlap query visit only the subtrees that can hold a
/// hit, so a query costs O(log n + k log n).
class FlowIntervalIndex {
public:
    struct Extent {
        TimeNs start = 0;
        TimeNs end = 0;
        std::size_t flow = 0;  // position in the FlowSet
    };

    FlowIntervalIndex(const FlowSet& flows, const ONOSplit& split) {
        entries_.reserve(flows.size());
        for (std::size_t i = 0; i < flows.size(); ++i) {
            const auto& f = flows.flows()[i];
            const std::size_t observable = std::min(split.m, f.size());
            Extent e{f.start_ts(), f.measurements[0].end_ts(), i};
            for (std::size_t k = 0; k < observable; ++k) e.end = std::max(e.end, f.measurements[k].end_ts());
            entries_.push_back(e);
        }
        std::sort(entries_.begin(), entries_.end(), [](const Extent& a, const Extent& b) {
            return a.start != b.start ? a.start < b.start : a.flow < b.flow;
        });
        leaves_ = 1;
        while (leaves_ < entries_.size()) leaves_ <<= 1;
        max_end_.assign(2 * leaves_, kNoEnd);
        for (std::size_t i = 0; i < entries_.size(); ++i) max_end_[leaves_ + i] = entries_[i].end;
        for (std::size_t n = leaves_ - 1; n >= 1; --n) max_end_[n] = std::max(max_end_[2 * n], max_end_[2 * n + 1]);
    }

    /// Flow positions whose extent intersects [lo, hi], ascending.
    std::vector<std::size_t> overlapping(TimeNs lo, TimeNs hi) const {
        std::vector<std::size_t> out;
        if (entries_.empty()) return out;
        // Only entries starting at or before hi can intersect.
        const auto prefix = static_cast<std::size_t>(
            std::upper_bound(entries_.begin(), entries_.end(), hi,
                             [](TimeNs v, const Extent& e) { return v < e.start; }) -
            entries_.begin());
        collect(1, 0, leaves_, prefix, lo, out);
        std::sort(out.begin(), out.end());
        return out;
    }

    std::size_t size() const { return entries_.size(); }

private:
    static constexpr TimeNs kNoEnd = std::numeric_limits<TimeNs>::min();

    void collect(std::size_t node, std::size_t begin, std::size_t end, std::size_t prefix, TimeNs lo,
                 std::vector<std::size_t>& out) const {
        if (begin >= prefix || max_end_[node] < lo) return;
        if (end - begin == 1) {
            out.push_back(entries_[begin].flow);
            return;
        }
        const std::size_t mid = begin + (end - begin) / 2;
        collect(2 * node, begin, mid, prefix, lo, out);
        collect(2 * node + 1, mid, end, prefix, lo, out);
    }

    std::vector<Extent> entries_;
    std::vector<TimeNs> max_end_;
    std::size_t leaves_ = 1;
};

struct SpaceEntry {
    CorrelationWindow window;
    std::vector<CoveringMatch> matches;

    const std::string& target_id() const { return window.target_id; }
};

/// The correlation space: one entry per eligible target, ordered by target id.
struct CorrelationSpace {
    ONOSplit split;
    DurationNs active_timeout = kDefaultActiveTimeout;
    WindowMode mode = WindowMode::from_flow_start;
    std::vector<SpaceEntry> entries;

    bool empty() const { return entries.empty(); }
    std::size_t pair_count() const {
        std::size_t n = 0;
        for (const auto& e : entries) n += e.matches.size();
        return n;
    }
};

/// Window for `flow` if it can be a target (it reaches the NO state and its
/// window is non-empty).
inline std::optional<CorrelationWindow> target_window(const FlowRecord& flow, const ONOSplit& split,
                                                      DurationNs active_timeout, WindowMode mode) {
    if (flow.size() <= split.m) return std::nullopt;
    try {
        return correlation_window(flow, split, active_timeout, mode);
    } catch (const EmptyWindow&) {
        return std::nullopt;
    }
}

inline CorrelationSpace build_correlation_space(const FlowSet& flows, const ONOSplit& split,
                                                DurationNs active_timeout,
                                                WindowMode mode = WindowMode::from_flow_start,
                                                unsigned threads = 1) {
    CorrelationSpace space;
    space.split = split;
    space.active_timeout = active_timeout;
    space.mode = mode;

    std::vector<CorrelationWindow> windows;
    for (std::size_t pos : flows.order_by_id())
        if (auto w = target_window(flows.flows()[pos], split, active_timeout, mode)) windows.push_back(*w);

    const FlowIntervalIndex index(flows, split);
    space.entries.resize(windows.size());
    auto work = [&](std::size_t begin, std::size_t stride) {
        std::vector<const FlowRecord*> candidates;
        for (std::size_t i = begin; i < windows.size(); i += stride) {
            candidates.clear();
            for (std::size_t pos : index.overlapping(windows[i].start_ts, windows[i].end_ts))
                candidates.push_back(&flows.flows()[pos]);
            space.entries[i].window = windows[i];
            space.entries[i].matches = find_covering(windows[i], candidates, split);
        }
    };
    threads = std::max(1u, threads);
    if (threads == 1 || windows.size() < 2) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    }
    return space;
}

}  // namespace ifsd
