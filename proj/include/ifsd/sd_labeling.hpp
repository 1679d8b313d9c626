#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "ifsd/detail/stats.hpp"
#include "ifsd/error.hpp"
#include "ifsd/flow_model.hpp"

namespace ifsd {

enum class SDMethod { robust_z, iqr, union_of_both };
enum class Channel { delay, jitter };
enum class ChannelSelect { delay, jitter, either };

/// Consistency constant of the modified Z-score (MAD to sigma under normality).
inline constexpr double kModifiedZScale = 0.6745;

inline std::string_view to_string(Channel c) { return c == Channel::delay ? "delay" : "jitter"; }

inline std::optional<Channel> parse_channel(std::string_view s) {
    if (s == "delay") return Channel::delay;
    if (s == "jitter") return Channel::jitter;
    return std::nullopt;
}

/// Parameters of the SD detector. Defaults follow the usual modified-Z
/// (3.5) and Tukey fence (1.5) conventions.
struct SDConfig {
    SDMethod method = SDMethod::robust_z;
    double z_threshold = 3.5;
    double iqr_multiplier = 1.5;
    std::size_t min_run = 2;
    ChannelSelect channel = ChannelSelect::delay;

    void validate() const {
        if (!(z_threshold > 0)) throw ConfigError("z_threshold must be > 0");
        if (!(iqr_multiplier > 0)) throw ConfigError("iqr_multiplier must be > 0");
        if (min_run < 1) throw ConfigError("min_run must be >= 1");
    }
};

/// A contiguous run of degraded measurements.
///
/// The span runs from the start of the first flagged measurement to the end
/// of the last one; `first_index`/`last_index` are the 0-based measurement
/// positions in the source flow. For the jitter channel, jitter sample i is
/// attributed to measurement i + 1.
struct SDEvent {
    TimeNs start_ts = 0;
    TimeNs end_ts = 0;
    TimeNs center_ts = 0;
    Channel channel = Channel::delay;
    double peak_score = 0.0;
    std::size_t first_index = 0;
    std::size_t last_index = 0;

    DurationNs length() const { return end_ts - start_ts; }
};

inline TimeNs midpoint(TimeNs start, TimeNs end) { return start + (end - start) / 2; }

/// Per-sample flags and scores for one series.
struct FlagResult {
    std::vector<bool> flags;
    std::vector<double> scores;
    bool iqr_fallback = false;  // robust_z had MAD = 0 and used the IQR rule
};

namespace detail {

struct IqrFence {
    double q3 = 0, iqr = 0, fence = 0;
};

inline IqrFence iqr_fence(std::span<const double> x, double multiplier) {
    if (x.size() < 4) throw SeriesTooShort("IQR rule needs at least 4 samples, got " + std::to_string(x.size()));
    auto s = sorted_copy(x);
    IqrFence f;
    const double q1 = quantile_sorted(s, 0.25);
    f.q3 = quantile_sorted(s, 0.75);
    f.iqr = f.q3 - q1;
    f.fence = f.q3 + multiplier * f.iqr;
    return f;
}

struct MedianMad {
    double median = 0, mad = 0;
};

inline MedianMad median_mad(std::span<const double> x) {
    MedianMad r;
    r.median = median(x);
    std::vector<double> dev(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dev[i] = std::fabs(x[i] - r.median);
    r.mad = median(dev);
    return r;
}

inline void apply_iqr(std::span<const double> x, double multiplier, FlagResult& out) {
    auto f = iqr_fence(x, multiplier);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > f.fence) {
            out.flags[i] = true;
            const double score = f.iqr > 0 ? (x[i] - f.q3) / f.iqr : std::numeric_limits<double>::infinity();
            out.scores[i] = std::max(out.scores[i], score);
        }
    }
}

}  // namespace detail

/// Flag one-sided (upward) outliers in `x` according to `cfg.method`.
///
/// robust_z flags 0.6745 * (x_i - median) / MAD > z_threshold. When MAD is
/// zero but the series is not constant it falls back to the IQR rule and sets
/// `iqr_fallback`. iqr flags x_i > Q3 + k * IQR and needs >= 4 samples.
inline FlagResult flag_series(std::span<const double> x, const SDConfig& cfg) {
    FlagResult out;
    out.flags.assign(x.size(), false);
    out.scores.assign(x.size(), 0.0);
    if (x.empty()) return out;

    const bool want_z = cfg.method != SDMethod::iqr;
    bool want_iqr = cfg.method != SDMethod::robust_z;

    if (want_z) {
        auto mm = detail::median_mad(x);
        if (mm.mad > 0) {
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double z = kModifiedZScale * (x[i] - mm.median) / mm.mad;
                out.scores[i] = z;
                if (z > cfg.z_threshold) out.flags[i] = true;
            }
        } else {
            const bool constant = std::all_of(x.begin(), x.end(), [&](double v) { return v == mm.median; });
            if (constant && !want_iqr) return out;
            out.iqr_fallback = cfg.method == SDMethod::robust_z;
            want_iqr = true;
        }
    }
    if (want_iqr) detail::apply_iqr(x, cfg.iqr_multiplier, out);
    return out;
}

/// Value above which a new sample of this series would be flagged, if the
/// configured rule is defined for it.
inline std::optional<double> sd_threshold(std::span<const double> x, const SDConfig& cfg) {
    if (x.empty()) return std::nullopt;
    std::optional<double> z_thr, iqr_thr;
    bool need_iqr = cfg.method != SDMethod::robust_z;
    if (cfg.method != SDMethod::iqr) {
        auto mm = detail::median_mad(x);
        if (mm.mad > 0)
            z_thr = mm.median + cfg.z_threshold * mm.mad / kModifiedZScale;
        else
            need_iqr = true;
    }
    if (need_iqr && x.size() >= 4) iqr_thr = detail::iqr_fence(x, cfg.iqr_multiplier).fence;
    if (z_thr && iqr_thr) return std::min(*z_thr, *iqr_thr);
    return z_thr ? z_thr : iqr_thr;
}

/// Maximal runs of set flags with length >= min_run, as inclusive index pairs.
inline std::vector<std::pair<std::size_t, std::size_t>> flagged_runs(const std::vector<bool>& flags,
                                                                     std::size_t min_run) {
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    std::size_t i = 0;
    while (i < flags.size()) {
        if (!flags[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < flags.size() && flags[j + 1]) ++j;
        if (j - i + 1 >= min_run) runs.emplace_back(i, j);
        i = j + 1;
    }
    return runs;
}

inline std::vector<double> delay_series(const FlowRecord& flow) {
    std::vector<double> x;
    x.reserve(flow.size());
    for (const auto& m : flow.measurements) x.push_back(static_cast<double>(m.duration));
    return x;
}

inline std::vector<double> jitter_series(const FlowRecord& flow) {
    auto j = jitter_of(flow);
    return std::vector<double>(j.values.begin(), j.values.end());
}

struct SDDetection {
    std::vector<SDEvent> events;
    bool delay_fallback = false;
    bool jitter_fallback = false;
};

namespace detail {

inline void events_for_channel(const FlowRecord& flow, Channel ch, const SDConfig& cfg, SDDetection& out) {
    const auto series = ch == Channel::delay ? delay_series(flow) : jitter_series(flow);
    const auto flagged = flag_series(series, cfg);
    (ch == Channel::delay ? out.delay_fallback : out.jitter_fallback) = flagged.iqr_fallback;
    const std::size_t shift = ch == Channel::delay ? 0 : 1;

    std::vector<SDEvent> events;
    for (auto [a, b] : flagged_runs(flagged.flags, cfg.min_run)) {
        SDEvent e;
        e.channel = ch;
        e.first_index = a + shift;
        e.last_index = b + shift;
        e.start_ts = flow.measurements[e.first_index].start_ts;
        e.end_ts = flow.measurements[e.first_index].end_ts();
        for (std::size_t k = e.first_index; k <= e.last_index; ++k)
            e.end_ts = std::max(e.end_ts, flow.measurements[k].end_ts());
        e.peak_score = *std::max_element(flagged.scores.begin() + static_cast<std::ptrdiff_t>(a),
                                         flagged.scores.begin() + static_cast<std::ptrdiff_t>(b) + 1);
        // Long delays can make a run's span reach past the next run's start.
        if (!events.empty() && e.start_ts <= events.back().end_ts) {
            auto& prev = events.back();
            prev.end_ts = std::max(prev.end_ts, e.end_ts);
            prev.last_index = e.last_index;
            prev.peak_score = std::max(prev.peak_score, e.peak_score);
            prev.center_ts = midpoint(prev.start_ts, prev.end_ts);
            continue;
        }
        e.center_ts = midpoint(e.start_ts, e.end_ts);
        events.push_back(e);
    }
    out.events.insert(out.events.end(), events.begin(), events.end());
}

inline void sort_events(std::vector<SDEvent>& events) {
    std::stable_sort(events.begin(), events.end(), [](const SDEvent& a, const SDEvent& b) {
        if (a.start_ts != b.start_ts) return a.start_ts < b.start_ts;
        return a.channel < b.channel;
    });
}

}  // namespace detail

/// Detect SD events in one flow on the configured channel(s).
inline SDDetection detect_sd_events(const FlowRecord& flow, const SDConfig& cfg) {
    cfg.validate();
    if (flow.measurements.empty()) throw SeriesTooShort("flow " + flow.flow_id + " has no measurements");
    SDDetection out;
    if (cfg.channel != ChannelSelect::jitter) detail::events_for_channel(flow, Channel::delay, cfg, out);
    if (cfg.channel != ChannelSelect::delay) {
        if (flow.size() < 3)
            throw SeriesTooShort("jitter channel needs at least 3 measurements, flow " + flow.flow_id);
        detail::events_for_channel(flow, Channel::jitter, cfg, out);
    }
    detail::sort_events(out.events);
    return out;
}

/// A flow with its detected SD events and the subset that starts in the
/// non-observable segment.
struct LabeledFlow {
    FlowRecord flow;
    std::vector<SDEvent> events;
    std::vector<SDEvent> no_segment_events;
    std::size_t split_m = 10;
    bool iqr_fallback = false;
    std::vector<std::string> annotations;  // per-flow detection errors

    /// An event belongs to the NO segment when its first flagged measurement
    /// comes after measurement m.
    bool in_no_segment(const SDEvent& e) const { return flow.size() > split_m && e.first_index >= split_m; }

    std::vector<SDEvent> observable_events() const {
        std::vector<SDEvent> out;
        for (const auto& e : events)
            if (!in_no_segment(e)) out.push_back(e);
        return out;
    }
};

/// Attach events to `flow` and derive its NO-segment subset.
inline LabeledFlow make_labeled(FlowRecord flow, std::vector<SDEvent> events, const ONOSplit& split) {
    LabeledFlow lf;
    lf.flow = std::move(flow);
    lf.events = std::move(events);
    lf.split_m = split.m;
    for (const auto& e : lf.events)
        if (lf.in_no_segment(e)) lf.no_segment_events.push_back(e);
    return lf;
}

namespace detail {

inline LabeledFlow label_one(const FlowRecord& flow, const SDConfig& cfg, const ONOSplit& split) {
    std::vector<SDEvent> events;
    std::vector<std::string> notes;
    bool fallback = false;
    auto run = [&](ChannelSelect sel) {
        SDConfig c = cfg;
        c.channel = sel;
        try {
            auto det = detect_sd_events(flow, c);
            fallback = fallback || det.delay_fallback || det.jitter_fallback;
            events.insert(events.end(), det.events.begin(), det.events.end());
        } catch (const Error& e) {
            notes.emplace_back(e.what());
        }
    };
    if (cfg.channel == ChannelSelect::either) {
        run(ChannelSelect::delay);
        run(ChannelSelect::jitter);
    } else {
        run(cfg.channel);
    }
    sort_events(events);
    auto lf = make_labeled(flow, std::move(events), split);
    lf.iqr_fallback = fallback;
    lf.annotations = std::move(notes);
    return lf;
}

}  // namespace detail

/// Label every flow; per-flow failures become annotations. Output is ordered
/// by flow_id regardless of `threads`.
inline std::vector<LabeledFlow> label_flowset(const FlowSet& flows, const SDConfig& cfg, const ONOSplit& split,
                                              unsigned threads = 1) {
    cfg.validate();
    const auto order = flows.order_by_id();
    std::vector<LabeledFlow> out(order.size());
    auto work = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < order.size(); i += stride)
            out[i] = detail::label_one(flows.flows()[order[i]], cfg, split);
    };
    threads = std::max(1u, threads);
    if (threads == 1 || order.size() < 2) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    }
    return out;
}

}  // namespace ifsd
