#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ifsd/correlation.hpp"
#include "ifsd/detail/stats.hpp"
#include "ifsd/detail/text.hpp"
#include "ifsd/error.hpp"
#include "ifsd/sd_labeling.hpp"

namespace ifsd {

/// Empirical distribution summary. Quantiles use linear interpolation.
struct DistSummary {
    std::size_t count = 0;
    double mean = 0, median = 0, p10 = 0, p25 = 0, p75 = 0, p90 = 0, min = 0, max = 0;

    friend bool operator==(const DistSummary&, const DistSummary&) = default;
};

inline DistSummary summarize(std::span<const double> values) {
    DistSummary s;
    if (values.empty()) return s;
    auto sorted = detail::sorted_copy(values);
    s.count = sorted.size();
    s.mean = detail::mean(values);
    s.median = detail::quantile_sorted(sorted, 0.5);
    s.p10 = detail::quantile_sorted(sorted, 0.10);
    s.p25 = detail::quantile_sorted(sorted, 0.25);
    s.p75 = detail::quantile_sorted(sorted, 0.75);
    s.p90 = detail::quantile_sorted(sorted, 0.90);
    s.min = sorted.front();
    s.max = sorted.back();
    return s;
}

/// Lookup of labeled flows by id.
class LabelIndex {
public:
    explicit LabelIndex(const std::vector<LabeledFlow>& labeled) {
        for (const auto& lf : labeled) by_id_.emplace(lf.flow.flow_id, &lf);
    }

    const LabeledFlow& at(const std::string& id) const {
        auto it = by_id_.find(id);
        if (it == by_id_.end()) throw ConstraintViolation("no labels for flow '" + id + "'");
        return *it->second;
    }

    bool has_observable_sd(const std::string& id) const {
        const auto& lf = at(id);
        return std::any_of(lf.events.begin(), lf.events.end(), [&](const SDEvent& e) { return !lf.in_no_segment(e); });
    }

private:
    std::unordered_map<std::string, const LabeledFlow*> by_id_;
};

// ---------------------------------------------------------------------------
// Covering counts

struct TargetCount {
    std::string target_id;
    std::size_t all = 0;
    std::size_t sd_only = 0;
};

struct CountStats {
    DistSummary all;
    DistSummary sd_only;
    std::vector<TargetCount> per_target;
};

/// Per target: how many covering flows, and how many of those show an SD
/// event in their observable segment.
inline CountStats covering_count_stats(const CorrelationSpace& space, const std::vector<LabeledFlow>& labeled) {
    if (space.empty()) throw EmptyInput("correlation space has no targets");
    const LabelIndex labels(labeled);
    CountStats out;
    std::vector<double> all, sd;
    for (const auto& entry : space.entries) {
        TargetCount tc{entry.target_id(), entry.matches.size(), 0};
        for (const auto& m : entry.matches)
            if (labels.has_observable_sd(m.covering_id)) ++tc.sd_only;
        all.push_back(static_cast<double>(tc.all));
        sd.push_back(static_cast<double>(tc.sd_only));
        out.per_target.push_back(std::move(tc));
    }
    out.all = summarize(all);
    out.sd_only = summarize(sd);
    return out;
}

// ---------------------------------------------------------------------------
// Timeliness

struct TargetTimeliness {
    std::string target_id;
    std::optional<double> generic_s;
    std::optional<double> sd_first_s;
};

struct TimelinessStats {
    DistSummary generic;   // seconds
    DistSummary sd_first;  // seconds
    std::size_t excluded_generic = 0;
    std::size_t excluded_sd_first = 0;
    std::vector<TargetTimeliness> per_target;
};

/// Delay from the window start to the first in-window measurement of any
/// covering flow, and of any SD-bearing covering flow. Targets without such a
/// covering flow are left out of the respective summary and counted.
inline TimelinessStats time_to_first_covering(const CorrelationSpace& space,
                                              const std::vector<LabeledFlow>& labeled) {
    if (space.empty()) throw EmptyInput("correlation space has no targets");
    const LabelIndex labels(labeled);
    TimelinessStats out;
    std::vector<double> generic, sd_first;
    for (const auto& entry : space.entries) {
        TargetTimeliness row{entry.target_id(), std::nullopt, std::nullopt};
        std::optional<TimeNs> first, first_sd;
        for (const auto& m : entry.matches) {
            if (!first || m.first_in_window_start < *first) first = m.first_in_window_start;
            if ((!first_sd || m.first_in_window_start < *first_sd) && labels.has_observable_sd(m.covering_id))
                first_sd = m.first_in_window_start;
        }
        if (first) {
            row.generic_s = to_seconds(*first - entry.window.start_ts);
            generic.push_back(*row.generic_s);
        } else {
            ++out.excluded_generic;
        }
        if (first_sd) {
            row.sd_first_s = to_seconds(*first_sd - entry.window.start_ts);
            sd_first.push_back(*row.sd_first_s);
        } else {
            ++out.excluded_sd_first;
        }
        out.per_target.push_back(std::move(row));
    }
    out.generic = summarize(generic);
    out.sd_first = summarize(sd_first);
    return out;
}

// ---------------------------------------------------------------------------
// Alignment

/// Which pair represents a target's best alignment.
///
/// `min_magnitude` picks the smallest |offset| keeping its sign, ties going to
/// the negative (earlier) offset. `signed_minimum` picks the smallest signed
/// offset.
enum class AlignmentRule { min_magnitude, signed_minimum };

struct AlignmentRecord {
    std::string target_id;
    DurationNs best_offset = 0;  // covering SD center - target SD center
    std::size_t pair_count = 0;
};

struct AlignmentStats {
    std::vector<AlignmentRecord> records;
    DistSummary summary;        // seconds
    std::size_t excluded = 0;   // targets with NO-segment SD but no covering SD pair
};

/// True when `candidate` should replace `best` under `rule`.
inline bool better_alignment(DurationNs candidate, DurationNs best, AlignmentRule rule) {
    if (rule == AlignmentRule::signed_minimum) return candidate < best;
    const auto ca = std::llabs(candidate), ba = std::llabs(best);
    return ca < ba || (ca == ba && candidate < best);
}

/// For each target with an SD event in its NO segment, the best-aligned pair
/// among all (target NO-segment SD, covering observable-segment SD) pairs.
inline AlignmentStats best_sd_alignment(const CorrelationSpace& space, const std::vector<LabeledFlow>& labeled,
                                        AlignmentRule rule = AlignmentRule::min_magnitude) {
    const LabelIndex labels(labeled);
    AlignmentStats out;
    std::vector<double> offsets;
    for (const auto& entry : space.entries) {
        const auto& target = labels.at(entry.target_id());
        if (target.no_segment_events.empty()) continue;
        AlignmentRecord rec{entry.target_id(), 0, 0};
        for (const auto& m : entry.matches) {
            const auto covering_events = labels.at(m.covering_id).observable_events();
            for (const auto& te : target.no_segment_events) {
                for (const auto& ce : covering_events) {
                    const DurationNs offset = ce.center_ts - te.center_ts;
                    if (rec.pair_count == 0 || better_alignment(offset, rec.best_offset, rule)) rec.best_offset = offset;
                    ++rec.pair_count;
                }
            }
        }
        if (rec.pair_count == 0) {
            ++out.excluded;
            continue;
        }
        offsets.push_back(to_seconds(rec.best_offset));
        out.records.push_back(std::move(rec));
    }
    out.summary = summarize(offsets);
    return out;
}

// ---------------------------------------------------------------------------
// Reports

struct StatsReport {
    std::optional<CountStats> counts;
    std::optional<TimelinessStats> timeliness;
    std::optional<AlignmentStats> alignment;
};

inline constexpr const char* kSummaryHeader = "metric,count,mean,median,p10,p25,p75,p90,min,max,excluded";

namespace detail {

inline void summary_row(std::ostream& out, const std::string& name, const DistSummary& s, std::size_t excluded) {
    if (s.count == 0) return;
    out << name << ',' << s.count;
    for (double v : {s.mean, s.median, s.p10, s.p25, s.p75, s.p90, s.min, s.max}) out << ',' << format_double(v);
    out << ',' << excluded << '\n';
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

inline std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace detail

/// Write plot-ready CSV tables into `dir`: a percentile summary and a raw
/// per-target table for every statistic present in `report`. Summaries with
/// no values produce header-only files.
inline void emit_report(const StatsReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    if (report.counts) {
        const auto& c = *report.counts;
        auto s = detail::open_out(dir / "counts_summary.csv");
        s << kSummaryHeader << '\n';
        detail::summary_row(s, "all", c.all, 0);
        detail::summary_row(s, "sd_only", c.sd_only, 0);
        auto t = detail::open_out(dir / "counts_per_target.csv");
        t << "target_id,all,sd_only\n";
        for (const auto& r : c.per_target) t << r.target_id << ',' << r.all << ',' << r.sd_only << '\n';
        if (!s || !t) throw IoError("failed writing count report in " + dir.string());
    }
    if (report.timeliness) {
        const auto& c = *report.timeliness;
        auto s = detail::open_out(dir / "timeliness_summary.csv");
        s << kSummaryHeader << '\n';
        detail::summary_row(s, "generic_s", c.generic, c.excluded_generic);
        detail::summary_row(s, "sd_first_s", c.sd_first, c.excluded_sd_first);
        auto t = detail::open_out(dir / "timeliness_per_target.csv");
        t << "target_id,generic_s,sd_first_s\n";
        for (const auto& r : c.per_target)
            t << r.target_id << ',' << detail::opt_cell(r.generic_s) << ',' << detail::opt_cell(r.sd_first_s) << '\n';
        if (!s || !t) throw IoError("failed writing timeliness report in " + dir.string());
    }
    if (report.alignment) {
        const auto& c = *report.alignment;
        auto s = detail::open_out(dir / "alignment_summary.csv");
        s << kSummaryHeader << '\n';
        detail::summary_row(s, "best_offset_s", c.summary, c.excluded);
        auto t = detail::open_out(dir / "alignment_per_target.csv");
        t << "target_id,best_offset_ns,best_offset_s,pair_count\n";
        for (const auto& r : c.records)
            t << r.target_id << ',' << r.best_offset << ',' << detail::format_double(to_seconds(r.best_offset)) << ','
              << r.pair_count << '\n';
        if (!s || !t) throw IoError("failed writing alignment report in " + dir.string());
    }
}

/// Parse a summary table written by emit_report, keyed by metric name.
inline std::map<std::string, DistSummary> read_summary_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::map<std::string, DistSummary> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1) {
            if (detail::trim_cr(line) != kSummaryHeader) throw ParseError(lineno, "unexpected summary header");
            continue;
        }
        auto f = detail::split(detail::trim_cr(line), ',');
        if (f.size() != 11) throw ParseError(lineno, "expected 11 fields");
        DistSummary s;
        auto count = detail::parse_int(f[1]);
        if (!count || *count < 0) throw ParseError(lineno, "bad count");
        s.count = static_cast<std::size_t>(*count);
        double* slots[] = {&s.mean, &s.median, &s.p10, &s.p25, &s.p75, &s.p90, &s.min, &s.max};
        for (std::size_t i = 0; i < 8; ++i) {
            auto v = detail::parse_double(f[2 + i]);
            if (!v) throw ParseError(lineno, "bad number '" + std::string(f[2 + i]) + "'");
            *slots[i] = *v;
        }
        out.emplace(std::string(f[0]), s);
    }
    return out;
}

}  // namespace ifsd
