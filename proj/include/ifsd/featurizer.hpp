#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ifsd/correlation.hpp"
#include "ifsd/detail/stats.hpp"
#include "ifsd/error.hpp"
#include "ifsd/random.hpp"
#include "ifsd/sd_labeling.hpp"

namespace ifsd {

/// Scalar features per block, before the raw delay/jitter values.
inline constexpr std::size_t kScalarFeatures = 14;
inline constexpr std::size_t kDefaultCoveringSlots = 30;

/// Total width of a feature row:
///   intra block   14 + 2m + A + C
///   K covering    K * (14 + 2m)
///   app counts    A
constexpr std::size_t feature_width(std::size_t m, std::size_t k, std::size_t app_size, std::size_t conn_size) {
    return (kScalarFeatures + 2 * m + app_size + conn_size) + k * (kScalarFeatures + 2 * m) + app_size;
}

enum class ColumnGroup { intra, covering, app_count };

inline std::string_view to_string(ColumnGroup g) {
    switch (g) {
        case ColumnGroup::intra: return "intra";
        case ColumnGroup::covering: return "covering";
        case ColumnGroup::app_count: return "app_count";
    }
    return "?";
}

/// Covering-slot columns start with "cov_", per-app covering counts with
/// "appcnt_"; everything else describes the target itself.
inline ColumnGroup column_group(std::string_view name) {
    if (name.starts_with("cov_")) return ColumnGroup::covering;
    if (name.starts_with("appcnt_")) return ColumnGroup::app_count;
    return ColumnGroup::intra;
}

/// Names of the trailing non-feature columns of a matrix file.
inline const std::vector<std::string>& label_columns() {
    static const std::vector<std::string> cols{"target_id",     "label_sd",        "sd_count",
                                               "longest_len_s", "longest_start_s", "longest_end_s"};
    return cols;
}

struct FeatureSchema {
    std::size_t m = 10;
    std::size_t k = kDefaultCoveringSlots;
    Taxonomy taxonomy;
    std::vector<std::string> columns;

    std::size_t app_size() const { return taxonomy.app_size(); }
    std::size_t conn_size() const { return taxonomy.conn_encoding_size(); }
    std::size_t intra_width() const { return kScalarFeatures + 2 * m + app_size() + conn_size(); }
    std::size_t covering_width() const { return kScalarFeatures + 2 * m; }
    std::size_t total_width() const { return feature_width(m, k, app_size(), conn_size()); }
};

namespace detail {

inline void stat_names(std::vector<std::string>& out, const std::string& prefix) {
    for (const char* ch : {"d", "j"})
        for (const char* st : {"mean", "std", "min", "max", "median"})
            out.push_back(prefix + ch + "_" + st + "_ms");
}

inline void raw_names(std::vector<std::string>& out, const std::string& prefix, std::size_t m) {
    for (std::size_t i = 1; i <= m; ++i) out.push_back(prefix + "d_" + std::to_string(i) + "_ms");
    // j_1 is a zero pad so the jitter block lines up with the delay block.
    for (std::size_t i = 1; i <= m; ++i) out.push_back(prefix + "j_" + std::to_string(i) + "_ms");
}

inline std::string slot_prefix(std::size_t slot, std::size_t k) {
    const auto width = std::max<std::size_t>(std::to_string(k).size(), 2);
    auto digits = std::to_string(slot);
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return "cov_" + digits + "_";
}

}  // namespace detail

inline FeatureSchema make_schema(std::size_t m, std::size_t k, const Taxonomy& taxonomy = {}) {
    if (m < 1) throw ConfigError("m must be >= 1");
    if (k < 1) throw ConfigError("K must be >= 1");
    FeatureSchema s;
    s.m = m;
    s.k = k;
    s.taxonomy = taxonomy;
    auto& c = s.columns;
    detail::stat_names(c, "");
    for (const char* n : {"sd_count_o", "sd_total_o_ms", "split_sd_o_ms", "o_duration_ms"}) c.push_back(n);
    detail::raw_names(c, "", m);
    for (const auto& a : taxonomy.app_types) c.push_back("app_" + a);
    if (taxonomy.conn_types.size() == 2) {
        c.push_back("conn_" + taxonomy.conn_types[1]);
    } else {
        for (const auto& t : taxonomy.conn_types) c.push_back("conn_" + t);
    }
    for (std::size_t slot = 1; slot <= k; ++slot) {
        const auto p = detail::slot_prefix(slot, k);
        detail::stat_names(c, p);
        for (const char* n : {"o_duration_ms", "sd_count_o", "rel_start_ms", "missing"}) c.push_back(p + n);
        detail::raw_names(c, p, m);
    }
    for (const auto& a : taxonomy.app_types) c.push_back("appcnt_" + a);
    return s;
}

/// Regression targets derived from NO-segment SD events, in seconds relative
/// to the window start.
struct RegressionTargets {
    double sd_count = 0;
    double longest_len_s = 0;
    double longest_start_s = 0;
    double longest_end_s = 0;

    friend bool operator==(const RegressionTargets&, const RegressionTargets&) = default;
};

struct FeatureVector {
    std::string target_id;
    std::vector<double> values;
    int label_sd = 0;
    RegressionTargets targets;

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

namespace detail {

struct SegmentView {
    std::vector<double> delays_ms;
    std::vector<double> jitters_ms;  // size delays - 1
};

inline SegmentView observable_segment(const FlowRecord& flow, std::size_t m) {
    SegmentView v;
    const std::size_t n = std::min(m, flow.size());
    for (std::size_t i = 0; i < n; ++i) v.delays_ms.push_back(to_millis(flow.measurements[i].duration));
    for (std::size_t i = 1; i < n; ++i)
        v.jitters_ms.push_back(to_millis(std::llabs(flow.measurements[i].duration - flow.measurements[i - 1].duration)));
    return v;
}

inline void push_stats(std::vector<double>& out, const SegmentView& seg) {
    for (const auto* xs : {&seg.delays_ms, &seg.jitters_ms}) {
        auto d = describe(*xs);
        out.insert(out.end(), {d.mean, d.std, d.min, d.max, d.median});
    }
}

inline void push_raw(std::vector<double>& out, const SegmentView& seg, std::size_t m) {
    for (std::size_t i = 0; i < m; ++i) out.push_back(i < seg.delays_ms.size() ? seg.delays_ms[i] : 0.0);
    out.push_back(0.0);
    for (std::size_t i = 1; i < m; ++i) out.push_back(i - 1 < seg.jitters_ms.size() ? seg.jitters_ms[i - 1] : 0.0);
}

inline DurationNs observable_span(const FlowRecord& flow, std::size_t m) {
    const std::size_t n = std::min(m, flow.size());
    return flow.measurements[n - 1].end_ts() - flow.start_ts();
}

/// Distance (ms) of the last observable value below the series' own SD
/// threshold, taking the closer of the delay and jitter channels. Negative
/// means the value is already above threshold; 0 when no threshold exists.
inline double split_sd_proximity(const SegmentView& seg, const SDConfig& cfg) {
    std::optional<double> best;
    for (const auto* xs : {&seg.delays_ms, &seg.jitters_ms}) {
        if (xs->empty()) continue;
        if (auto thr = sd_threshold(*xs, cfg)) {
            const double dist = *thr - xs->back();
            if (!best || dist < *best) best = dist;
        }
    }
    return best.value_or(0.0);
}

}  // namespace detail

/// Features of the target flow itself, from its observable segment only.
inline std::vector<double> intra_features(const LabeledFlow& target, const ONOSplit& split,
                                          const Taxonomy& taxonomy = {}, const SDConfig& sd = {}) {
    const auto& flow = target.flow;
    if (flow.size() <= split.m)
        throw NeverOffloaded("flow " + flow.flow_id + " never leaves the observable state at m=" +
                             std::to_string(split.m));
    const auto seg = detail::observable_segment(flow, split.m);
    std::vector<double> out;
    out.reserve(kScalarFeatures + 2 * split.m + taxonomy.app_size() + taxonomy.conn_encoding_size());
    detail::push_stats(out, seg);
    const auto obs = target.observable_events();
    double total_ms = 0;
    for (const auto& e : obs) total_ms += to_millis(e.length());
    out.push_back(static_cast<double>(obs.size()));
    out.push_back(total_ms);
    out.push_back(detail::split_sd_proximity(seg, sd));
    out.push_back(to_millis(detail::observable_span(flow, split.m)));
    detail::push_raw(out, seg, split.m);

    const auto app = taxonomy.app_index(flow.app_type);
    const auto conn = taxonomy.conn_index(flow.conn_type);
    if (app < 0 || conn < 0) throw SchemaMismatch("flow " + flow.flow_id + " has a category outside the taxonomy");
    for (std::size_t i = 0; i < taxonomy.app_size(); ++i) out.push_back(static_cast<std::ptrdiff_t>(i) == app ? 1.0 : 0.0);
    if (taxonomy.conn_types.size() == 2) {
        out.push_back(conn == 1 ? 1.0 : 0.0);
    } else {
        for (std::size_t i = 0; i < taxonomy.conn_types.size(); ++i)
            out.push_back(static_cast<std::ptrdiff_t>(i) == conn ? 1.0 : 0.0);
    }
    return out;
}

/// One covering slot: delay/jitter statistics, observable span, observable SD
/// count, start relative to the window, missing indicator (0), raw values.
inline std::vector<double> covering_block(const CoveringMatch& match, const LabeledFlow& covering,
                                          const CorrelationWindow& window, const ONOSplit& split) {
    if (match.overlap_class != OverlapClass::fully_contained)
        throw ConstraintViolation("covering flow " + match.covering_id + " only partially overlaps the window");
    const auto& flow = covering.flow;
    const auto seg = detail::observable_segment(flow, split.m);
    std::vector<double> out;
    out.reserve(kScalarFeatures + 2 * split.m);
    detail::push_stats(out, seg);
    out.push_back(to_millis(detail::observable_span(flow, split.m)));
    out.push_back(static_cast<double>(covering.observable_events().size()));
    out.push_back(to_millis(flow.start_ts() - window.start_ts));
    out.push_back(0.0);
    detail::push_raw(out, seg, split.m);
    return out;
}

/// Block written into an empty covering slot: zeros with the missing flag set.
inline std::vector<double> sentinel_block(std::size_t m) {
    std::vector<double> out(kScalarFeatures + 2 * m, 0.0);
    out[kScalarFeatures - 1] = 1.0;
    return out;
}

/// Labels from the target's NO-segment events. The longest event wins, the
/// earliest start breaking ties.
inline std::pair<int, RegressionTargets> sd_targets(const LabeledFlow& target, const CorrelationWindow& window) {
    RegressionTargets t;
    const auto& ev = target.no_segment_events;
    if (ev.empty()) return {0, t};
    const SDEvent* longest = &ev.front();
    for (const auto& e : ev)
        if (e.length() > longest->length() || (e.length() == longest->length() && e.start_ts < longest->start_ts))
            longest = &e;
    t.sd_count = static_cast<double>(ev.size());
    t.longest_len_s = to_seconds(longest->length());
    t.longest_start_s = to_seconds(longest->start_ts - window.start_ts);
    t.longest_end_s = to_seconds(longest->end_ts - window.start_ts);
    return {1, t};
}

/// Rows of the concatenated feature matrix, one per target in the space,
/// ordered by target id.
inline std::vector<FeatureVector> build_matrix(const std::vector<LabeledFlow>& labeled, const CorrelationSpace& space,
                                               const FeatureSchema& schema, const SDConfig& sd = {}) {
    if (schema.m != space.split.m)
        throw SchemaMismatch("schema m=" + std::to_string(schema.m) + " but space m=" + std::to_string(space.split.m));
    if (schema.columns.size() != schema.total_width()) throw SchemaMismatch("schema column list is inconsistent");
    std::unordered_map<std::string, const LabeledFlow*> by_id;
    for (const auto& lf : labeled) by_id.emplace(lf.flow.flow_id, &lf);
    auto label_of = [&](const std::string& id) -> const LabeledFlow& {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw SchemaMismatch("no labeled flow for '" + id + "'");
        return *it->second;
    };

    std::vector<FeatureVector> rows;
    rows.reserve(space.entries.size());
    for (const auto& entry : space.entries) {
        const auto& target = label_of(entry.target_id());
        FeatureVector row;
        row.target_id = entry.target_id();
        row.values = intra_features(target, space.split, schema.taxonomy, sd);

        std::vector<const CoveringMatch*> full;
        std::vector<double> app_counts(schema.app_size(), 0.0);
        for (const auto& m : entry.matches) {
            const auto& cov = label_of(m.covering_id);
            const auto app = schema.taxonomy.app_index(cov.flow.app_type);
            if (app < 0) throw SchemaMismatch("flow " + cov.flow.flow_id + " app_type outside the taxonomy");
            app_counts[static_cast<std::size_t>(app)] += 1.0;
            if (m.overlap_class == OverlapClass::fully_contained) full.push_back(&m);
        }
        std::sort(full.begin(), full.end(), [](const CoveringMatch* a, const CoveringMatch* b) {
            if (a->first_in_window_start != b->first_in_window_start)
                return a->first_in_window_start < b->first_in_window_start;
            return a->covering_id < b->covering_id;
        });
        for (std::size_t slot = 0; slot < schema.k; ++slot) {
            const auto block = slot < full.size()
                                   ? covering_block(*full[slot], label_of(full[slot]->covering_id), entry.window,
                                                    space.split)
                                   : sentinel_block(schema.m);
            row.values.insert(row.values.end(), block.begin(), block.end());
        }
        row.values.insert(row.values.end(), app_counts.begin(), app_counts.end());
        if (row.values.size() != schema.total_width())
            throw SchemaMismatch("row width " + std::to_string(row.values.size()) + " != schema width " +
                                 std::to_string(schema.total_width()));
        std::tie(row.label_sd, row.targets) = sd_targets(target, entry.window);
        rows.push_back(std::move(row));
    }
    return rows;
}

struct TrainTest {
    std::vector<FeatureVector> train;
    std::vector<FeatureVector> test;
};

/// Stratified seeded split: each class contributes round(fraction * n_class)
/// rows to train. With `balance`, each partition is then downsampled to equal
/// class counts. Rows keep their input order within each partition.
inline TrainTest train_test_split(const std::vector<FeatureVector>& rows, double fraction, bool balance,
                                  std::uint64_t seed) {
    if (!(fraction > 0 && fraction < 1)) throw ConfigError("split fraction must be in (0, 1)");
    Rng rng(seed);
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < rows.size(); ++i) by_class[rows[i].label_sd ? 1 : 0].push_back(i);

    std::array<std::vector<std::size_t>, 2> train_idx, test_idx;  // [class]
    for (int c = 0; c < 2; ++c) {
        auto idx = by_class[c];
        rng.shuffle(idx);
        const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
        train_idx[c].assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        test_idx[c].assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    }
    auto assemble = [&](std::array<std::vector<std::size_t>, 2>& part, const char* name) {
        if (balance) {
            const std::size_t keep = std::min(part[0].size(), part[1].size());
            if (keep == 0)
                throw InsufficientData(std::string("no minority-class rows left in the ") + name + " partition");
            for (auto& v : part) v.resize(keep);
        }
        std::vector<std::size_t> all(part[0]);
        all.insert(all.end(), part[1].begin(), part[1].end());
        std::sort(all.begin(), all.end());
        std::vector<FeatureVector> out;
        out.reserve(all.size());
        for (auto i : all) out.push_back(rows[i]);
        return out;
    };
    TrainTest tt;
    tt.train = assemble(train_idx, "train");
    tt.test = assemble(test_idx, "test");
    return tt;
}

}  // namespace ifsd
