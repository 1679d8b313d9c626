#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ifsd/correlation.hpp"
#include "ifsd/detail/text.hpp"
#include "ifsd/error.hpp"
#include "ifsd/featurizer.hpp"
#include "ifsd/flow_model.hpp"
#include "ifsd/sd_labeling.hpp"
#include "ifsd/version.hpp"

// Text formats. One flow per line in traces:
//
//   flow_id,app_type,conn_type,n,start_1,dur_1,...,start_n,dur_n
//
// Labeled traces append "|events:" and ';'-separated start,end,channel
// triples. Correlation spaces list one pair per line after a '#' parameter
// line. Feature matrices are CSV with a header row.

namespace ifsd {

namespace detail {

inline bool skippable(std::string_view line) { return line.empty() || line.front() == '#'; }

inline FlowRecord parse_flow_fields(std::string_view text, std::size_t lineno) {
    const auto f = split(text, ',');
    if (f.size() < 4) throw ParseError(lineno, "expected at least 4 fields, got " + std::to_string(f.size()));
    FlowRecord flow{std::string(f[0]), std::string(f[1]), std::string(f[2]), {}};
    const auto n = parse_int(f[3]);
    if (!n || *n < 1) throw ParseError(lineno, "measurement count must be a positive integer");
    if (f.size() != 4 + 2 * static_cast<std::size_t>(*n))
        throw ParseError(lineno, "measurement count " + std::to_string(*n) + " does not match " +
                                     std::to_string(f.size() - 4) + " trailing fields");
    flow.measurements.reserve(static_cast<std::size_t>(*n));
    for (std::size_t i = 0; i < static_cast<std::size_t>(*n); ++i) {
        const auto start = parse_int(f[4 + 2 * i]);
        const auto dur = parse_int(f[5 + 2 * i]);
        if (!start || !dur) throw ParseError(lineno, "non-integer measurement field");
        flow.measurements.push_back({*start, *dur});
    }
    return flow;
}

inline void add_checked(FlowSet& set, FlowRecord flow, std::size_t lineno) {
    try {
        set.add(std::move(flow));
    } catch (const InvalidFlow& e) {
        throw ParseError(lineno, e.what());
    } catch (const DuplicateId& e) {
        throw DuplicateId("line " + std::to_string(lineno) + ": " + e.what());
    }
}

inline void write_flow_fields(const FlowRecord& f, std::ostream& out) {
    out << f.flow_id << ',' << f.app_type << ',' << f.conn_type << ',' << f.measurements.size();
    for (const auto& m : f.measurements) out << ',' << m.start_ts << ',' << m.duration;
}

}  // namespace detail

/// Parse a trace. Blank lines and lines starting with '#' are skipped.
inline FlowSet read_trace(std::istream& in, const Taxonomy& taxonomy = {}) {
    FlowSet set(taxonomy);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto text = detail::trim_cr(line);
        if (detail::skippable(text)) continue;
        detail::add_checked(set, detail::parse_flow_fields(text, lineno), lineno);
    }
    if (in.bad()) throw IoError("read failure");
    return set;
}

/// Flows in ascending flow_id order, fixed field order.
inline void write_trace(const FlowSet& flows, std::ostream& out) {
    for (std::size_t pos : flows.order_by_id()) {
        detail::write_flow_fields(flows.flows()[pos], out);
        out << '\n';
    }
    if (!out) throw IoError("write failure");
}

// ---------------------------------------------------------------------------
// Labeled traces

inline constexpr std::string_view kEventsMarker = "|events:";

inline void write_labels(const std::vector<LabeledFlow>& labeled, std::ostream& out) {
    std::vector<const LabeledFlow*> order;
    for (const auto& lf : labeled) order.push_back(&lf);
    std::sort(order.begin(), order.end(),
              [](const LabeledFlow* a, const LabeledFlow* b) { return a->flow.flow_id < b->flow.flow_id; });
    for (const auto* lf : order) {
        detail::write_flow_fields(lf->flow, out);
        out << kEventsMarker;
        for (std::size_t i = 0; i < lf->events.size(); ++i) {
            const auto& e = lf->events[i];
            if (i) out << ';';
            out << e.start_ts << ',' << e.end_ts << ',' << to_string(e.channel);
        }
        out << '\n';
    }
    if (!out) throw IoError("write failure");
}

/// Parse a labeled trace. Measurement indices of each event are recovered
/// from the flow's timestamps; peak scores are not stored and read back as 0.
inline std::vector<LabeledFlow> read_labels(std::istream& in, const ONOSplit& split, const Taxonomy& taxonomy = {}) {
    FlowSet seen(taxonomy);
    std::vector<LabeledFlow> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto text = detail::trim_cr(line);
        if (detail::skippable(text)) continue;
        const auto marker = text.find(kEventsMarker);
        if (marker == std::string_view::npos) throw ParseError(lineno, "missing '|events:' section");
        auto flow = detail::parse_flow_fields(text.substr(0, marker), lineno);
        detail::add_checked(seen, flow, lineno);

        std::vector<SDEvent> events;
        const auto ev_text = text.substr(marker + kEventsMarker.size());
        if (!ev_text.empty()) {
            for (auto item : detail::split(ev_text, ';')) {
                const auto f = detail::split(item, ',');
                if (f.size() != 3) throw ParseError(lineno, "event must be start,end,channel");
                const auto start = detail::parse_int(f[0]);
                const auto end = detail::parse_int(f[1]);
                const auto ch = parse_channel(f[2]);
                if (!start || !end || !ch || *end < *start) throw ParseError(lineno, "bad event '" + std::string(item) + "'");
                SDEvent e;
                e.start_ts = *start;
                e.end_ts = *end;
                e.center_ts = midpoint(*start, *end);
                e.channel = *ch;
                const auto& ms = flow.measurements;
                auto it = std::find_if(ms.begin(), ms.end(), [&](const DelayMeasurement& m) { return m.start_ts == *start; });
                if (it == ms.end()) throw ParseError(lineno, "event start matches no measurement");
                e.first_index = static_cast<std::size_t>(it - ms.begin());
                e.last_index = e.first_index;
                for (std::size_t k = e.first_index; k < ms.size() && ms[k].start_ts <= *end; ++k)
                    if (ms[k].end_ts() == *end) e.last_index = k;
                events.push_back(e);
            }
        }
        out.push_back(make_labeled(std::move(flow), std::move(events), split));
    }
    if (in.bad()) throw IoError("read failure");
    return out;
}

// ---------------------------------------------------------------------------
// Correlation space

inline std::string_view to_string(WindowMode m) {
    return m == WindowMode::from_flow_start ? "from_flow_start" : "literal_bound";
}

/// Parameter line, then `target_id,covering_id,overlap_class,first_idx,last_idx,count`
/// per pair with 1-based measurement indices, targets in id order.
inline void write_space(const CorrelationSpace& space, std::ostream& out) {
    out << "# " << kSpaceFormat << " m=" << space.split.m << " active_timeout_ns=" << space.active_timeout
        << " window=" << to_string(space.mode) << '\n';
    for (const auto& entry : space.entries)
        for (const auto& m : entry.matches)
            out << m.target_id << ',' << m.covering_id << ',' << to_string(m.overlap_class) << ','
                << m.in_window_indices.front() + 1 << ',' << m.in_window_indices.back() + 1 << ','
                << m.in_window_indices.size() << '\n';
    if (!out) throw IoError("write failure");
}

struct SpaceParams {
    ONOSplit split;
    DurationNs active_timeout = kDefaultActiveTimeout;
    WindowMode mode = WindowMode::from_flow_start;
};

/// Parse the parameter line that opens a space file.
inline SpaceParams parse_space_header(std::string_view header) {
    header = detail::trim_cr(header);
    const std::string prefix = "# " + std::string(kSpaceFormat);
    if (!header.starts_with(prefix)) throw ParseError(1, "expected '" + prefix + "' header");
    std::map<std::string, std::string, std::less<>> kv;
    for (auto tok : detail::split(header.substr(prefix.size()), ' ')) {
        const auto eq = tok.find('=');
        if (eq != std::string_view::npos) kv.emplace(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
    }
    const auto m = detail::parse_int(kv["m"]);
    const auto at = detail::parse_int(kv["active_timeout_ns"]);
    if (!m || *m < 1 || !at) throw ParseError(1, "bad space parameters");
    SpaceParams p;
    p.split = ONOSplit(static_cast<std::size_t>(*m));
    p.active_timeout = *at;
    if (kv["window"] == "literal_bound") p.mode = WindowMode::literal_bound;
    else if (kv["window"] != "from_flow_start") throw ParseError(1, "unknown window mode");
    return p;
}

/// Parse a space file against the trace it was built from. Every pair is
/// recomputed from the flows and must agree with the file; targets without
/// pairs are restored from the eligibility rule.
inline CorrelationSpace read_space(std::istream& in, const FlowSet& flows) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "empty space file");
    const auto params = parse_space_header(line);
    CorrelationSpace space;
    space.split = params.split;
    space.active_timeout = params.active_timeout;
    space.mode = params.mode;
    std::unordered_map<std::string, std::size_t> entry_of;
    for (std::size_t pos : flows.order_by_id()) {
        const auto& f = flows.flows()[pos];
        if (auto w = target_window(f, space.split, space.active_timeout, space.mode)) {
            entry_of.emplace(f.flow_id, space.entries.size());
            space.entries.push_back({*w, {}});
        }
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto text = detail::trim_cr(line);
        if (detail::skippable(text)) continue;
        const auto f = detail::split(text, ',');
        if (f.size() != 6) throw ParseError(lineno, "expected 6 fields");
        auto it = entry_of.find(std::string(f[0]));
        if (it == entry_of.end()) throw ParseError(lineno, "'" + std::string(f[0]) + "' is not an eligible target");
        const auto* cov = flows.find(std::string(f[1]));
        if (!cov) throw ParseError(lineno, "unknown covering flow '" + std::string(f[1]) + "'");
        auto& entry = space.entries[it->second];
        auto match = match_covering(entry.window, *cov, space.split);
        const auto cls = parse_overlap_class(f[2]);
        const auto first = detail::parse_int(f[3]), last = detail::parse_int(f[4]), count = detail::parse_int(f[5]);
        if (!cls || !first || !last || !count) throw ParseError(lineno, "malformed pair");
        if (!match || match->overlap_class != *cls ||
            static_cast<std::int64_t>(match->in_window_indices.front() + 1) != *first ||
            static_cast<std::int64_t>(match->in_window_indices.back() + 1) != *last ||
            static_cast<std::int64_t>(match->in_window_indices.size()) != *count)
            throw ParseError(lineno, "pair disagrees with the trace");
        entry.matches.push_back(std::move(*match));
    }
    for (auto& e : space.entries) {
        sort_matches(e.matches);
        for (std::size_t i = 1; i < e.matches.size(); ++i)
            if (e.matches[i].covering_id == e.matches[i - 1].covering_id)
                throw ParseError(0, "duplicate pair for target " + e.target_id());
    }
    return space;
}

// ---------------------------------------------------------------------------
// Feature matrices

inline std::vector<std::string> matrix_header(const FeatureSchema& schema) {
    auto cols = schema.columns;
    cols.insert(cols.end(), label_columns().begin(), label_columns().end());
    return cols;
}

/// Header plus one row per vector, ordered by target id.
inline void write_feature_matrix(const std::vector<FeatureVector>& rows, const FeatureSchema& schema,
                                 std::ostream& out) {
    if (schema.columns.size() != schema.total_width()) throw SchemaMismatch("schema column list is inconsistent");
    for (const auto& r : rows)
        if (r.values.size() != schema.total_width())
            throw SchemaMismatch("row for " + r.target_id + " has width " + std::to_string(r.values.size()) +
                                 ", schema has " + std::to_string(schema.total_width()));
    const auto header = matrix_header(schema);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    std::vector<const FeatureVector*> order;
    for (const auto& r : rows) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(),
                     [](const FeatureVector* a, const FeatureVector* b) { return a->target_id < b->target_id; });
    for (const auto* r : order) {
        for (std::size_t i = 0; i < r->values.size(); ++i) out << (i ? "," : "") << detail::format_double(r->values[i]);
        const auto& t = r->targets;
        out << ',' << r->target_id << ',' << r->label_sd;
        for (double v : {t.sd_count, t.longest_len_s, t.longest_start_s, t.longest_end_s})
            out << ',' << detail::format_double(v);
        out << '\n';
    }
    if (!out) throw IoError("write failure");
}

inline std::vector<FeatureVector> read_feature_matrix(std::istream& in, const FeatureSchema& schema) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "empty matrix file");
    const auto expected = matrix_header(schema);
    const auto header = detail::split(detail::trim_cr(line), ',');
    if (header.size() != expected.size() || !std::equal(header.begin(), header.end(), expected.begin()))
        throw SchemaMismatch("matrix header does not match the schema");
    std::vector<FeatureVector> rows;
    const std::size_t width = schema.total_width();
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto text = detail::trim_cr(line);
        if (text.empty()) continue;
        const auto f = detail::split(text, ',');
        if (f.size() != expected.size()) throw SchemaMismatch("line " + std::to_string(lineno) + ": wrong column count");
        FeatureVector r;
        r.values.reserve(width);
        auto num = [&](std::string_view s) {
            auto v = detail::parse_double(s);
            if (!v) throw ParseError(lineno, "bad number '" + std::string(s) + "'");
            return *v;
        };
        for (std::size_t i = 0; i < width; ++i) r.values.push_back(num(f[i]));
        r.target_id = std::string(f[width]);
        const auto label = detail::parse_int(f[width + 1]);
        if (!label || (*label != 0 && *label != 1)) throw ParseError(lineno, "label_sd must be 0 or 1");
        r.label_sd = static_cast<int>(*label);
        r.targets = {num(f[width + 2]), num(f[width + 3]), num(f[width + 4]), num(f[width + 5])};
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Sidecar listing every matrix column in order after a parameter line.
inline void write_schema(const FeatureSchema& schema, std::ostream& out) {
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "|" : "") + v[i];
        return s;
    };
    out << "# " << kSchemaFormat << " m=" << schema.m << " k=" << schema.k << " app=" << join(schema.taxonomy.app_types)
        << " conn=" << join(schema.taxonomy.conn_types) << " width=" << schema.total_width() << '\n';
    for (const auto& c : matrix_header(schema)) out << c << '\n';
    if (!out) throw IoError("write failure");
}

inline FeatureSchema read_schema(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "empty schema file");
    const auto header = detail::trim_cr(line);
    const std::string prefix = "# " + std::string(kSchemaFormat);
    if (!header.starts_with(prefix)) throw ParseError(1, "expected '" + prefix + "' header");
    std::map<std::string, std::string, std::less<>> kv;
    for (auto tok : detail::split(header.substr(prefix.size()), ' ')) {
        const auto eq = tok.find('=');
        if (eq != std::string_view::npos) kv.emplace(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
    }
    const auto m = detail::parse_int(kv["m"]);
    const auto k = detail::parse_int(kv["k"]);
    if (!m || !k || *m < 1 || *k < 1) throw ParseError(1, "bad schema parameters");
    Taxonomy tax;
    tax.app_types.clear();
    tax.conn_types.clear();
    for (auto v : detail::split(kv["app"], '|')) tax.app_types.emplace_back(v);
    for (auto v : detail::split(kv["conn"], '|')) tax.conn_types.emplace_back(v);
    auto schema = make_schema(static_cast<std::size_t>(*m), static_cast<std::size_t>(*k), tax);
    const auto expected = matrix_header(schema);
    std::size_t i = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto name = detail::trim_cr(line);
        if (name.empty()) continue;
        if (i >= expected.size() || name != expected[i]) throw SchemaMismatch("schema column " + std::to_string(lineno) + " unexpected");
        ++i;
    }
    if (i != expected.size()) throw SchemaMismatch("schema sidecar lists too few columns");
    return schema;
}

}  // namespace ifsd
