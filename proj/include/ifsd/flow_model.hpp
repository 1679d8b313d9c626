#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ifsd/error.hpp"

namespace ifsd {

/// Integer nanoseconds since the trace-local epoch.
using TimeNs = std::int64_t;
/// Signed span of time in nanoseconds.
using DurationNs = std::int64_t;

inline constexpr DurationNs kNanosPerSecond = 1'000'000'000;
inline constexpr DurationNs kNanosPerMilli = 1'000'000;

constexpr DurationNs seconds(double s) { return static_cast<DurationNs>(s * 1e9 + (s >= 0 ? 0.5 : -0.5)); }
constexpr DurationNs millis(double ms) { return static_cast<DurationNs>(ms * 1e6 + (ms >= 0 ? 0.5 : -0.5)); }
constexpr double to_seconds(DurationNs ns) { return static_cast<double>(ns) / 1e9; }
constexpr double to_millis(DurationNs ns) { return static_cast<double>(ns) / 1e6; }

/// One delay sample: when the measured packet started and how long it took.
struct DelayMeasurement {
    TimeNs start_ts = 0;
    DurationNs duration = 0;

    TimeNs end_ts() const { return start_ts + duration; }

    friend bool operator==(const DelayMeasurement&, const DelayMeasurement&) = default;
};

/// The categorical value sets in force for a trace.
///
/// A two-valued connection taxonomy is encoded as one binary column (set when
/// the value is the second entry); any other size is one-hot.
struct Taxonomy {
    std::vector<std::string> app_types{"web", "video", "other"};
    std::vector<std::string> conn_types{"tcp", "udp"};

    std::size_t app_size() const { return app_types.size(); }
    std::size_t conn_encoding_size() const { return conn_types.size() == 2 ? 1 : conn_types.size(); }

    std::ptrdiff_t app_index(std::string_view v) const { return index_of(app_types, v); }
    std::ptrdiff_t conn_index(std::string_view v) const { return index_of(conn_types, v); }

    friend bool operator==(const Taxonomy&, const Taxonomy&) = default;

private:
    static std::ptrdiff_t index_of(const std::vector<std::string>& values, std::string_view v) {
        auto it = std::find(values.begin(), values.end(), v);
        return it == values.end() ? -1 : it - values.begin();
    }
};

inline constexpr std::size_t kDefaultAppTaxonomySize = 3;
inline constexpr std::size_t kDefaultConnEncodingSize = 1;

struct FlowRecord {
    std::string flow_id;
    std::string app_type;
    std::string conn_type;
    std::vector<DelayMeasurement> measurements;

    std::size_t size() const { return measurements.size(); }
    TimeNs start_ts() const { return measurements.front().start_ts; }

    friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

/// Number of initial delay measurements a flow spends in the observable state.
struct ONOSplit {
    std::size_t m = 10;

    ONOSplit() = default;
    explicit ONOSplit(std::size_t count) : m(count) {
        if (m < 1) throw ConfigError("O/NO split m must be >= 1");
    }
};

struct JitterSeries {
    std::vector<DurationNs> values;
};

enum class ViolationKind {
    invalid_id,
    empty_measurements,
    unsorted_measurements,
    negative_duration,
    unknown_app_type,
    unknown_conn_type,
};

inline std::string_view to_string(ViolationKind k) {
    switch (k) {
        case ViolationKind::invalid_id: return "invalid flow id";
        case ViolationKind::empty_measurements: return "no measurements";
        case ViolationKind::unsorted_measurements: return "unsorted measurements";
        case ViolationKind::negative_duration: return "negative duration";
        case ViolationKind::unknown_app_type: return "unknown app_type";
        case ViolationKind::unknown_conn_type: return "unknown conn_type";
    }
    return "unknown violation";
}

struct Violation {
    ViolationKind kind;
    std::size_t index = 0;  // 0-based measurement index where relevant
    std::string message;
};

/// Flow ids travel through comma/pipe separated text, so those characters and
/// whitespace are not allowed in them.
inline bool is_valid_flow_id(std::string_view id) {
    if (id.empty()) return false;
    return std::none_of(id.begin(), id.end(), [](char c) {
        return c == ',' || c == '|' || c == ';' || c == '#' || static_cast<unsigned char>(c) <= ' ';
    });
}

/// Every invariant violation of `flow`; an empty result means the flow is valid.
inline std::vector<Violation> validate_flow(const FlowRecord& flow, const Taxonomy& taxonomy = {}) {
    std::vector<Violation> out;
    auto add = [&](ViolationKind k, std::size_t idx) {
        out.push_back({k, idx, std::string(to_string(k))});
    };
    if (!is_valid_flow_id(flow.flow_id)) add(ViolationKind::invalid_id, 0);
    if (flow.measurements.empty()) add(ViolationKind::empty_measurements, 0);
    for (std::size_t i = 0; i < flow.measurements.size(); ++i) {
        if (flow.measurements[i].duration < 0) add(ViolationKind::negative_duration, i);
        if (i > 0 && flow.measurements[i].start_ts <= flow.measurements[i - 1].start_ts)
            add(ViolationKind::unsorted_measurements, i);
    }
    if (taxonomy.app_index(flow.app_type) < 0) add(ViolationKind::unknown_app_type, 0);
    if (taxonomy.conn_index(flow.conn_type) < 0) add(ViolationKind::unknown_conn_type, 0);
    return out;
}

/// Absolute successive delay differences: values[i] = |d[i+1] - d[i]|.
inline JitterSeries jitter_of(const FlowRecord& flow) {
    if (flow.size() < 2) throw SeriesTooShort("jitter needs at least 2 measurements, flow " + flow.flow_id);
    JitterSeries j;
    j.values.reserve(flow.size() - 1);
    for (std::size_t i = 0; i + 1 < flow.size(); ++i)
        j.values.push_back(std::llabs(flow.measurements[i + 1].duration - flow.measurements[i].duration));
    return j;
}

/// Validated collection of flows with unique ids.
class FlowSet {
public:
    explicit FlowSet(Taxonomy taxonomy = {}, TimeNs time_origin = 0)
        : taxonomy_(std::move(taxonomy)), time_origin_(time_origin) {}

    /// Throws InvalidFlow on any invariant violation, DuplicateId on a repeated id.
    void add(FlowRecord flow) {
        auto violations = validate_flow(flow, taxonomy_);
        if (!violations.empty()) {
            std::string msg = "flow '" + flow.flow_id + "':";
            for (const auto& v : violations) msg += " " + v.message + ";";
            throw InvalidFlow(msg);
        }
        if (flow.start_ts() < time_origin_)
            throw InvalidFlow("flow '" + flow.flow_id + "' starts before the time origin");
        if (index_.count(flow.flow_id)) throw DuplicateId("duplicate flow_id '" + flow.flow_id + "'");
        index_.emplace(flow.flow_id, flows_.size());
        flows_.push_back(std::move(flow));
    }

    const std::vector<FlowRecord>& flows() const { return flows_; }
    std::size_t size() const { return flows_.size(); }
    bool empty() const { return flows_.empty(); }
    const Taxonomy& taxonomy() const { return taxonomy_; }
    TimeNs time_origin() const { return time_origin_; }

    const FlowRecord* find(const std::string& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &flows_[it->second];
    }

    /// Positions of the flows in ascending flow_id order.
    std::vector<std::size_t> order_by_id() const {
        std::vector<std::size_t> order(flows_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return flows_[a].flow_id < flows_[b].flow_id; });
        return order;
    }

    friend bool operator==(const FlowSet& a, const FlowSet& b) {
        return a.taxonomy_ == b.taxonomy_ && a.time_origin_ == b.time_origin_ && a.flows_ == b.flows_;
    }

private:
    Taxonomy taxonomy_;
    TimeNs time_origin_;
    std::vector<FlowRecord> flows_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace ifsd
