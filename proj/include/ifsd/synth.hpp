#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "ifsd/error.hpp"
#include "ifsd/flow_model.hpp"
#include "ifsd/random.hpp"

namespace ifsd {

struct Range {
    double lo = 0;
    double hi = 0;
};

/// A period of shared congestion. A participating flow's delays are
/// multiplied by `delay_multiplier` during [start + lag, start + lag +
/// duration). The per-flow lag only applies from measurement
/// `lag_from_measurement` (1-based) on; earlier measurements of the flow see
/// the episode without lag.
struct CongestionEpisode {
    double start_s = 0;
    double duration_s = 0;
    double delay_multiplier = 2;
    double participation_prob = 1;
    Range per_flow_lag_s{0, 0};
    std::size_t lag_from_measurement = 1;
};

/// Flow-private degradation: selected flows get a higher base delay and one
/// inflated run of measurements starting at or after `from_measurement`.
struct SelfDegradation {
    double probability = 0;
    double base_mu_shift = 0;  // added to the flow's log-ms delay location
    double multiplier = 1;
    std::size_t from_measurement = 1;
    Range length_measurements{1, 1};
};

struct SynthConfig {
    std::size_t n_flows = 0;  // cap on generated flows; 0 = only the horizon bounds arrivals
    double horizon_s = 600;
    double arrival_rate_per_s = 1;
    Range measurements_per_flow{12, 60};
    double base_delay_mu = 2.302585092994046;  // log(10 ms)
    double base_delay_sigma = 0.2;             // per measurement
    double flow_mu_sigma = 0.3;                // spread of per-flow locations
    Range measurement_period_ms{500, 2000};
    std::vector<CongestionEpisode> congestion;
    std::vector<double> app_mix{0.5, 0.3, 0.2};
    std::vector<double> conn_mix{0.8, 0.2};
    Taxonomy taxonomy;
    SelfDegradation self_degradation;
    std::vector<FlowRecord> scripted_flows;  // emitted verbatim before any random flow
    std::uint64_t seed = 1;

    void validate() const {
        auto prob_vector = [](const std::vector<double>& p, std::size_t n, const char* what) {
            if (p.size() != n) throw ConfigError(std::string(what) + " size does not match the taxonomy");
            double sum = 0;
            for (double v : p) {
                if (v < 0) throw ConfigError(std::string(what) + " has a negative probability");
                sum += v;
            }
            if (std::fabs(sum - 1.0) > 1e-9) throw ConfigError(std::string(what) + " does not sum to 1");
        };
        prob_vector(app_mix, taxonomy.app_size(), "app_mix");
        prob_vector(conn_mix, taxonomy.conn_types.size(), "conn_mix");
        const bool random_flows = n_flows > 0 || scripted_flows.empty();
        if (random_flows) {
            if (!(arrival_rate_per_s > 0)) throw ConfigError("arrival rate must be positive");
            if (!(horizon_s > 0)) throw ConfigError("horizon must be positive");
            if (!(measurement_period_ms.lo > 0) || measurement_period_ms.hi < measurement_period_ms.lo)
                throw ConfigError("measurement period range must be positive and ordered");
            if (measurements_per_flow.lo < 1 || measurements_per_flow.hi < measurements_per_flow.lo)
                throw ConfigError("measurements_per_flow range must be >= 1 and ordered");
            if (!(base_delay_sigma >= 0) || !(flow_mu_sigma >= 0)) throw ConfigError("sigmas must be >= 0");
        }
        for (const auto& e : congestion) {
            if (!(e.duration_s > 0)) throw ConfigError("episode duration must be positive");
            if (!(e.delay_multiplier > 1)) throw ConfigError("episode multiplier must exceed 1");
            if (e.participation_prob < 0 || e.participation_prob > 1)
                throw ConfigError("participation probability outside [0, 1]");
            if (e.per_flow_lag_s.lo < 0 || e.per_flow_lag_s.hi < e.per_flow_lag_s.lo)
                throw ConfigError("lag range must be non-negative and ordered");
            if (e.lag_from_measurement < 1) throw ConfigError("lag_from_measurement is 1-based");
        }
        const auto& d = self_degradation;
        if (d.probability < 0 || d.probability > 1) throw ConfigError("self-degradation probability outside [0, 1]");
        if (d.probability > 0 && (d.multiplier <= 1 || d.length_measurements.lo < 1 ||
                                  d.length_measurements.hi < d.length_measurements.lo || d.from_measurement < 1))
            throw ConfigError("invalid self-degradation parameters");
    }
};

/// Which mechanism inflated a flow's delays, and where. Measurement indices
/// are 1-based; 0/0 means the flow participated but no measurement fell in
/// the affected span.
struct TruthRow {
    std::string flow_id;
    std::string source;  // "episode" or "self"
    std::size_t index = 0;  // episode index for "episode"
    DurationNs lag = 0;
    std::size_t first_measurement = 0;
    std::size_t last_measurement = 0;

    friend bool operator==(const TruthRow&, const TruthRow&) = default;
};

struct SynthResult {
    FlowSet flows;
    std::vector<TruthRow> truth;
};

inline std::string synth_flow_id(std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "f%07zu", n);
    return buf;
}

/// Generate a trace. Flows arrive as a Poisson process over the horizon (up
/// to `n_flows`); each flow measures periodically with its own period, and
/// its delays are lognormal around a per-flow location, inflated by the
/// congestion episodes it participates in.
inline SynthResult generate(const SynthConfig& cfg) {
    cfg.validate();
    SynthResult out{FlowSet(cfg.taxonomy), {}};
    for (const auto& f : cfg.scripted_flows) out.flows.add(f);
    if (cfg.n_flows == 0 && !cfg.scripted_flows.empty()) return out;

    Rng rng(cfg.seed);
    double t = 0;
    std::size_t n = 0;
    while (true) {
        t += rng.exponential(cfg.arrival_rate_per_s);
        if (t >= cfg.horizon_s) break;
        if (cfg.n_flows > 0 && n >= cfg.n_flows) break;
        ++n;

        FlowRecord flow;
        flow.flow_id = synth_flow_id(n);
        const auto count = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(cfg.measurements_per_flow.lo),
                                                                 static_cast<std::int64_t>(cfg.measurements_per_flow.hi)));
        const DurationNs period = std::max<DurationNs>(
            1, millis(rng.uniform(cfg.measurement_period_ms.lo, cfg.measurement_period_ms.hi)));
        flow.app_type = cfg.taxonomy.app_types[rng.categorical(cfg.app_mix)];
        flow.conn_type = cfg.taxonomy.conn_types[rng.categorical(cfg.conn_mix)];
        double mu = cfg.base_delay_mu + cfg.flow_mu_sigma * rng.normal();

        struct Active {
            TimeNs start, lagged_start;
            DurationNs length;
            double multiplier;
            std::size_t lag_from, truth_row;
        };
        std::vector<Active> active;
        for (std::size_t e = 0; e < cfg.congestion.size(); ++e) {
            const auto& ep = cfg.congestion[e];
            const bool joins = rng.bernoulli(ep.participation_prob);
            const double lag_s = rng.uniform(ep.per_flow_lag_s.lo, ep.per_flow_lag_s.hi);
            if (!joins) continue;
            const DurationNs lag = seconds(lag_s);
            active.push_back({seconds(ep.start_s), seconds(ep.start_s) + lag, seconds(ep.duration_s),
                              ep.delay_multiplier, ep.lag_from_measurement, out.truth.size()});
            out.truth.push_back({flow.flow_id, "episode", e, lag, 0, 0});
        }

        std::size_t self_first = 0, self_last = 0;
        const auto& sd = cfg.self_degradation;
        if (sd.probability > 0 && rng.bernoulli(sd.probability)) {
            mu += sd.base_mu_shift;
            const auto len = static_cast<std::size_t>(
                rng.between(static_cast<std::int64_t>(sd.length_measurements.lo),
                            static_cast<std::int64_t>(sd.length_measurements.hi)));
            if (count >= sd.from_measurement) {
                self_first = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(sd.from_measurement),
                                                                  static_cast<std::int64_t>(count)));
                self_last = std::min(count, self_first + len - 1);
            }
            out.truth.push_back({flow.flow_id, "self", 0, 0, self_first, self_last});
        }

        const TimeNs arrival = seconds(t);
        flow.measurements.reserve(count);
        for (std::size_t i = 1; i <= count; ++i) {
            const TimeNs start = arrival + static_cast<TimeNs>(i - 1) * period;
            double delay_ms = rng.lognormal(mu, cfg.base_delay_sigma);
            for (const auto& a : active) {
                const TimeNs from = i >= a.lag_from ? a.lagged_start : a.start;
                if (start >= from && start < from + a.length) {
                    delay_ms *= a.multiplier;
                    auto& row = out.truth[a.truth_row];
                    if (row.first_measurement == 0) row.first_measurement = i;
                    row.last_measurement = i;
                }
            }
            if (self_first && i >= self_first && i <= self_last) delay_ms *= sd.multiplier;
            flow.measurements.push_back({start, std::max<DurationNs>(1, millis(delay_ms))});
        }
        out.flows.add(std::move(flow));
    }
    return out;
}

inline void write_truth(const std::vector<TruthRow>& truth, std::ostream& out) {
    out << "flow_id,source,index,lag_ns,first_measurement,last_measurement\n";
    for (const auto& r : truth)
        out << r.flow_id << ',' << r.source << ',' << r.index << ',' << r.lag << ',' << r.first_measurement << ','
            << r.last_measurement << '\n';
    if (!out) throw IoError("failed writing ground truth");
}

// ---------------------------------------------------------------------------
// Presets

inline constexpr double kDefaultAlignmentLeadS = 60.0;

/// Seven hand-placed flows around target "f_t" (start 100 s, 1 s period).
/// With m in {5, 10} and a 300 s active timeout: f_a and f_d straddle the
/// window edges, f_b and f_c sit inside it, f_e finishes its observable
/// segment before the window opens and f_t1 starts after it closes.
inline SynthConfig fig1_scene_preset() {
    auto periodic = [](std::string id, std::string app, double start_s, double period_s, std::size_t n) {
        FlowRecord f{std::move(id), std::move(app), "tcp", {}};
        for (std::size_t i = 0; i < n; ++i)
            f.measurements.push_back({seconds(start_s + period_s * static_cast<double>(i)), millis(5)});
        return f;
    };
    SynthConfig cfg;
    cfg.scripted_flows = {
        periodic("f_t", "video", 100.0, 1.0, 30),
        periodic("f_a", "web", 102.0, 2.0, 20),   // observable 102..120 s, crosses window start
        periodic("f_b", "web", 150.0, 1.0, 20),   // observable 150..159 s
        periodic("f_c", "other", 200.0, 1.0, 20), // observable 200..209 s
        periodic("f_d", "web", 392.0, 3.0, 20),   // observable 392..419 s, crosses window end at 400 s
        periodic("f_e", "video", 100.1, 0.1, 40), // observable segment over by 101 s
        periodic("f_t1", "web", 405.0, 1.0, 30),  // starts after the window closes
    };
    return cfg;
}

/// Episodes every 400 s. Flows still in their first 10 measurements feel the
/// episode immediately; later measurements feel it `lead_s` later, so SD seen
/// by observable covering flows precedes the offloaded targets' SD by lead_s.
inline SynthConfig alignment_lag_preset(double lead_s = kDefaultAlignmentLeadS) {
    SynthConfig cfg;
    cfg.horizon_s = 2000;
    cfg.arrival_rate_per_s = 1.0;
    cfg.measurements_per_flow = {60, 200};
    cfg.measurement_period_ms = {1000, 1000};
    cfg.base_delay_sigma = 0.15;
    for (double start = 200; start < cfg.horizon_s; start += 400)
        cfg.congestion.push_back({start, 8.0, 10.0, 1.0, {lead_s, lead_s}, 11});
    return cfg;
}

/// Many concurrent flows and a few partial-participation episodes.
inline SynthConfig dense_preset() {
    SynthConfig cfg;
    cfg.n_flows = 1000;
    cfg.horizon_s = 900;
    cfg.arrival_rate_per_s = 2.0;
    cfg.measurements_per_flow = {12, 60};
    cfg.measurement_period_ms = {500, 3000};
    cfg.base_delay_sigma = 0.3;
    cfg.congestion = {{150, 15, 5, 0.6, {0, 20}, 1}, {400, 15, 5, 0.6, {0, 20}, 1}, {650, 15, 5, 0.6, {0, 20}, 1}};
    return cfg;
}

/// Busy trace where only a small share of flows ever show SD.
inline SynthConfig sparse_sd_preset() {
    SynthConfig cfg;
    cfg.horizon_s = 900;
    cfg.arrival_rate_per_s = 2.0;
    cfg.measurements_per_flow = {12, 80};
    cfg.measurement_period_ms = {500, 2000};
    cfg.base_delay_sigma = 0.25;
    cfg.congestion = {{250, 20, 4, 0.15, {0, 5}, 1}, {600, 20, 4, 0.15, {0, 5}, 1}};
    return cfg;
}

/// Half the flows are fragile: a higher delay level in their observable
/// segment and a private degradation after measurement 12. The label is then
/// predictable from the target's own observable features.
inline SynthConfig planted_intra_preset() {
    SynthConfig cfg;
    cfg.n_flows = 13000;
    cfg.horizon_s = 30000;
    cfg.arrival_rate_per_s = 0.5;
    cfg.measurements_per_flow = {20, 40};
    cfg.measurement_period_ms = {500, 1500};
    cfg.base_delay_sigma = 0.2;
    cfg.flow_mu_sigma = 0.3;
    cfg.self_degradation = {0.5, 0.7, 6.0, 12, {4, 8}};
    return cfg;
}

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"fig1_scene", "alignment_lag", "sparse_sd", "dense", "planted_intra"};
    return names;
}

inline SynthConfig scenario_presets(std::string_view name) {
    if (name == "fig1_scene") return fig1_scene_preset();
    if (name == "alignment_lag") return alignment_lag_preset();
    if (name == "sparse_sd") return sparse_sd_preset();
    if (name == "dense") return dense_preset();
    if (name == "planted_intra") return planted_intra_preset();
    throw UnknownPreset("unknown preset '" + std::string(name) + "'");
}

}  // namespace ifsd
