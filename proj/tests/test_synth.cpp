#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ifsd/ingest.hpp"
#include "ifsd/sd_labeling.hpp"
#include "ifsd/synth.hpp"

using namespace ifsd;

namespace {

std::string trace_text(const SynthConfig& cfg) {
    std::ostringstream out;
    write_trace(generate(cfg).flows, out);
    return out.str();
}

}  // namespace

TEST(Rng, ReproducibleStreams) {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        EXPECT_EQ(x, b.uniform());
        EXPECT_GE(x, 0.0);
        EXPECT_LT(x, 1.0);
    }
    EXPECT_NE(Rng(42).uniform(), c.uniform());
    Rng r(1);
    for (int i = 0; i < 1000; ++i) {
        const auto v = r.between(-3, 3);
        EXPECT_GE(v, -3);
        EXPECT_LE(v, 3);
    }
}

TEST(Generate, SameSeedSameBytes) {
    auto cfg = dense_preset();
    cfg.n_flows = 200;
    cfg.seed = 5;
    EXPECT_EQ(trace_text(cfg), trace_text(cfg));
    auto other = cfg;
    other.seed = 6;
    EXPECT_NE(trace_text(cfg), trace_text(other));
}

TEST(Generate, FlowsAreValidAndIdsAreSequential) {
    auto cfg = sparse_sd_preset();
    cfg.seed = 2;
    const auto r = generate(cfg);
    ASSERT_FALSE(r.flows.empty());
    for (const auto& f : r.flows.flows()) {
        EXPECT_TRUE(validate_flow(f).empty());
        EXPECT_GE(f.size(), 12u);
        EXPECT_LE(f.size(), 80u);
    }
    EXPECT_NE(r.flows.find("f0000001"), nullptr);
}

TEST(Generate, PoissonArrivalCount) {
    // Count over the horizon should sit within 5 sigma of rate * horizon.
    SynthConfig cfg;
    cfg.horizon_s = 500;
    cfg.arrival_rate_per_s = 0.4;
    cfg.measurements_per_flow = {1, 1};
    double total = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        cfg.seed = seed;
        const auto n = static_cast<double>(generate(cfg).flows.size());
        EXPECT_LT(std::fabs(n - 200), 5 * std::sqrt(200.0)) << seed;
        total += n;
    }
    EXPECT_LT(std::fabs(total / 100 - 200), 5 * std::sqrt(200.0 / 100));
}

TEST(Generate, FullParticipationEpisodeIsLabeled) {
    SynthConfig cfg;
    cfg.horizon_s = 200;
    cfg.arrival_rate_per_s = 0.5;
    cfg.measurements_per_flow = {40, 40};
    cfg.measurement_period_ms = {1000, 1000};
    cfg.base_delay_sigma = 0.1;
    cfg.flow_mu_sigma = 0.1;
    cfg.congestion = {{120, 6, 10, 1.0, {0, 0}, 1}};
    cfg.seed = 3;
    const auto r = generate(cfg);
    std::size_t checked = 0;
    for (const auto& t : r.truth) {
        if (t.source != "episode" || t.first_measurement == 0 || t.last_measurement < t.first_measurement + 1)
            continue;
        const auto* f = r.flows.find(t.flow_id);
        ASSERT_NE(f, nullptr);
        const auto det = detect_sd_events(*f, {});
        const bool hit = std::any_of(det.events.begin(), det.events.end(), [&](const SDEvent& e) {
            return e.first_index + 1 <= t.last_measurement && e.last_index + 1 >= t.first_measurement;
        });
        EXPECT_TRUE(hit) << t.flow_id;
        ++checked;
    }
    EXPECT_GT(checked, 10u);
}

TEST(Generate, ScriptedFlowsOnly) {
    const auto r = generate(fig1_scene_preset());
    EXPECT_EQ(r.flows.size(), 7u);
    EXPECT_TRUE(r.truth.empty());
}

TEST(Presets, NamesAndErrors) {
    for (const auto& name : preset_names()) EXPECT_NO_THROW(scenario_presets(name).validate());
    EXPECT_THROW(scenario_presets("nope"), UnknownPreset);
    SynthConfig bad;
    bad.app_mix = {0.5, 0.5};
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Truth, CsvShape) {
    auto cfg = alignment_lag_preset();
    cfg.horizon_s = 500;
    cfg.seed = 1;
    const auto r = generate(cfg);
    ASSERT_FALSE(r.truth.empty());
    std::ostringstream out;
    write_truth(r.truth, out);
    const auto text = out.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "flow_id,source,index,lag_ns,first_measurement,last_measurement");
    EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), r.truth.size() + 1);
}
