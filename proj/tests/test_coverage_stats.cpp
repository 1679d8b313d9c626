#include <gtest/gtest.h>

#include "helpers.hpp"
#include "ifsd/coverage_stats.hpp"
#include "ifsd/synth.hpp"

using namespace ifsd;
using testutil::periodic;

namespace {

// Hand-built space: one window per target, matches pointing at the given
// covering flows, each first seen `delay_s` after the window start.
struct Scene {
    std::vector<LabeledFlow> labeled;
    CorrelationSpace space;

    void add_flow(const FlowRecord& f, std::vector<SDEvent> events = {}) {
        labeled.push_back(make_labeled(f, std::move(events), space.split));
    }

    void add_target(const std::string& id, std::vector<std::pair<std::string, double>> coverings) {
        SpaceEntry e;
        e.window = {id, seconds(100), seconds(400), seconds(300)};
        for (auto& [cid, delay_s] : coverings) {
            CoveringMatch m;
            m.target_id = id;
            m.covering_id = cid;
            m.overlap_class = OverlapClass::fully_contained;
            m.in_window_indices = {0};
            m.first_in_window_start = seconds(100 + delay_s);
            e.matches.push_back(m);
        }
        space.entries.push_back(e);
    }
};

SDEvent event_at(double center_s, std::size_t first_index) {
    SDEvent e;
    e.start_ts = seconds(center_s - 1);
    e.end_ts = seconds(center_s + 1);
    e.center_ts = seconds(center_s);
    e.first_index = e.last_index = first_index;
    return e;
}

}  // namespace

TEST(Summarize, OrderingAndValues) {
    const std::vector<double> v{4, 1, 3, 2};
    const auto s = summarize(v);
    EXPECT_EQ(s.count, 4u);
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_DOUBLE_EQ(s.median, 2.5);
    EXPECT_DOUBLE_EQ(s.p10, 1.3);
    EXPECT_DOUBLE_EQ(s.p90, 3.7);
    EXPECT_EQ(summarize({}).count, 0u);
}

TEST(CountStats, UniformThreeCoveringsWithoutSd) {
    Scene sc;
    sc.space.split = ONOSplit(10);
    for (auto id : {"c1", "c2", "c3"}) sc.add_flow(periodic(id, 150, 1, 5));
    for (auto id : {"t1", "t2"}) {
        sc.add_flow(periodic(id, 0, 1, 20));
        sc.add_target(id, {{"c1", 1}, {"c2", 2}, {"c3", 3}});
    }
    const auto c = covering_count_stats(sc.space, sc.labeled);
    EXPECT_DOUBLE_EQ(c.all.mean, 3);
    EXPECT_DOUBLE_EQ(c.sd_only.mean, 0);
}

TEST(CountStats, PlantedCountsOneToFour) {
    Scene sc;
    sc.space.split = ONOSplit(10);
    for (int i = 0; i < 4; ++i) sc.add_flow(periodic("c" + std::to_string(i), 150, 1, 5));
    for (int n = 1; n <= 4; ++n) {
        const auto id = "t" + std::to_string(n);
        sc.add_flow(periodic(id, 0, 1, 20));
        std::vector<std::pair<std::string, double>> cov;
        for (int i = 0; i < n; ++i) cov.push_back({"c" + std::to_string(i), 1});
        sc.add_target(id, cov);
    }
    const auto c = covering_count_stats(sc.space, sc.labeled);
    EXPECT_DOUBLE_EQ(c.all.mean, 2.5);
    EXPECT_DOUBLE_EQ(c.all.median, 2.5);
    for (const auto& t : c.per_target) EXPECT_LE(t.sd_only, t.all);
}

TEST(CountStats, EmptySpaceIsAnError) {
    EXPECT_THROW(covering_count_stats(CorrelationSpace{}, {}), EmptyInput);
    EXPECT_THROW(time_to_first_covering(CorrelationSpace{}, {}), EmptyInput);
}

TEST(CountStats, OnlyObservableSdMakesACoveringSdBearing) {
    Scene sc;
    sc.space.split = ONOSplit(10);
    sc.add_flow(periodic("obs", 150, 1, 20), {event_at(153, 3)});
    sc.add_flow(periodic("late", 150, 1, 20), {event_at(165, 15)});
    sc.add_flow(periodic("t", 0, 1, 20));
    sc.add_target("t", {{"obs", 1}, {"late", 2}});
    const auto c = covering_count_stats(sc.space, sc.labeled);
    EXPECT_EQ(c.per_target[0].all, 2u);
    EXPECT_EQ(c.per_target[0].sd_only, 1u);
}

TEST(Timeliness, PlantedDelays) {
    Scene sc;
    sc.space.split = ONOSplit(10);
    sc.add_flow(periodic("c", 150, 1, 5));
    sc.add_flow(periodic("sd", 150, 1, 5), {event_at(151, 0)});
    const std::vector<double> delays{1, 2, 3};
    for (std::size_t i = 0; i < delays.size(); ++i) {
        const auto id = "t" + std::to_string(i);
        sc.add_flow(periodic(id, 0, 1, 20));
        sc.add_target(id, {{"c", delays[i]}, {"c", delays[i] + 5}});
    }
    sc.add_flow(periodic("t_edge", 0, 1, 20));
    sc.add_target("t_edge", {{"sd", 0}});
    const auto t = time_to_first_covering(sc.space, sc.labeled);
    EXPECT_EQ(t.per_target.back().generic_s, 0.0);
    EXPECT_EQ(t.excluded_sd_first, 3u);
    EXPECT_EQ(t.sd_first.count, 1u);

    sc.space.entries.pop_back();
    EXPECT_DOUBLE_EQ(time_to_first_covering(sc.space, sc.labeled).generic.mean, 2.0);
}

TEST(Alignment, IdenticalCentersAndClosestPair) {
    Scene sc;
    sc.space.split = ONOSplit(10);
    sc.add_flow(periodic("t", 0, 1, 30), {event_at(200, 15)});
    sc.add_flow(periodic("same", 150, 1, 5), {event_at(200, 0)});
    sc.add_target("t", {{"same", 1}});
    EXPECT_EQ(best_sd_alignment(sc.space, sc.labeled).records.at(0).best_offset, 0);

    Scene two;
    two.space.split = ONOSplit(10);
    two.add_flow(periodic("t", 0, 1, 30), {event_at(200, 15)});
    two.add_flow(periodic("early", 150, 1, 5), {event_at(170, 0)});
    two.add_flow(periodic("later", 150, 1, 5), {event_at(210, 0)});
    two.add_target("t", {{"early", 1}, {"later", 2}});
    const auto a = best_sd_alignment(two.space, two.labeled);
    ASSERT_EQ(a.records.size(), 1u);
    EXPECT_EQ(a.records[0].best_offset, seconds(10));
    EXPECT_EQ(a.records[0].pair_count, 2u);
    EXPECT_EQ(best_sd_alignment(two.space, two.labeled, AlignmentRule::signed_minimum).records[0].best_offset,
              seconds(-30));
}

TEST(Alignment, TiesGoToTheEarlierOffset) {
    EXPECT_TRUE(better_alignment(-seconds(5), seconds(5), AlignmentRule::min_magnitude));
    EXPECT_FALSE(better_alignment(seconds(5), -seconds(5), AlignmentRule::min_magnitude));
}

TEST(Alignment, TargetsWithoutCoveringSdAreCounted) {
    Scene sc;
    sc.space.split = ONOSplit(10);
    sc.add_flow(periodic("t", 0, 1, 30), {event_at(200, 15)});
    sc.add_flow(periodic("quiet", 150, 1, 5));
    sc.add_target("t", {{"quiet", 1}});
    const auto a = best_sd_alignment(sc.space, sc.labeled);
    EXPECT_TRUE(a.records.empty());
    EXPECT_EQ(a.excluded, 1u);
}

TEST(AlignmentProperty, SelectedOffsetIsMinimalOverAllPairs) {
    auto cfg = alignment_lag_preset();
    cfg.horizon_s = 900;
    cfg.seed = 3;
    const auto flows = generate(cfg).flows;
    const auto labeled = label_flowset(flows, {}, ONOSplit(10));
    const auto space = build_correlation_space(flows, ONOSplit(10), seconds(300));
    const auto a = best_sd_alignment(space, labeled);
    ASSERT_FALSE(a.records.empty());
    const LabelIndex idx(labeled);
    std::map<std::string, const SpaceEntry*> entry;
    for (const auto& e : space.entries) entry[e.target_id()] = &e;
    for (const auto& r : a.records) {
        for (const auto& m : entry.at(r.target_id)->matches)
            for (const auto& te : idx.at(r.target_id).no_segment_events)
                for (const auto& ce : idx.at(m.covering_id).observable_events()) {
                    const auto off = ce.center_ts - te.center_ts;
                    EXPECT_GE(std::llabs(off), std::llabs(r.best_offset));
                    if (std::llabs(off) == std::llabs(r.best_offset)) {
                        EXPECT_LE(r.best_offset, off);
                    }
                }
    }
    const auto& s = a.summary;
    EXPECT_LE(s.min, s.p10);
    EXPECT_LE(s.p10, s.p25);
    EXPECT_LE(s.p25, s.median);
    EXPECT_LE(s.median, s.p75);
    EXPECT_LE(s.p75, s.p90);
    EXPECT_LE(s.p90, s.max);
}

TEST(Report, RoundTripAndDeterminism) {
    auto cfg = dense_preset();
    cfg.n_flows = 300;
    cfg.seed = 2;
    const auto flows = generate(cfg).flows;
    const auto labeled = label_flowset(flows, {}, ONOSplit(10));
    const auto space = build_correlation_space(flows, ONOSplit(10), seconds(300));
    StatsReport r;
    r.counts = covering_count_stats(space, labeled);
    r.timeliness = time_to_first_covering(space, labeled);
    r.alignment = best_sd_alignment(space, labeled);

    const auto a = testutil::scratch("report_a"), b = testutil::scratch("report_b");
    emit_report(r, a);
    emit_report(r, b);
    for (auto name : {"counts_summary.csv", "counts_per_target.csv", "timeliness_summary.csv",
                      "timeliness_per_target.csv", "alignment_summary.csv", "alignment_per_target.csv"})
        EXPECT_EQ(testutil::slurp(a / name), testutil::slurp(b / name)) << name;

    const auto counts = read_summary_csv(a / "counts_summary.csv");
    EXPECT_EQ(counts.at("all"), r.counts->all);
    EXPECT_EQ(counts.at("sd_only"), r.counts->sd_only);
    EXPECT_EQ(read_summary_csv(a / "timeliness_summary.csv").at("generic_s"), r.timeliness->generic);
}

TEST(Report, EmptySummariesAreHeaderOnly) {
    StatsReport r;
    r.alignment = AlignmentStats{};
    const auto dir = testutil::scratch("report_empty");
    emit_report(r, dir);
    EXPECT_EQ(testutil::slurp(dir / "alignment_summary.csv"), std::string(kSummaryHeader) + "\n");
    EXPECT_TRUE(read_summary_csv(dir / "alignment_summary.csv").empty());
}
