#include <gtest/gtest.h>

#include <map>
#include <set>

#include "helpers.hpp"
#include "ifsd/correlation.hpp"
#include "ifsd/random.hpp"
#include "ifsd/synth.hpp"
#include "oracles.hpp"

using namespace ifsd;
using testutil::periodic;

namespace {

std::vector<oracle::Pair> pairs_of(const CorrelationSpace& space) {
    std::vector<oracle::Pair> out;
    for (const auto& e : space.entries)
        for (const auto& m : e.matches)
            out.push_back({m.target_id, m.covering_id, m.overlap_class == OverlapClass::fully_contained,
                           m.in_window_indices});
    std::sort(out.begin(), out.end());
    return out;
}

FlowSet random_flows(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    FlowSet s;
    for (std::size_t i = 0; i < n; ++i) {
        FlowRecord f{"f" + std::to_string(i), "web", "tcp", {}};
        TimeNs t = seconds(rng.uniform(0, 200));
        const auto count = rng.between(1, 25);
        for (std::int64_t k = 0; k < count; ++k) {
            f.measurements.push_back({t, millis(rng.uniform(1, 4000))});
            t += seconds(rng.uniform(0.2, 8));
        }
        s.add(f);
    }
    return s;
}

std::map<std::string, OverlapClass> fig1_classes(std::size_t m) {
    FlowSet flows;
    for (const auto& f : fig1_scene_preset().scripted_flows) flows.add(f);
    const auto w = correlation_window(*flows.find("f_t"), ONOSplit(m), seconds(300));
    std::map<std::string, OverlapClass> out;
    for (const auto& match : find_covering(w, flows, ONOSplit(m))) out[match.covering_id] = match.overlap_class;
    return out;
}

}  // namespace

TEST(OnoSplit, MinimalEligibleFlowAndBoundary) {
    const auto f = periodic("a", 0, 1, 6, 250);
    const auto p = ono_split(f, ONOSplit(5));
    EXPECT_EQ(p.transition_ts, seconds(4) + millis(250));
    EXPECT_EQ(p.observable_span, seconds(4.25));
    EXPECT_THROW(ono_split(periodic("b", 0, 1, 10), ONOSplit(10)), NeverOffloaded);
}

TEST(Window, DeltaFromTheObservableSpan) {
    // O segment ends at 10 s.
    auto f = periodic("a", 0, 1, 20, 0);
    f.measurements[4].duration = seconds(6);
    const auto w = correlation_window(f, ONOSplit(5), seconds(300));
    EXPECT_EQ(w.start_ts, seconds(10));
    EXPECT_EQ(w.end_ts, seconds(300));
    EXPECT_EQ(w.delta_t, seconds(290));

    const auto lit = correlation_window(f, ONOSplit(5), seconds(300), WindowMode::literal_bound);
    EXPECT_EQ(lit.end_ts, seconds(290));
    EXPECT_THROW(correlation_window(f, ONOSplit(5), seconds(10)), EmptyWindow);
}

TEST(Window, Fig1TargetStartsAtTheSplitMarker) {
    const auto scene = fig1_scene_preset().scripted_flows;
    const auto& t = scene.front();
    ASSERT_EQ(t.flow_id, "f_t");
    const auto w = correlation_window(t, ONOSplit(10), seconds(300));
    EXPECT_EQ(w.start_ts, t.measurements[9].end_ts());
}

TEST(FindCovering, Fig1SceneClasses) {
    for (std::size_t m : {5u, 10u}) {
        const auto cls = fig1_classes(m);
        ASSERT_EQ(cls.size(), 4u) << "m=" << m;
        EXPECT_EQ(cls.at("f_a"), OverlapClass::partial_overlap);
        EXPECT_EQ(cls.at("f_d"), OverlapClass::partial_overlap);
        EXPECT_EQ(cls.at("f_b"), OverlapClass::fully_contained);
        EXPECT_EQ(cls.at("f_c"), OverlapClass::fully_contained);
    }
}

TEST(FindCovering, EdgeCases) {
    const auto t = periodic("t", 0, 1, 20);
    const auto w = correlation_window(t, ONOSplit(10), seconds(300));
    EXPECT_TRUE(find_covering(w, std::span<const FlowRecord* const>{}, ONOSplit(10)).empty());

    // Observable segment over before the window opens.
    FlowSet s;
    s.add(t);
    s.add(periodic("early", 0.5, 0.5, 12));
    EXPECT_TRUE(find_covering(w, s, ONOSplit(10)).empty());

    // A measurement ending exactly at the window end still counts.
    FlowSet edge;
    edge.add(t);
    FlowRecord c{"c", "web", "tcp", {{seconds(290), seconds(10)}}};
    edge.add(c);
    const auto hits = find_covering(w, edge, ONOSplit(10));
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].overlap_class, OverlapClass::fully_contained);
}

TEST(FindCovering, OnlyObservableMeasurementsCount) {
    const auto t = periodic("t", 0, 1, 20);
    const auto w = correlation_window(t, ONOSplit(10), seconds(300));
    // Ten measurements before the window, the rest inside it.
    auto c = periodic("c", 0.5, 0.5, 40);
    FlowSet s;
    s.add(t);
    s.add(c);
    EXPECT_TRUE(find_covering(w, s, ONOSplit(10)).empty());
}

TEST(BuildSpace, SingleFlowAndDisjointClusters) {
    FlowSet one;
    one.add(periodic("a", 0, 1, 20));
    EXPECT_EQ(build_correlation_space(one, ONOSplit(10), seconds(300)).pair_count(), 0u);

    FlowSet two;
    for (int i = 0; i < 5; ++i) two.add(periodic("x" + std::to_string(i), i * 3.0, 1, 20));
    for (int i = 0; i < 5; ++i) two.add(periodic("y" + std::to_string(i), 5000 + i * 3.0, 1, 20));
    const auto space = build_correlation_space(two, ONOSplit(10), seconds(300));
    EXPECT_GT(space.pair_count(), 0u);
    for (const auto& e : space.entries)
        for (const auto& m : e.matches) EXPECT_EQ(m.target_id[0], m.covering_id[0]);
}

TEST(BuildSpaceProperty, EqualsBruteForceEnumeration) {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const auto flows = random_flows(seed, 150);
        for (std::size_t m : {1u, 5u, 10u}) {
            const auto space = build_correlation_space(flows, ONOSplit(m), seconds(60), WindowMode::from_flow_start,
                                                       seed % 2 ? 3 : 1);
            EXPECT_EQ(pairs_of(space), oracle::covering_pairs(flows.flows(), m, seconds(60)))
                << "seed " << seed << " m " << m;
        }
    }
}

TEST(BuildSpaceProperty, InWindowMeasurementsSatisfyBothBounds) {
    const auto flows = random_flows(21, 120);
    const auto space = build_correlation_space(flows, ONOSplit(5), seconds(90));
    for (const auto& e : space.entries) {
        for (std::size_t i = 1; i < e.matches.size(); ++i)
            EXPECT_LE(e.matches[i - 1].first_in_window_start, e.matches[i].first_in_window_start);
        for (const auto& m : e.matches)
            for (auto i : m.in_window_indices) {
                const auto& d = flows.find(m.covering_id)->measurements[i];
                EXPECT_LE(e.window.start_ts, d.start_ts);
                EXPECT_LE(d.start_ts + d.duration, e.window.end_ts);
                EXPECT_LT(i, 5u);
            }
    }
}

TEST(BuildSpaceProperty, LongerTimeoutNeverRemovesCoverage) {
    const auto flows = random_flows(5, 150);
    const auto small = build_correlation_space(flows, ONOSplit(5), seconds(40));
    const auto large = build_correlation_space(flows, ONOSplit(5), seconds(120));
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> big;
    for (const auto& e : large.entries)
        for (const auto& m : e.matches) big[{m.target_id, m.covering_id}] = m.in_window_indices;
    for (const auto& e : small.entries)
        for (const auto& m : e.matches) {
            auto it = big.find({m.target_id, m.covering_id});
            ASSERT_NE(it, big.end());
            EXPECT_TRUE(std::includes(it->second.begin(), it->second.end(), m.in_window_indices.begin(),
                                      m.in_window_indices.end()));
        }
}

TEST(BuildSpaceProperty, RelationIsNotSymmetric) {
    FlowSet flows;
    for (const auto& f : fig1_scene_preset().scripted_flows) flows.add(f);
    const auto space = build_correlation_space(flows, ONOSplit(10), seconds(300));
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& e : space.entries)
        for (const auto& m : e.matches) pairs.insert({m.target_id, m.covering_id});
    EXPECT_TRUE(pairs.count({"f_t", "f_b"}));
    EXPECT_FALSE(pairs.count({"f_b", "f_t"}));
}

TEST(IntervalIndex, MatchesLinearScan) {
    const auto flows = random_flows(9, 300);
    const ONOSplit split(5);
    const FlowIntervalIndex index(flows, split);
    Rng rng(4);
    for (int q = 0; q < 200; ++q) {
        const TimeNs lo = seconds(rng.uniform(-10, 250));
        const TimeNs hi = lo + seconds(rng.uniform(0, 60));
        std::vector<std::size_t> expect;
        for (std::size_t i = 0; i < flows.size(); ++i) {
            const auto& f = flows.flows()[i];
            TimeNs end = 0;
            for (std::size_t k = 0; k < std::min<std::size_t>(5, f.size()); ++k)
                end = std::max(end, f.measurements[k].end_ts());
            if (f.start_ts() <= hi && end >= lo) expect.push_back(i);
        }
        EXPECT_EQ(index.overlapping(lo, hi), expect);
    }
}
