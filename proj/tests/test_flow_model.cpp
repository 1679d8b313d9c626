#include <gtest/gtest.h>

#include "helpers.hpp"
#include "ifsd/error.hpp"
#include "ifsd/flow_model.hpp"

using namespace ifsd;
using testutil::with_delays;

namespace {

bool has(const std::vector<Violation>& v, ViolationKind k) {
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.kind == k; });
}

}  // namespace

TEST(Jitter, ConstantSeriesIsZero) {
    auto j = jitter_of(with_delays("a", 0, {10, 10, 10}));
    EXPECT_EQ(j.values, (std::vector<DurationNs>{0, 0}));
}

TEST(Jitter, SuccessiveAbsoluteDifferences) {
    auto j = jitter_of(with_delays("a", 0, {10, 13, 9}));
    EXPECT_EQ(j.values, (std::vector<DurationNs>{millis(3), millis(4)}));
}

TEST(Jitter, SingleMeasurementIsTooShort) {
    EXPECT_THROW(jitter_of(with_delays("a", 0, {10})), SeriesTooShort);
}

TEST(Jitter, LengthAndSignOnManySeries) {
    for (std::size_t n = 2; n < 40; ++n) {
        std::vector<double> d;
        for (std::size_t i = 0; i < n; ++i) d.push_back(static_cast<double>((i * 7919) % 23));
        auto j = jitter_of(with_delays("a", 0, d));
        ASSERT_EQ(j.values.size(), n - 1);
        for (auto v : j.values) EXPECT_GE(v, 0);
    }
}

TEST(ValidateFlow, MinimalFlowIsValid) {
    EXPECT_TRUE(validate_flow(with_delays("a", 0, {10})).empty());
}

TEST(ValidateFlow, ReportsEveryViolation) {
    FlowRecord f{"a", "web", "tcp", {{seconds(2), millis(1)}, {seconds(1), millis(1)}}};
    EXPECT_TRUE(has(validate_flow(f), ViolationKind::unsorted_measurements));

    FlowRecord neg{"b", "web", "tcp", {{0, -5}}};
    EXPECT_TRUE(has(validate_flow(neg), ViolationKind::negative_duration));

    FlowRecord bad{"c,d", "mail", "sctp", {}};
    auto v = validate_flow(bad);
    EXPECT_TRUE(has(v, ViolationKind::invalid_id));
    EXPECT_TRUE(has(v, ViolationKind::empty_measurements));
    EXPECT_TRUE(has(v, ViolationKind::unknown_app_type));
    EXPECT_TRUE(has(v, ViolationKind::unknown_conn_type));
}

TEST(FlowSet, RejectsDuplicatesAndInvalidFlows) {
    FlowSet s;
    s.add(with_delays("a", 0, {1, 2}));
    EXPECT_THROW(s.add(with_delays("a", 5, {1})), DuplicateId);
    EXPECT_THROW(s.add(FlowRecord{"b", "web", "tcp", {}}), InvalidFlow);
    EXPECT_EQ(s.size(), 1u);
    ASSERT_NE(s.find("a"), nullptr);
    EXPECT_EQ(s.find("zz"), nullptr);
}

TEST(FlowSet, RejectsMeasurementsBeforeOrigin) {
    FlowSet s({}, seconds(10));
    EXPECT_THROW(s.add(with_delays("a", 5, {1})), InvalidFlow);
}

TEST(ONOSplit, ZeroIsRejected) {
    EXPECT_THROW(ONOSplit(0), ConfigError);
    EXPECT_EQ(ONOSplit(5).m, 5u);
}

TEST(Taxonomy, TwoValuedConnIsOneColumn) {
    Taxonomy t;
    EXPECT_EQ(t.app_size(), 3u);
    EXPECT_EQ(t.conn_encoding_size(), 1u);
    t.conn_types = {"tcp", "udp", "quic"};
    EXPECT_EQ(t.conn_encoding_size(), 3u);
}
