#pragma once

#include <string_view>

namespace ifsd {

inline constexpr std::string_view kVersion = "1.0.0";

// Format identifiers; files that carry a header line start with these.
inline constexpr std::string_view kTraceFormat = "ifsd-trace v1";
inline constexpr std::string_view kLabelFormat = "ifsd-labels v1";
inline constexpr std::string_view kSpaceFormat = "ifsd-space v1";
inline constexpr std::string_view kSchemaFormat = "ifsd-feature-schema v1";
inline constexpr std::string_view kMetricsFormat = "ifsd-metrics v1";

}  // namespace ifsd
