#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "ifsd/flow_model.hpp"

namespace testutil {

using ifsd::FlowRecord;
using ifsd::millis;
using ifsd::seconds;

// Periodic flow with constant delays.
inline FlowRecord periodic(std::string id, double start_s, double period_s, std::size_t n, double delay_ms = 5,
                           std::string app = "web") {
    FlowRecord f{std::move(id), std::move(app), "tcp", {}};
    for (std::size_t i = 0; i < n; ++i)
        f.measurements.push_back({seconds(start_s + period_s * static_cast<double>(i)), millis(delay_ms)});
    return f;
}

// One measurement per second from `start_s`, with the given delays in ms.
inline FlowRecord with_delays(std::string id, double start_s, const std::vector<double>& delays_ms) {
    FlowRecord f{std::move(id), "web", "tcp", {}};
    for (std::size_t i = 0; i < delays_ms.size(); ++i)
        f.measurements.push_back({seconds(start_s + static_cast<double>(i)), millis(delays_ms[i])});
    return f;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("ifsd_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testutil
