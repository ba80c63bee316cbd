#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isfm/config.hpp"

namespace isfm {

enum class BenchOp { Scan, Dwt, Forward };

BenchOp parse_bench_op(const std::string& name);
const char* to_string(BenchOp op);

struct BenchPoint {
    std::size_t size = 0;
    double median_seconds = 0.0;
};

struct BenchOptions {
    BenchOp op = BenchOp::Scan;
    std::vector<std::size_t> sizes;
    std::size_t repeats = 3;
    std::uint64_t seed = 1;
    /// Scan: channel count D of the sequence. Dwt: channel count of the map.
    std::size_t channels = 16;
    /// Scan: state size N.
    std::size_t state_size = 16;
    /// Forward: network configuration; sizes are H = W.
    IsfmConfig forward_cfg{};
};

/// Median wall time of `repeats` runs per size after one untimed warm-up run.
/// Each round times every size once, in order.
/// Scan sizes are sequence lengths, dwt/forward sizes are square image extents.
std::vector<BenchPoint> run_bench(const BenchOptions& opt);

/// Least-squares slope of log(time) against log(size).
double loglog_slope(const std::vector<BenchPoint>& points);

}  // namespace isfm
