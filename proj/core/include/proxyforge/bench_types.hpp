#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "proxyforge/arch.hpp"
#include "proxyforge/task.hpp"

namespace proxyforge {

inline constexpr const char* kBenchmarkVersion = "proxyforge-bench-v1";

/// Ground truth marker for an entry whose training diverged.
inline constexpr double kDivergedGroundTruth = -std::numeric_limits<double>::infinity();

struct TrainingProtocol {
    std::size_t steps = 300;
    double learning_rate = 0.05;
    std::size_t batch_size = 16;
    std::uint64_t seed = 42;

    bool operator==(const TrainingProtocol&) const = default;
};

struct BenchEntry {
    ArchSpec arch;
    double ground_truth = 0.0;  // negative final validation loss (higher is better)
    std::size_t param_count = 0;
    bool flagged = false;  // training diverged

    bool operator==(const BenchEntry&) const = default;
};

/// Persisted fitness oracle: trained toy architectures with their scores.
struct BenchmarkFile {
    std::string version = kBenchmarkVersion;
    TaskSpec task;
    TrainingProtocol training;
    std::vector<BenchEntry> entries;

    bool operator==(const BenchmarkFile&) const = default;
};

}  // namespace proxyforge
