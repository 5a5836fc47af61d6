#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "proxyforge/bench_types.hpp"
#include "proxyforge/rank.hpp"
#include "proxyforge/stats.hpp"

namespace proxyforge {

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-entry model seed; entry i trains (and is later re-captured) from the
/// same deterministic initialization.
std::uint64_t entry_seed(std::uint64_t master_seed, std::size_t entry_index);

/// Seed of the shared statistics mini-batch all proxies see.
std::uint64_t capture_batch_seed(const TaskSpec& task);

/// Trains n_archs toy transformers on the synthetic task with plain SGD and
/// records the negative validation loss as ground truth. n_archs picks the
/// full grid when equal to its size, otherwise a seeded uniform subset.
/// Entries whose training diverges are flagged; more than 10% flagged is a
/// build error. Deterministic per seed.
BenchmarkFile build_benchmark(std::size_t n_archs, std::size_t train_steps, std::uint64_t seed);

void save_benchmark(const BenchmarkFile& bench, const std::filesystem::path& path);
BenchmarkFile load_benchmark(const std::filesystem::path& path);  // version-checked

/// One proxy (or expression) scored against every benchmark entry.
struct EvalRow {
    ArchSpec arch;
    std::optional<double> score;  // nullopt = invalid
    double ground_truth = 0.0;
};

struct EvalReport {
    std::string target;  // proxy id or expression string
    RankingResult ranking;
    std::vector<EvalRow> rows;  // one per benchmark entry
    double seconds = 0.0;
};

/// Scores a proxy id or a DSL expression string over the whole benchmark.
/// Unknown ids / unparsable expressions are usage errors
/// (std::invalid_argument).
EvalReport eval_proxy(const std::string& target, const BenchmarkFile& bench);

std::string to_json(const EvalReport& report);
EvalReport eval_report_from_json(const std::string& text);
void save_eval_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_eval_report(const std::filesystem::path& path);

/// Correlation table over several eval reports, RFC-4180, sorted by
/// descending Spearman rho (undefined metrics sort last and print empty).
std::string report_csv(const std::vector<EvalReport>& reports);

std::string arch_to_json(const ArchSpec& spec);
ArchSpec arch_from_json(const std::string& text);

}  // namespace proxyforge
