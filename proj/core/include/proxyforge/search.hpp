#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "proxyforge/bench_types.hpp"
#include "proxyforge/dsl.hpp"
#include "proxyforge/rng.hpp"

namespace proxyforge {

struct SearchConfig {
    std::size_t population_size = 80;
    std::size_t generations = 1000;
    double crossover_rate = 0.5;
    double mutation_rate = 0.5;
    double selection_ratio = 0.10;
    std::size_t fitness_sample_size = 50;  // capped at benchmark size
    std::size_t unary_depth = 1;
    std::uint64_t seed = 42;
    bool rps_enabled = true;
    std::size_t max_regen_attempts = 100;
};

void validate(const SearchConfig& config);

struct Candidate {
    SymbolicExpression expr;
    double fitness = kInvalidFitness;
};

struct RpsVerdict {
    bool valid = true;
    std::string rule_id;  // set when invalid
};

/// Scans each branch for the predefined conflict and redundancy compositions
/// (adjacent unary pairs, plus the guaranteed-zero reciprocal triple).
RpsVerdict rps_check(const SymbolicExpression& expr);

/// Fitness evaluation context: captured statistics and ground truth for the
/// benchmark entries, shared across a whole run (and across runs).
class FitnessContext {
public:
    explicit FitnessContext(const BenchmarkFile& bench);

    std::size_t size() const { return stats_.size(); }

    /// Spearman rho between the expression's scores and ground truth over the
    /// given entry subset; the -1 sentinel when more than 20% of the subset
    /// evaluates invalid or the correlation is undefined.
    double fitness(const SymbolicExpression& expr, const std::vector<std::size_t>& subset) const;

private:
    std::vector<NetworkStatistics> stats_;
    std::vector<double> ground_truth_;
};

// -- genetic operators (exposed for tests) --------------------------------------

/// Pool = top ceil(R*p) by fitness (ties broken towards older candidates,
/// expanded to two when smaller); returns two distinct pool indices into the
/// population.
std::pair<std::size_t, std::size_t> tournament_select(const std::vector<Candidate>& population,
                                                      double selection_ratio, Rng& rng);

/// With probability rate: left branch of a, right branch of b, binary op of a;
/// otherwise a copy of a. An operand collision resamples the right operand
/// from the remaining five kinds.
SymbolicExpression crossover(const SymbolicExpression& a, const SymbolicExpression& b, double rate,
                             Rng& rng);

/// With probability rate, resamples exactly one gene (an operand, one unary
/// slot, or the binary op) uniformly from its domain, keeping the two operand
/// kinds distinct.
SymbolicExpression mutate(const SymbolicExpression& expr, double rate, Rng& rng);

// -- full runs -------------------------------------------------------------------

struct GenerationRecord {
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
    std::size_t rps_rejections = 0;
};

struct SearchReport {
    SearchConfig config;
    std::string best_expression;
    double best_fitness = kInvalidFitness;
    std::vector<GenerationRecord> history;
    std::size_t total_rps_rejections = 0;
    std::size_t fitness_evaluations = 0;
    std::size_t sentinel_evaluations = 0;  // evaluations that produced the -1 sentinel
    double winning_rate = 0.0;             // fraction of generations improving the best
};

/// Evolutionary run: p random RPS-valid initials, then one offspring per
/// generation (tournament selection, crossover, mutation, RPS filtering with
/// bounded regeneration) merged under elitist truncation. Exactly
/// p + generations fitness evaluations. Deterministic per seed.
SearchReport run_search(const SearchConfig& config, const FitnessContext& ctx);

/// Same evaluation budget spent on uniform random unfiltered expressions.
SearchReport random_search(const SearchConfig& config, const FitnessContext& ctx);

std::string to_json(const SearchReport& report);

}  // namespace proxyforge
