#pragma once

#include <cstdint>
#include <vector>

#include "proxyforge/rng.hpp"

namespace proxyforge {

/// A mini-batch of token sequences, row-major (n x seq).
struct Batch {
    std::size_t n = 0;
    std::size_t seq = 0;
    std::vector<int> tokens;

    int at(std::size_t sample, std::size_t pos) const { return tokens[sample * seq + pos]; }
};

struct TaskSpec {
    int vocab_size = 16;
    int seq_len = 12;
    std::uint64_t task_seed = 0;

    bool operator==(const TaskSpec&) const = default;
};

/// Deterministic second-order Markov token source. Each (prev2, prev1)
/// context prefers one next token (probability 0.6) with the rest uniform,
/// so the next-token task is learnable but not trivial.
class MarkovTask {
public:
    explicit MarkovTask(TaskSpec spec);

    const TaskSpec& spec() const { return spec_; }

    Batch sample_batch(Rng& rng, std::size_t n) const;

private:
    TaskSpec spec_;
    std::vector<double> cdf_;  // (V*V) rows of cumulative next-token probabilities
};

}  // namespace proxyforge
