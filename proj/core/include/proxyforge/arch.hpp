#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "proxyforge/rng.hpp"
#include "proxyforge/tensor.hpp"

namespace proxyforge {

/// Toy transformer configuration. The grid is deliberately small (108 valid
/// combinations with the default choice sets) so exhaustive experiments stay
/// desk-scale.
struct ArchSpec {
    int n_layers = 1;
    int d_model = 8;
    int n_heads = 1;
    int d_ffn = 16;
    int vocab_size = 16;
    int seq_len = 12;

    bool operator==(const ArchSpec&) const = default;
};

inline constexpr std::array<int, 4> kLayerChoices = {1, 2, 3, 4};
inline constexpr std::array<int, 3> kModelDimChoices = {8, 16, 32};
inline constexpr std::array<int, 3> kHeadChoices = {1, 2, 4};
inline constexpr std::array<int, 3> kFfnDimChoices = {16, 32, 64};

/// Every field in its choice set and d_model divisible by n_heads.
bool is_valid(const ArchSpec& spec);

/// Uniform over the valid cartesian product; deterministic given the
/// generator state.
ArchSpec sample_arch(Rng& rng);

/// Full grid in lexicographic order of (n_layers, d_model, n_heads, d_ffn),
/// head-divisibility violations excluded.
std::vector<ArchSpec> enumerate_archs();

/// One transformer block: attention projections and the two FFN matrices.
struct Block {
    Tensor wq, wk, wv, wo;  // d_model x d_model
    Tensor w1;              // d_model x d_ffn
    Tensor w2;              // d_ffn x d_model
};

struct Model {
    ArchSpec spec;
    Tensor embedding;  // vocab x d_model
    std::vector<Block> blocks;
    Tensor head;  // d_model x vocab

    std::size_t param_count() const;
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
};

/// Weights drawn from U(-a, a), a = sqrt(6 / (fan_in + fan_out)), in a fixed
/// order, so a (spec, seed) pair always produces bitwise-identical weights.
Model build_model(const ArchSpec& spec, std::uint64_t seed);

}  // namespace proxyforge
