#pragma once

#include <cstddef>
#include <optional>
#include <span>

namespace proxyforge {

/// Rank-correlation summary over one proxy/ground-truth pairing. Metrics are
/// computed over valid pairs only; n_invalid reports how many were excluded.
struct RankingResult {
    std::optional<double> spearman_rho;
    std::optional<double> kendall_tau;
    std::size_t n = 0;
    std::size_t n_invalid = 0;
};

/// Spearman's rho: tie-aware average ranks, then Pearson correlation of the
/// ranks. Undefined (nullopt) when either vector is constant. Lengths must be
/// equal and >= 3.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

/// Kendall's tau-b by O(n^2) pair counting with tie correction. Undefined
/// when either vector is all ties. Lengths must be equal and >= 2.
std::optional<double> kendall(std::span<const double> x, std::span<const double> y);

}  // namespace proxyforge
