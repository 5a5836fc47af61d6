#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "proxyforge/arch.hpp"
#include "proxyforge/stats.hpp"

namespace proxyforge {

/// The 13 handcrafted proxies, the parameter-count baseline, and the three
/// searched proxies (evaluated through their DSL genotypes).
enum class ProxyId : std::uint8_t {
    ActivationDistance,
    SynapticSaliency,
    JacobianCosine,
    SynapticDiversity,
    AttentionConfidence,
    SoftmaxConfidence,
    AttentionImportance,
    Snip,
    Grasp,
    Fisher,
    LogSynflow,
    Synflow,
    GradNorm,
    NParams,
    LpzeroFlexibert,
    LpzeroGpt2,
    LpzeroLlama,
};

/// Documented genotypes of the three searched proxies.
inline constexpr const char* kLpzeroFlexibertGenotype = "H:f08,f04|g01|A:f10,f13,f01";
inline constexpr const char* kLpzeroGpt2Genotype = "G:f16,f03|g01|W:f17,f03,f01";
inline constexpr const char* kLpzeroLlamaGenotype = "W:f12,f04|g01|W:f13,f06";

std::string proxy_name(ProxyId id);
std::optional<ProxyId> proxy_from_name(const std::string& name);
std::vector<ProxyId> all_proxies();

/// Scores one proxy from the captured statistics (plus a dedicated data-free
/// pass for Synflow/LogSynflow and a Hessian-vector probe for GraSP). Block
/// scores are aggregated by summation. nullopt marks an invalid (non-finite)
/// score.
std::optional<double> score(ProxyId id, const Model& model, const NetworkStatistics& stats);

/// Scores every registered proxy; per-proxy failures are isolated as nullopt.
std::map<ProxyId, std::optional<double>> score_all(const Model& model,
                                                   const NetworkStatistics& stats);

// -- numeric helpers (exposed for tests) ---------------------------------------

/// Singular values by one-sided Jacobi rotations; fine for the small matrices
/// that appear in toy blocks.
std::vector<double> singular_values(const Tensor& m);

/// log(det(K + ridge I)) via Cholesky; K must be symmetric PSD.
double logdet_psd(const Tensor& k, double ridge);

/// Data-free saliency pass: weights replaced by |w|, an all-ones embedded
/// input, loss = sum of outputs. Returns per-block |weights| and their
/// gradients (wq, wk, wv, wo, w1, w2 order).
struct SynflowPass {
    std::vector<std::vector<Tensor>> abs_weights;
    std::vector<std::vector<Tensor>> grads;
};
SynflowPass run_synflow_pass(const Model& model);

}  // namespace proxyforge
