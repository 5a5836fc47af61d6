#include "proxyforge/proxies.hpp"

#include <cmath>
#include <limits>

#include "proxyforge/autograd.hpp"
#include "proxyforge/dsl.hpp"
#include "proxyforge/forward.hpp"

namespace proxyforge {

std::string proxy_name(ProxyId id) {
    switch (id) {
        case ProxyId::ActivationDistance: return "activation_distance";
        case ProxyId::SynapticSaliency: return "synaptic_saliency";
        case ProxyId::JacobianCosine: return "jacobian_cosine";
        case ProxyId::SynapticDiversity: return "synaptic_diversity";
        case ProxyId::AttentionConfidence: return "attention_confidence";
        case ProxyId::SoftmaxConfidence: return "softmax_confidence";
        case ProxyId::AttentionImportance: return "attention_importance";
        case ProxyId::Snip: return "snip";
        case ProxyId::Grasp: return "grasp";
        case ProxyId::Fisher: return "fisher";
        case ProxyId::LogSynflow: return "logsynflow";
        case ProxyId::Synflow: return "synflow";
        case ProxyId::GradNorm: return "gradnorm";
        case ProxyId::NParams: return "n_params";
        case ProxyId::LpzeroFlexibert: return "lpzero_flexibert";
        case ProxyId::LpzeroGpt2: return "lpzero_gpt2";
        case ProxyId::LpzeroLlama: return "lpzero_llama";
    }
    throw std::invalid_argument("proxy_name: unknown id");
}

std::vector<ProxyId> all_proxies() {
    return {
        ProxyId::ActivationDistance, ProxyId::SynapticSaliency, ProxyId::JacobianCosine,
        ProxyId::SynapticDiversity,  ProxyId::AttentionConfidence, ProxyId::SoftmaxConfidence,
        ProxyId::AttentionImportance, ProxyId::Snip, ProxyId::Grasp, ProxyId::Fisher,
        ProxyId::LogSynflow, ProxyId::Synflow, ProxyId::GradNorm, ProxyId::NParams,
        ProxyId::LpzeroFlexibert, ProxyId::LpzeroGpt2, ProxyId::LpzeroLlama,
    };
}

std::optional<ProxyId> proxy_from_name(const std::string& name) {
    for (ProxyId id : all_proxies()) {
        if (proxy_name(id) == name) return id;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// numeric helpers

std::vector<double> singular_values(const Tensor& m) {
    if (m.ndim() != 2) throw std::invalid_argument("singular_values: not a matrix");
    // work on columns of the taller orientation
    Tensor a = m.rows() >= m.cols() ? m : transpose(m);
    const std::size_t rows = a.rows(), cols = a.cols();
    auto col_dot = [&](std::size_t p, std::size_t q) {
        double s = 0.0;
        for (std::size_t i = 0; i < rows; ++i) s += a[i * cols + p] * a[i * cols + q];
        return s;
    };
    const double tol = 1e-12;
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                const double alpha = col_dot(p, p);
                const double beta = col_dot(q, q);
                const double gamma = col_dot(p, q);
                if (std::fabs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < rows; ++i) {
                    const double ap = a[i * cols + p];
                    const double aq = a[i * cols + q];
                    a[i * cols + p] = c * ap - s * aq;
                    a[i * cols + q] = s * ap + c * aq;
                }
            }
        }
        if (!rotated) break;
    }
    std::vector<double> sv(cols);
    for (std::size_t p = 0; p < cols; ++p) sv[p] = std::sqrt(col_dot(p, p));
    return sv;
}

double logdet_psd(const Tensor& k, double ridge) {
    if (k.ndim() != 2 || k.rows() != k.cols()) {
        throw std::invalid_argument("logdet_psd: not a square matrix");
    }
    const std::size_t n = k.rows();
    std::vector<double> l(n * n, 0.0);
    double logdet = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = k[i * n + j] + (i == j ? ridge : 0.0);
            for (std::size_t p = 0; p < j; ++p) s -= l[i * n + p] * l[j * n + p];
            if (i == j) {
                if (s <= 0.0) return std::numeric_limits<double>::quiet_NaN();
                l[i * n + i] = std::sqrt(s);
                logdet += 2.0 * std::log(l[i * n + i]);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    return logdet;
}

SynflowPass run_synflow_pass(const Model& model) {
    const ArchSpec& spec = model.spec;
    const auto d = static_cast<std::size_t>(spec.d_model);
    const auto seq = static_cast<std::size_t>(spec.seq_len);

    Tape tape;
    std::vector<std::array<NodeId, 6>> block_params;
    SynflowPass pass;
    pass.abs_weights.resize(model.blocks.size());
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        const Block& blk = model.blocks[b];
        std::array<NodeId, 6> ids{};
        const Tensor* ws[6] = {&blk.wq, &blk.wk, &blk.wv, &blk.wo, &blk.w1, &blk.w2};
        for (std::size_t i = 0; i < 6; ++i) {
            Tensor aw = abs(*ws[i]);
            pass.abs_weights[b].push_back(aw);
            ids[i] = tape.leaf(std::move(aw));
        }
        block_params.push_back(ids);
    }
    const NodeId head = tape.leaf(abs(model.head));
    const NodeId input = tape.leaf(Tensor::ones({seq, d}));  // one all-ones "sample"

    const NodeId hidden = blocks_forward(tape, input, 1, seq, spec, block_params, nullptr);
    const NodeId logits = tape.matmul(hidden, head);
    const NodeId loss = tape.sum(logits);

    const std::vector<Tensor> grads = tape.backward(loss);
    pass.grads.resize(model.blocks.size());
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        for (NodeId id : block_params[b]) pass.grads[b].push_back(grads[id]);
    }
    return pass;
}

// ---------------------------------------------------------------------------
// scorers

namespace {

std::optional<double> finite_or_invalid(double v) {
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

// NWOT-style kernel over binarized FFN activation codes; one code per sample.
double activation_distance_block(const BlockStats& bs) {
    const Tensor& signs = bs.preact_signs;  // n x seq x d_ffn
    const std::size_t n = signs.dim(0);
    const std::size_t code_len = signs.dim(1) * signs.dim(2);
    Tensor kernel({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double hamming = 0.0;
            const double* ci = signs.data().data() + i * code_len;
            const double* cj = signs.data().data() + j * code_len;
            for (std::size_t t = 0; t < code_len; ++t) hamming += ci[t] != cj[t] ? 1.0 : 0.0;
            const double k = static_cast<double>(code_len) - hamming;
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }
    return logdet_psd(kernel, 1e-6);
}

double jacobian_cosine(const NetworkStatistics& stats) {
    const Tensor& jac = stats.jacobian;  // n x dim
    const std::size_t n = jac.rows(), dim = jac.cols();
    Tensor normalized = jac;
    for (std::size_t i = 0; i < n; ++i) {
        double norm = 0.0;
        for (std::size_t t = 0; t < dim; ++t) {
            norm += jac[i * dim + t] * jac[i * dim + t];
        }
        norm = std::sqrt(norm);
        for (std::size_t t = 0; t < dim; ++t) normalized[i * dim + t] /= norm;
    }
    // sum over [J J^T - I] entries through the signed 1/20-th power
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double cos_ij = 0.0;
            for (std::size_t t = 0; t < dim; ++t) {
                cos_ij += normalized[i * dim + t] * normalized[j * dim + t];
            }
            const double m = cos_ij - (i == j ? 1.0 : 0.0);
            const double powed = (m >= 0.0 ? 1.0 : -1.0) * std::pow(std::fabs(m), 1.0 / 20.0);
            acc += powed;
        }
    }
    return 1.0 - acc / static_cast<double>(n * n - n);
}

double dot_mul_sum(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        for (std::size_t i = 0; i < a[t].numel(); ++i) s += a[t][i] * b[t][i];
    }
    return s;
}

double grasp_score(const Model& model, const NetworkStatistics& stats) {
    // -(H g) . theta over the block weights, embedding and head held fixed
    std::vector<Tensor> params;
    std::size_t total = 0;
    for (const Block& b : model.blocks) {
        for (const Tensor* w : {&b.wq, &b.wk, &b.wv, &b.wo, &b.w1, &b.w2}) {
            params.push_back(*w);
            total += w->numel();
        }
    }
    Tensor g({total});
    {
        std::size_t offset = 0;
        for (const BlockStats& bs : stats.blocks) {
            for (const Tensor& gw : bs.weight_grads) {
                for (std::size_t i = 0; i < gw.numel(); ++i) g[offset + i] = gw[i];
                offset += gw.numel();
            }
        }
    }

    const Batch& batch = stats.batch;
    const Model* model_ptr = &model;
    LossFn loss_fn = [model_ptr, &batch](const std::vector<Tensor>& p) {
        Model shifted = *model_ptr;
        std::size_t idx = 0;
        for (Block& b : shifted.blocks) {
            b.wq = p[idx++];
            b.wk = p[idx++];
            b.wv = p[idx++];
            b.wo = p[idx++];
            b.w1 = p[idx++];
            b.w2 = p[idx++];
        }
        ForwardTrace trace = trace_forward(shifted, batch);
        LossProbe probe;
        probe.loss = trace.loss_ce;
        for (const BlockTrace& bt : trace.blocks) {
            for (NodeId id : bt.params) probe.param_nodes.push_back(id);
        }
        probe.tape = std::move(trace.tape);
        return probe;
    };

    const Tensor hg = hvp(loss_fn, params, g);
    double s = 0.0;
    std::size_t offset = 0;
    for (const Tensor& p : params) {
        for (std::size_t i = 0; i < p.numel(); ++i) s += -hg[offset + i] * p[i];
        offset += p.numel();
    }
    return s;
}

}  // namespace

std::optional<double> score(ProxyId id, const Model& model, const NetworkStatistics& stats) {
    switch (id) {
        case ProxyId::NParams:
            return static_cast<double>(model.param_count());

        case ProxyId::SynapticSaliency: {
            double s = 0.0;
            for (const BlockStats& bs : stats.blocks) s += dot_mul_sum(bs.weight_grads, bs.weights);
            return finite_or_invalid(s);
        }

        case ProxyId::Snip: {
            double s = 0.0;
            for (const BlockStats& bs : stats.blocks) {
                for (std::size_t t = 0; t < bs.weights.size(); ++t) {
                    const Tensor& w = bs.weights[t];
                    const Tensor& g = bs.weight_grads[t];
                    for (std::size_t i = 0; i < w.numel(); ++i) s += std::fabs(g[i] * w[i]);
                }
            }
            return finite_or_invalid(s);
        }

        case ProxyId::GradNorm: {
            double s = 0.0;
            for (const BlockStats& bs : stats.blocks) {
                double sq = 0.0;
                for (const Tensor& g : bs.weight_grads) {
                    for (std::size_t i = 0; i < g.numel(); ++i) sq += g[i] * g[i];
                }
                s += std::sqrt(sq);
            }
            return finite_or_invalid(s);
        }

        case ProxyId::Fisher: {
            // per-channel (A . dL/dA) over batch and positions, squared, summed
            double s = 0.0;
            for (const BlockStats& bs : stats.blocks) {
                const Tensor& a = bs.activations;
                const Tensor& g = bs.activation_grads;
                const std::size_t channels = a.dim(2);
                const std::size_t rows = a.numel() / channels;
                for (std::size_t c = 0; c < channels; ++c) {
                    double chan = 0.0;
                    for (std::size_t r = 0; r < rows; ++r) {
                        chan += a[r * channels + c] * g[r * channels + c];
                    }
                    s += chan * chan;
                }
            }
            return finite_or_invalid(s);
        }

        case ProxyId::AttentionConfidence: {
            // mean over (head, sample) of the max attention entry, summed over blocks
            double s = 0.0;
            for (const BlockStats& bs : stats.blocks) {
                const Tensor& h = bs.attn_probs;  // heads x n x seq x seq
                const std::size_t heads = h.dim(0), n = h.dim(1);
                const std::size_t map_len = h.dim(2) * h.dim(3);
                double acc = 0.0;
                for (std::size_t u = 0; u < heads * n; ++u) {
                    double mx = h[u * map_len];
                    for (std::size_t t = 1; t < map_len; ++t) mx = std::max(mx, h[u * map_len + t]);
                    acc += mx;
                }
                s += acc / static_cast<double>(heads * n);
            }
            return finite_or_invalid(s);
        }

        case ProxyId::SoftmaxConfidence: {
            // mean over samples of the max output probability
            const Tensor& probs = stats.output_probs;  // n x seq x vocab
            const std::size_t n = probs.dim(0);
            const std::size_t per_sample = probs.dim(1) * probs.dim(2);
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double mx = probs[i * per_sample];
                for (std::size_t t = 1; t < per_sample; ++t) {
                    mx = std::max(mx, probs[i * per_sample + t]);
                }
                acc += mx;
            }
            return finite_or_invalid(acc / static_cast<double>(n));
        }

        case ProxyId::AttentionImportance: {
            // |dL/dAtt| summed over every attention map entry
            double s = 0.0;
            for (const BlockStats& bs : stats.blocks) {
                for (std::size_t i = 0; i < bs.attn_grads.numel(); ++i) {
                    s += std::fabs(bs.attn_grads[i]);
                }
            }
            return finite_or_invalid(s);
        }

        case ProxyId::ActivationDistance: {
            double s = 0.0;
            for (const BlockStats& bs : stats.blocks) s += activation_distance_block(bs);
            return finite_or_invalid(s);
        }

        case ProxyId::JacobianCosine:
            return finite_or_invalid(jacobian_cosine(stats));

        case ProxyId::SynapticDiversity: {
            // ||dL/dW||_F * ||W||_nuc over the attention projections
            double s = 0.0;
            for (const BlockStats& bs : stats.blocks) {
                for (std::size_t t = 0; t < 4; ++t) {  // wq, wk, wv, wo
                    double gnorm = 0.0;
                    const Tensor& g = bs.weight_grads[t];
                    for (std::size_t i = 0; i < g.numel(); ++i) gnorm += g[i] * g[i];
                    gnorm = std::sqrt(gnorm);
                    double nuc = 0.0;
                    for (double sv : singular_values(bs.weights[t])) nuc += sv;
                    s += gnorm * nuc;
                }
            }
            return finite_or_invalid(s);
        }

        case ProxyId::Synflow: {
            const SynflowPass pass = run_synflow_pass(model);
            double s = 0.0;
            for (std::size_t b = 0; b < pass.grads.size(); ++b) {
                s += dot_mul_sum(pass.grads[b], pass.abs_weights[b]);
            }
            return finite_or_invalid(s);
        }

        case ProxyId::LogSynflow: {
            const SynflowPass pass = run_synflow_pass(model);
            double s = 0.0;
            for (std::size_t b = 0; b < pass.grads.size(); ++b) {
                for (std::size_t t = 0; t < pass.grads[b].size(); ++t) {
                    const Tensor& g = pass.grads[b][t];
                    const Tensor& w = pass.abs_weights[b][t];
                    for (std::size_t i = 0; i < g.numel(); ++i) {
                        s += w[i] * std::fabs(std::log(std::fabs(g[i])));
                    }
                }
            }
            return finite_or_invalid(s);
        }

        case ProxyId::Grasp: {
            try {
                return finite_or_invalid(grasp_score(model, stats));
            } catch (const NumericError&) {
                return std::nullopt;
            }
        }

        case ProxyId::LpzeroFlexibert:
            return evaluate(parse_expression(kLpzeroFlexibertGenotype), stats);
        case ProxyId::LpzeroGpt2:
            return evaluate(parse_expression(kLpzeroGpt2Genotype), stats);
        case ProxyId::LpzeroLlama:
            return evaluate(parse_expression(kLpzeroLlamaGenotype), stats);
    }
    throw std::invalid_argument("score: unknown proxy id");
}

std::map<ProxyId, std::optional<double>> score_all(const Model& model,
                                                   const NetworkStatistics& stats) {
    std::map<ProxyId, std::optional<double>> out;
    for (ProxyId id : all_proxies()) {
        try {
            out[id] = score(id, model, stats);
        } catch (const std::exception&) {
            out[id] = std::nullopt;
        }
    }
    return out;
}

}  // namespace proxyforge
