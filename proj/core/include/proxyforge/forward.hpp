#pragma once

#include <array>
#include <vector>

#include "proxyforge/arch.hpp"
#include "proxyforge/autograd.hpp"
#include "proxyforge/task.hpp"

namespace proxyforge {

/// Tape node ids of the tensors a transformer block exposes: its parameter
/// leaves, the FFN pre-activation/activation, and one post-softmax attention
/// map per head (each n x seq x seq).
struct BlockTrace {
    std::array<NodeId, 6> params{};  // wq, wk, wv, wo, w1, w2
    NodeId preact = 0;
    NodeId act = 0;
    std::vector<NodeId> attn_probs;
};

/// A full traced forward pass over a token batch. Gradient statistics come
/// from backward(loss_ce); the input Jacobian from backward(output_sum).
struct ForwardTrace {
    Tape tape;
    NodeId embedding = 0;  // parameter leaf
    NodeId head = 0;       // parameter leaf
    NodeId embedded = 0;   // (n*seq) x d_model token embeddings
    std::vector<BlockTrace> blocks;
    NodeId logits = 0;      // (n*seq) x vocab
    NodeId probs = 0;       // softmax(logits)
    NodeId loss_ce = 0;     // mean next-token cross-entropy
    NodeId output_sum = 0;  // sum of all logits
    std::size_t n = 0;
    std::size_t seq = 0;
};

ForwardTrace trace_forward(const Model& model, const Batch& batch);

/// Runs the block stack on an already-embedded input node x ((rows) x
/// d_model, rows = n*seq). Used by trace_forward and by data-free scoring
/// passes that substitute their own weights.
NodeId blocks_forward(Tape& tape, NodeId x, std::size_t n, std::size_t seq, const ArchSpec& spec,
                      const std::vector<std::array<NodeId, 6>>& block_params,
                      std::vector<BlockTrace>* out_blocks);

}  // namespace proxyforge
