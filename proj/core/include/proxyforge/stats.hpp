#pragma once

#include <stdexcept>
#include <vector>

#include "proxyforge/arch.hpp"
#include "proxyforge/task.hpp"
#include "proxyforge/tensor.hpp"

namespace proxyforge {

/// The six operand families every proxy reads: Activations, input Jacobian,
/// weight Gradients, attention Head distributions, Weights, Softmax outputs.
enum class OperandKind : std::uint8_t { A, J, G, H, W, S };

char operand_letter(OperandKind kind);
OperandKind operand_from_letter(char c);

enum class LossKind : std::uint8_t { CrossEntropy };

class CaptureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BlockStats {
    std::vector<Tensor> weights;       // wq, wk, wv, wo, w1, w2
    std::vector<Tensor> weight_grads;  // matching dL/dW
    Tensor activations;                // n x seq x d_ffn, post-ReLU
    Tensor activation_grads;           // dL/dA, same shape
    Tensor preact_signs;               // 1 where the FFN pre-activation is > 0
    Tensor attn_probs;                 // heads x n x seq x seq
    Tensor attn_grads;                 // dL/d(attn_probs), same shape
};

/// Everything one forward+backward pass on a mini-batch yields. Deterministic
/// for a fixed (model, batch).
struct NetworkStatistics {
    ArchSpec spec;
    Batch batch;
    std::vector<BlockStats> blocks;
    Tensor output_probs;  // S: n x seq x vocab
    Tensor jacobian;      // J: n x (seq * d_model), gradient of the summed logits
    double loss = 0.0;
};

/// Runs one traced forward pass and extracts all six operand families.
/// The cross-entropy sweep provides G, dL/dA and dL/dH; a second sweep from
/// the summed logits provides J. Throws CaptureError when the loss is not
/// finite (the architecture is unusable).
NetworkStatistics capture(const Model& model, const Batch& batch,
                          LossKind loss = LossKind::CrossEntropy);

/// Returns the requested operand tensor. W and G are flattened to one vector
/// per block (fixed wq,wk,wv,wo,w1,w2 order); S and J ignore the block index.
Tensor operand(const NetworkStatistics& stats, OperandKind kind, std::size_t block);

}  // namespace proxyforge
