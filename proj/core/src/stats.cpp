#include "proxyforge/stats.hpp"

#include <cmath>

#include "proxyforge/forward.hpp"

namespace proxyforge {

char operand_letter(OperandKind kind) {
    switch (kind) {
        case OperandKind::A: return 'A';
        case OperandKind::J: return 'J';
        case OperandKind::G: return 'G';
        case OperandKind::H: return 'H';
        case OperandKind::W: return 'W';
        case OperandKind::S: return 'S';
    }
    throw std::invalid_argument("operand_letter: unknown kind");
}

OperandKind operand_from_letter(char c) {
    switch (c) {
        case 'A': return OperandKind::A;
        case 'J': return OperandKind::J;
        case 'G': return OperandKind::G;
        case 'H': return OperandKind::H;
        case 'W': return OperandKind::W;
        case 'S': return OperandKind::S;
    }
    throw std::invalid_argument("operand_from_letter: unknown operand kind");
}

namespace {

Tensor stack_heads(const Tape& tape, const std::vector<NodeId>& ids) {
    // heads x n x seq x seq from per-head n x seq x seq values
    const Tensor& first = tape.value(ids[0]);
    const std::size_t per_head = first.numel();
    Tensor out({ids.size(), first.dim(0), first.dim(1), first.dim(2)});
    for (std::size_t h = 0; h < ids.size(); ++h) {
        const Tensor& v = tape.value(ids[h]);
        for (std::size_t i = 0; i < per_head; ++i) out[h * per_head + i] = v[i];
    }
    return out;
}

Tensor stack_heads_grads(const std::vector<Tensor>& grads, const std::vector<NodeId>& ids) {
    const Tensor& first = grads[ids[0]];
    const std::size_t per_head = first.numel();
    Tensor out({ids.size(), first.dim(0), first.dim(1), first.dim(2)});
    for (std::size_t h = 0; h < ids.size(); ++h) {
        const Tensor& v = grads[ids[h]];
        for (std::size_t i = 0; i < per_head; ++i) out[h * per_head + i] = v[i];
    }
    return out;
}

Tensor reshaped(const Tensor& t, std::vector<std::size_t> shape) {
    return Tensor(std::move(shape), t.data());
}

}  // namespace

NetworkStatistics capture(const Model& model, const Batch& batch, LossKind loss) {
    (void)loss;  // cross-entropy is the only loss kind
    ForwardTrace trace = trace_forward(model, batch);

    const double loss_value = trace.tape.value(trace.loss_ce).item();
    if (!std::isfinite(loss_value)) {
        throw CaptureError("capture: non-finite loss, architecture flagged unusable");
    }

    NetworkStatistics stats;
    stats.spec = model.spec;
    stats.batch = batch;
    stats.loss = loss_value;

    const auto n = trace.n;
    const auto seq = trace.seq;
    const auto d = static_cast<std::size_t>(model.spec.d_model);
    const auto f = static_cast<std::size_t>(model.spec.d_ffn);
    const auto vocab = static_cast<std::size_t>(model.spec.vocab_size);

    const std::vector<Tensor> ce_grads = trace.tape.backward(trace.loss_ce);

    stats.blocks.resize(trace.blocks.size());
    for (std::size_t b = 0; b < trace.blocks.size(); ++b) {
        const BlockTrace& bt = trace.blocks[b];
        BlockStats& bs = stats.blocks[b];
        for (NodeId pid : bt.params) {
            bs.weights.push_back(trace.tape.value(pid));
            bs.weight_grads.push_back(ce_grads[pid]);
        }
        bs.activations = reshaped(trace.tape.value(bt.act), {n, seq, f});
        bs.activation_grads = reshaped(ce_grads[bt.act], {n, seq, f});
        const Tensor& pre = trace.tape.value(bt.preact);
        Tensor signs({n, seq, f});
        for (std::size_t i = 0; i < pre.numel(); ++i) signs[i] = pre[i] > 0.0 ? 1.0 : 0.0;
        bs.preact_signs = std::move(signs);
        bs.attn_probs = stack_heads(trace.tape, bt.attn_probs);
        bs.attn_grads = stack_heads_grads(ce_grads, bt.attn_probs);
    }

    stats.output_probs = reshaped(trace.tape.value(trace.probs), {n, seq, vocab});

    const std::vector<Tensor> sum_grads = trace.tape.backward(trace.output_sum);
    stats.jacobian = reshaped(sum_grads[trace.embedded], {n, seq * d});

    return stats;
}

Tensor operand(const NetworkStatistics& stats, OperandKind kind, std::size_t block) {
    const bool per_block = kind == OperandKind::A || kind == OperandKind::G ||
                           kind == OperandKind::H || kind == OperandKind::W;
    if (per_block && block >= stats.blocks.size()) {
        throw std::invalid_argument("operand: block index out of range");
    }
    switch (kind) {
        case OperandKind::A:
            return stats.blocks[block].activations;
        case OperandKind::J:
            return stats.jacobian;
        case OperandKind::H:
            return stats.blocks[block].attn_probs;
        case OperandKind::S:
            return stats.output_probs;
        case OperandKind::G:
        case OperandKind::W: {
            const std::vector<Tensor>& parts = kind == OperandKind::G
                                                   ? stats.blocks[block].weight_grads
                                                   : stats.blocks[block].weights;
            std::size_t total = 0;
            for (const Tensor& t : parts) total += t.numel();
            Tensor out({total});
            std::size_t offset = 0;
            for (const Tensor& t : parts) {
                for (std::size_t i = 0; i < t.numel(); ++i) out[offset + i] = t[i];
                offset += t.numel();
            }
            return out;
        }
    }
    throw std::invalid_argument("operand: unknown operand kind");
}

}  // namespace proxyforge
