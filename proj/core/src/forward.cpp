#include "proxyforge/forward.hpp"

#include <cmath>
#include <stdexcept>

namespace proxyforge {

NodeId blocks_forward(Tape& tape, NodeId x, std::size_t n, std::size_t seq, const ArchSpec& spec,
                      const std::vector<std::array<NodeId, 6>>& block_params,
                      std::vector<BlockTrace>* out_blocks) {
    const auto d = static_cast<std::size_t>(spec.d_model);
    const auto heads = static_cast<std::size_t>(spec.n_heads);
    const std::size_t d_head = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(d_head));

    for (const auto& params : block_params) {
        BlockTrace trace;
        trace.params = params;

        // attention: per-head scaled dot-product over the sequence axis
        const NodeId q2 = tape.matmul(x, params[0]);
        const NodeId k2 = tape.matmul(x, params[1]);
        const NodeId v2 = tape.matmul(x, params[2]);
        const NodeId q3 = tape.reshape(q2, {n, seq, d});
        const NodeId k3 = tape.reshape(k2, {n, seq, d});
        const NodeId v3 = tape.reshape(v2, {n, seq, d});
        std::vector<NodeId> head_ctx;
        head_ctx.reserve(heads);
        for (std::size_t h = 0; h < heads; ++h) {
            const NodeId qh = tape.slice_lastdim(q3, h * d_head, d_head);
            const NodeId kh = tape.slice_lastdim(k3, h * d_head, d_head);
            const NodeId vh = tape.slice_lastdim(v3, h * d_head, d_head);
            const NodeId scores = tape.scale(tape.bmm(qh, kh, /*transpose_b=*/true), inv_sqrt_dh);
            const NodeId probs = tape.softmax_lastaxis(scores);
            trace.attn_probs.push_back(probs);
            head_ctx.push_back(tape.bmm(probs, vh));
        }
        const NodeId ctx = heads == 1 ? head_ctx[0] : tape.concat_lastdim(head_ctx);
        const NodeId ctx2 = tape.reshape(ctx, {n * seq, d});
        const NodeId attn_out = tape.matmul(ctx2, params[3]);
        x = tape.add(x, attn_out);

        // FFN with residual; no normalization layers in this op set
        trace.preact = tape.matmul(x, params[4]);
        trace.act = tape.relu(trace.preact);
        const NodeId ffn_out = tape.matmul(trace.act, params[5]);
        x = tape.add(x, ffn_out);

        if (out_blocks) out_blocks->push_back(trace);
    }
    return x;
}

ForwardTrace trace_forward(const Model& model, const Batch& batch) {
    const ArchSpec& spec = model.spec;
    if (batch.seq != static_cast<std::size_t>(spec.seq_len)) {
        throw std::invalid_argument("trace_forward: batch seq_len does not match the model");
    }
    ForwardTrace t;
    t.n = batch.n;
    t.seq = batch.seq;

    t.embedding = t.tape.leaf(model.embedding);
    std::vector<std::array<NodeId, 6>> block_params;
    block_params.reserve(model.blocks.size());
    for (const Block& b : model.blocks) {
        block_params.push_back({t.tape.leaf(b.wq), t.tape.leaf(b.wk), t.tape.leaf(b.wv),
                                t.tape.leaf(b.wo), t.tape.leaf(b.w1), t.tape.leaf(b.w2)});
    }
    t.head = t.tape.leaf(model.head);

    std::vector<std::size_t> rows(batch.tokens.size());
    for (std::size_t i = 0; i < batch.tokens.size(); ++i) {
        const int tok = batch.tokens[i];
        if (tok < 0 || tok >= spec.vocab_size) {
            throw std::invalid_argument("trace_forward: token out of vocabulary");
        }
        rows[i] = static_cast<std::size_t>(tok);
    }
    t.embedded = t.tape.gather_rows(t.embedding, rows);

    const NodeId hidden = blocks_forward(t.tape, t.embedded, t.n, t.seq, spec, block_params, &t.blocks);
    t.logits = t.tape.matmul(hidden, t.head);
    t.probs = t.tape.softmax_lastaxis(t.logits);
    t.output_sum = t.tape.sum(t.logits);

    // next-token cross-entropy: position p predicts the token at p+1
    const NodeId log_probs = t.tape.log_softmax_lastaxis(t.logits);
    const auto vocab = static_cast<std::size_t>(spec.vocab_size);
    std::vector<std::size_t> target_index;
    target_index.reserve(t.n * (t.seq - 1));
    for (std::size_t i = 0; i < t.n; ++i) {
        for (std::size_t p = 0; p + 1 < t.seq; ++p) {
            const auto target = static_cast<std::size_t>(batch.at(i, p + 1));
            target_index.push_back((i * t.seq + p) * vocab + target);
        }
    }
    const NodeId picked = t.tape.gather_elements(log_probs, target_index);
    t.loss_ce = t.tape.scale(t.tape.sum(picked), -1.0 / static_cast<double>(target_index.size()));
    return t;
}

}  // namespace proxyforge
