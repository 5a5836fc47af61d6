#include "proxyforge/arch.hpp"

#include <cmath>
#include <stdexcept>

namespace proxyforge {

namespace {

template <std::size_t N>
bool contains(const std::array<int, N>& set, int v) {
    for (int s : set) {
        if (s == v) return true;
    }
    return false;
}

}  // namespace

bool is_valid(const ArchSpec& spec) {
    if (!contains(kLayerChoices, spec.n_layers)) return false;
    if (!contains(kModelDimChoices, spec.d_model)) return false;
    if (!contains(kHeadChoices, spec.n_heads)) return false;
    if (!contains(kFfnDimChoices, spec.d_ffn)) return false;
    if (spec.vocab_size < 2 || spec.seq_len < 2) return false;
    return spec.d_model % spec.n_heads == 0;
}

ArchSpec sample_arch(Rng& rng) {
    // Rejection keeps the draw uniform over the valid subset; the default
    // choice sets never reject.
    for (;;) {
        ArchSpec spec;
        spec.n_layers = kLayerChoices[rng.index(kLayerChoices.size())];
        spec.d_model = kModelDimChoices[rng.index(kModelDimChoices.size())];
        spec.n_heads = kHeadChoices[rng.index(kHeadChoices.size())];
        spec.d_ffn = kFfnDimChoices[rng.index(kFfnDimChoices.size())];
        if (is_valid(spec)) return spec;
    }
}

std::vector<ArchSpec> enumerate_archs() {
    std::vector<ArchSpec> out;
    for (int layers : kLayerChoices) {
        for (int d_model : kModelDimChoices) {
            for (int heads : kHeadChoices) {
                for (int d_ffn : kFfnDimChoices) {
                    ArchSpec spec{layers, d_model, heads, d_ffn};
                    if (is_valid(spec)) out.push_back(spec);
                }
            }
        }
    }
    return out;
}

std::size_t Model::param_count() const {
    std::size_t n = 0;
    for (const Tensor* p : parameters()) n += p->numel();
    return n;
}

std::vector<Tensor*> Model::parameters() {
    std::vector<Tensor*> out;
    out.push_back(&embedding);
    for (Block& b : blocks) {
        out.push_back(&b.wq);
        out.push_back(&b.wk);
        out.push_back(&b.wv);
        out.push_back(&b.wo);
        out.push_back(&b.w1);
        out.push_back(&b.w2);
    }
    out.push_back(&head);
    return out;
}

std::vector<const Tensor*> Model::parameters() const {
    std::vector<const Tensor*> out;
    out.push_back(&embedding);
    for (const Block& b : blocks) {
        out.push_back(&b.wq);
        out.push_back(&b.wk);
        out.push_back(&b.wv);
        out.push_back(&b.wo);
        out.push_back(&b.w1);
        out.push_back(&b.w2);
    }
    out.push_back(&head);
    return out;
}

namespace {

Tensor init_matrix(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor out({fan_in, fan_out});
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = rng.uniform(-a, a);
    return out;
}

}  // namespace

Model build_model(const ArchSpec& spec, std::uint64_t seed) {
    if (!is_valid(spec)) throw std::invalid_argument("build_model: invalid ArchSpec");
    Rng rng(seed);
    Model m;
    m.spec = spec;
    const auto d = static_cast<std::size_t>(spec.d_model);
    const auto f = static_cast<std::size_t>(spec.d_ffn);
    const auto v = static_cast<std::size_t>(spec.vocab_size);
    m.embedding = init_matrix(v, d, rng);
    m.blocks.resize(static_cast<std::size_t>(spec.n_layers));
    for (Block& b : m.blocks) {
        b.wq = init_matrix(d, d, rng);
        b.wk = init_matrix(d, d, rng);
        b.wv = init_matrix(d, d, rng);
        b.wo = init_matrix(d, d, rng);
        b.w1 = init_matrix(d, f, rng);
        b.w2 = init_matrix(f, d, rng);
    }
    m.head = init_matrix(d, v, rng);
    return m;
}

}  // namespace proxyforge
