#include "proxyforge/task.hpp"

#include <stdexcept>

namespace proxyforge {

MarkovTask::MarkovTask(TaskSpec spec) : spec_(spec) {
    if (spec_.vocab_size < 2) throw std::invalid_argument("MarkovTask: vocab_size < 2");
    if (spec_.seq_len < 2) throw std::invalid_argument("MarkovTask: seq_len < 2");
    const auto v = static_cast<std::size_t>(spec_.vocab_size);
    Rng rng(splitmix64(spec_.task_seed ^ 0x7a5a5a5a5a5a5a5aULL));
    cdf_.resize(v * v * v);
    const double preferred_p = 0.6;
    const double rest_p = (1.0 - preferred_p) / static_cast<double>(v - 1);
    for (std::size_t ctx = 0; ctx < v * v; ++ctx) {
        const std::size_t preferred = rng.index(v);
        double acc = 0.0;
        for (std::size_t t = 0; t < v; ++t) {
            acc += (t == preferred) ? preferred_p : rest_p;
            cdf_[ctx * v + t] = acc;
        }
        cdf_[ctx * v + (v - 1)] = 1.0;
    }
}

Batch MarkovTask::sample_batch(Rng& rng, std::size_t n) const {
    const auto v = static_cast<std::size_t>(spec_.vocab_size);
    const auto seq = static_cast<std::size_t>(spec_.seq_len);
    Batch batch;
    batch.n = n;
    batch.seq = seq;
    batch.tokens.resize(n * seq);
    for (std::size_t i = 0; i < n; ++i) {
        int* row = batch.tokens.data() + i * seq;
        row[0] = static_cast<int>(rng.index(v));
        row[1] = static_cast<int>(rng.index(v));
        for (std::size_t t = 2; t < seq; ++t) {
            const std::size_t ctx =
                static_cast<std::size_t>(row[t - 2]) * v + static_cast<std::size_t>(row[t - 1]);
            const double u = rng.uniform();
            const double* cdf_row = cdf_.data() + ctx * v;
            std::size_t tok = 0;
            while (tok + 1 < v && u >= cdf_row[tok]) ++tok;
            row[t] = static_cast<int>(tok);
        }
    }
    return batch;
}

}  // namespace proxyforge
