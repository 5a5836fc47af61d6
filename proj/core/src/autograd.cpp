#include "proxyforge/autograd.hpp"

#include <cmath>
#include <numeric>

namespace proxyforge {

NodeId Tape::check(NodeId id) const {
    if (id >= nodes_.size()) throw std::invalid_argument("Tape: node id not on this tape");
    return id;
}

NodeId Tape::push(Tensor value, Entry entry) {
    const NodeId id = static_cast<NodeId>(nodes_.size());
    entry.out = id;
    nodes_.push_back(std::move(value));
    entries_.push_back(std::move(entry));
    return id;
}

NodeId Tape::leaf(Tensor value) {
    return push(std::move(value), Entry{Op::Leaf});
}

const Tensor& Tape::value(NodeId id) const {
    check(id);
    return nodes_[id];
}

NodeId Tape::add(NodeId a, NodeId b) {
    check(a);
    check(b);
    return push(proxyforge::add(nodes_[a], nodes_[b]), Entry{Op::Add, a, b});
}

NodeId Tape::mul(NodeId a, NodeId b) {
    check(a);
    check(b);
    return push(proxyforge::mul(nodes_[a], nodes_[b]), Entry{Op::Mul, a, b});
}

NodeId Tape::relu(NodeId a) { return push(proxyforge::relu(nodes_[check(a)]), Entry{Op::Relu, a}); }
NodeId Tape::exp(NodeId a) { return push(proxyforge::exp(nodes_[check(a)]), Entry{Op::Exp, a}); }
NodeId Tape::log(NodeId a) { return push(proxyforge::log(nodes_[check(a)]), Entry{Op::Log, a}); }
NodeId Tape::abs(NodeId a) { return push(proxyforge::abs(nodes_[check(a)]), Entry{Op::Abs, a}); }
NodeId Tape::neg(NodeId a) { return push(proxyforge::neg(nodes_[check(a)]), Entry{Op::Neg, a}); }
NodeId Tape::sqrt(NodeId a) { return push(proxyforge::sqrt(nodes_[check(a)]), Entry{Op::Sqrt, a}); }
NodeId Tape::square(NodeId a) { return push(proxyforge::square(nodes_[check(a)]), Entry{Op::Square, a}); }
NodeId Tape::reciprocal(NodeId a) {
    return push(proxyforge::reciprocal(nodes_[check(a)]), Entry{Op::Reciprocal, a});
}
NodeId Tape::sigmoid(NodeId a) { return push(proxyforge::sigmoid(nodes_[check(a)]), Entry{Op::Sigmoid, a}); }

NodeId Tape::matmul(NodeId a, NodeId b) {
    check(a);
    check(b);
    return push(proxyforge::matmul(nodes_[a], nodes_[b]), Entry{Op::Matmul, a, b});
}

namespace {

void check_bmm_shapes(const Tensor& a, const Tensor& b, bool transpose_b) {
    if (a.ndim() != 3 || b.ndim() != 3) throw std::invalid_argument("bmm: operands must be rank 3");
    if (a.dim(0) != b.dim(0)) throw std::invalid_argument("bmm: batch dimensions disagree");
    const std::size_t inner_b = transpose_b ? b.dim(2) : b.dim(1);
    if (a.dim(2) != inner_b) throw std::invalid_argument("bmm: inner dimensions disagree");
}

// c[g] += aview[g] * bview[g] for every batch g, where aview is m x k and
// bview is k x n. ta/tb say the storage holds the transpose of the view
// (i.e. k x m resp. n x k, row-major).
void bmm_accumulate(const double* a, bool ta, const double* b, bool tb, double* c,
                    std::size_t batches, std::size_t m, std::size_t k, std::size_t n) {
    const std::size_t a_elems = m * k;
    const std::size_t b_elems = k * n;
    for (std::size_t g = 0; g < batches; ++g) {
        const double* ag = a + g * a_elems;
        const double* bg = b + g * b_elems;
        double* cg = c + g * m * n;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
                const double av = ta ? ag[p * m + i] : ag[i * k + p];
                if (av == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) {
                    const double bv = tb ? bg[j * k + p] : bg[p * n + j];
                    cg[i * n + j] += av * bv;
                }
            }
        }
    }
}

}  // namespace

NodeId Tape::bmm(NodeId a, NodeId b, bool transpose_b) {
    check(a);
    check(b);
    const Tensor& av = nodes_[a];
    const Tensor& bv = nodes_[b];
    check_bmm_shapes(av, bv, transpose_b);
    const std::size_t batches = av.dim(0), m = av.dim(1), k = av.dim(2);
    const std::size_t n = transpose_b ? bv.dim(1) : bv.dim(2);
    Tensor out({batches, m, n});
    bmm_accumulate(av.data().data(), false, bv.data().data(), transpose_b,
                   out.data().data(), batches, m, k, n);
    Entry e{Op::Bmm, a, b};
    e.flag = transpose_b;
    return push(std::move(out), std::move(e));
}

NodeId Tape::softmax_lastaxis(NodeId a) {
    return push(proxyforge::softmax_lastaxis(nodes_[check(a)]), Entry{Op::Softmax, a});
}

NodeId Tape::log_softmax_lastaxis(NodeId a) {
    return push(proxyforge::log_softmax_lastaxis(nodes_[check(a)]), Entry{Op::LogSoftmax, a});
}

NodeId Tape::sum(NodeId a) {
    return push(Tensor::scalar(proxyforge::sum(nodes_[check(a)])), Entry{Op::Sum, a});
}

NodeId Tape::scale(NodeId a, double c) {
    Entry e{Op::Scale, a};
    e.c = c;
    return push(proxyforge::scale(nodes_[check(a)], c), std::move(e));
}

NodeId Tape::reshape(NodeId a, std::vector<std::size_t> shape) {
    check(a);
    if (shape_numel(shape) != nodes_[a].numel()) {
        throw std::invalid_argument("reshape: element count mismatch");
    }
    return push(Tensor(std::move(shape), nodes_[a].data()), Entry{Op::Reshape, a});
}

NodeId Tape::slice_lastdim(NodeId a, std::size_t start, std::size_t len) {
    check(a);
    const Tensor& av = nodes_[a];
    if (av.ndim() == 0) throw std::invalid_argument("slice_lastdim: scalar input");
    const std::size_t w = av.shape().back();
    if (start + len > w) throw std::invalid_argument("slice_lastdim: out of range");
    std::vector<std::size_t> shape = av.shape();
    shape.back() = len;
    Tensor out(shape);
    const std::size_t n_rows = av.numel() / w;
    for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t j = 0; j < len; ++j) out[r * len + j] = av[r * w + start + j];
    }
    Entry e{Op::SliceLast, a};
    e.meta = {start, len};
    return push(std::move(out), std::move(e));
}

NodeId Tape::concat_lastdim(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_lastdim: no inputs");
    std::size_t total = 0;
    const Tensor& first = nodes_[check(parts[0])];
    if (first.ndim() == 0) throw std::invalid_argument("concat_lastdim: scalar input");
    for (NodeId p : parts) {
        const Tensor& t = nodes_[check(p)];
        if (t.ndim() != first.ndim()) throw std::invalid_argument("concat_lastdim: rank mismatch");
        for (std::size_t d = 0; d + 1 < t.ndim(); ++d) {
            if (t.dim(d) != first.dim(d)) throw std::invalid_argument("concat_lastdim: shape mismatch");
        }
        total += t.shape().back();
    }
    std::vector<std::size_t> shape = first.shape();
    shape.back() = total;
    Tensor out(shape);
    const std::size_t n_rows = out.numel() / total;
    std::size_t offset = 0;
    for (NodeId p : parts) {
        const Tensor& t = nodes_[p];
        const std::size_t w = t.shape().back();
        for (std::size_t r = 0; r < n_rows; ++r) {
            for (std::size_t j = 0; j < w; ++j) out[r * total + offset + j] = t[r * w + j];
        }
        offset += w;
    }
    Entry e{Op::ConcatLast};
    e.parts = parts;
    return push(std::move(out), std::move(e));
}

NodeId Tape::gather_rows(NodeId table, std::vector<std::size_t> rows) {
    check(table);
    const Tensor& t = nodes_[table];
    if (t.ndim() != 2) throw std::invalid_argument("gather_rows: table must be 2-d");
    const std::size_t w = t.cols();
    Tensor out({rows.size(), w});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= t.rows()) throw std::invalid_argument("gather_rows: row out of range");
        for (std::size_t j = 0; j < w; ++j) out[r * w + j] = t[rows[r] * w + j];
    }
    Entry e{Op::GatherRows, table};
    e.meta = std::move(rows);
    return push(std::move(out), std::move(e));
}

NodeId Tape::gather_elements(NodeId a, std::vector<std::size_t> flat_indices) {
    check(a);
    const Tensor& av = nodes_[a];
    Tensor out({flat_indices.size()});
    for (std::size_t i = 0; i < flat_indices.size(); ++i) {
        if (flat_indices[i] >= av.numel()) {
            throw std::invalid_argument("gather_elements: index out of range");
        }
        out[i] = av[flat_indices[i]];
    }
    Entry e{Op::GatherElems, a};
    e.meta = std::move(flat_indices);
    return push(std::move(out), std::move(e));
}

// ---------------------------------------------------------------------------

namespace {

// Accumulates g into grad, reducing to a scalar when the operand was a
// broadcast scalar.
void accumulate(Tensor& grad, const Tensor& g, const Tensor& operand_value) {
    if (operand_value.numel() == 1 && g.numel() != 1) {
        double s = 0.0;
        for (std::size_t i = 0; i < g.numel(); ++i) s += g[i];
        grad[0] += s;
        return;
    }
    for (std::size_t i = 0; i < g.numel(); ++i) grad[i] += g[i];
}

}  // namespace

std::vector<Tensor> Tape::backward(NodeId loss) const {
    if (loss >= nodes_.size()) {
        throw std::invalid_argument("backward: node was not traced on this tape");
    }
    if (nodes_[loss].numel() != 1) {
        throw std::invalid_argument("backward: loss must be a scalar");
    }

    std::vector<Tensor> grads(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) grads[i] = Tensor(nodes_[i].shape());
    grads[loss][0] = 1.0;

    for (std::size_t e = entries_.size(); e-- > 0;) {
        const Entry& entry = entries_[e];
        if (entry.out > loss) continue;  // recorded after the loss; cannot contribute
        const Tensor& go = grads[entry.out];
        switch (entry.op) {
            case Op::Leaf:
                break;
            case Op::Add: {
                accumulate(grads[entry.a], go, nodes_[entry.a]);
                accumulate(grads[entry.b], go, nodes_[entry.b]);
                break;
            }
            case Op::Mul: {
                accumulate(grads[entry.a], proxyforge::mul(go, nodes_[entry.b]), nodes_[entry.a]);
                accumulate(grads[entry.b], proxyforge::mul(go, nodes_[entry.a]), nodes_[entry.b]);
                break;
            }
            case Op::Relu: {
                const Tensor& x = nodes_[entry.a];
                Tensor g(x.shape());
                for (std::size_t i = 0; i < x.numel(); ++i) g[i] = x[i] > 0.0 ? go[i] : 0.0;
                accumulate(grads[entry.a], g, x);
                break;
            }
            case Op::Exp: {
                accumulate(grads[entry.a], proxyforge::mul(go, nodes_[entry.out]), nodes_[entry.a]);
                break;
            }
            case Op::Log: {
                accumulate(grads[entry.a], proxyforge::divide(go, nodes_[entry.a]), nodes_[entry.a]);
                break;
            }
            case Op::Abs: {
                const Tensor& x = nodes_[entry.a];
                Tensor g(x.shape());
                for (std::size_t i = 0; i < x.numel(); ++i) {
                    g[i] = x[i] > 0.0 ? go[i] : (x[i] < 0.0 ? -go[i] : 0.0);
                }
                accumulate(grads[entry.a], g, x);
                break;
            }
            case Op::Neg: {
                accumulate(grads[entry.a], proxyforge::neg(go), nodes_[entry.a]);
                break;
            }
            case Op::Sqrt: {
                // d/dx sqrt(x) = 1 / (2 sqrt(x)), reusing the stored output
                const Tensor& y = nodes_[entry.out];
                Tensor g(y.shape());
                for (std::size_t i = 0; i < y.numel(); ++i) g[i] = go[i] / (2.0 * y[i]);
                accumulate(grads[entry.a], g, nodes_[entry.a]);
                break;
            }
            case Op::Square: {
                const Tensor& x = nodes_[entry.a];
                Tensor g(x.shape());
                for (std::size_t i = 0; i < x.numel(); ++i) g[i] = go[i] * 2.0 * x[i];
                accumulate(grads[entry.a], g, x);
                break;
            }
            case Op::Reciprocal: {
                // d/dx (1/x) = -1/x^2 = -y^2
                const Tensor& y = nodes_[entry.out];
                Tensor g(y.shape());
                for (std::size_t i = 0; i < y.numel(); ++i) g[i] = -go[i] * y[i] * y[i];
                accumulate(grads[entry.a], g, nodes_[entry.a]);
                break;
            }
            case Op::Sigmoid: {
                const Tensor& y = nodes_[entry.out];
                Tensor g(y.shape());
                for (std::size_t i = 0; i < y.numel(); ++i) g[i] = go[i] * y[i] * (1.0 - y[i]);
                accumulate(grads[entry.a], g, nodes_[entry.a]);
                break;
            }
            case Op::Matmul: {
                const Tensor& a = nodes_[entry.a];
                const Tensor& b = nodes_[entry.b];
                accumulate(grads[entry.a], proxyforge::matmul(go, transpose(b)), a);
                accumulate(grads[entry.b], proxyforge::matmul(transpose(a), go), b);
                break;
            }
            case Op::Bmm: {
                const Tensor& a = nodes_[entry.a];
                const Tensor& b = nodes_[entry.b];
                const std::size_t batches = a.dim(0), m = a.dim(1), k = a.dim(2);
                const std::size_t n = entry.flag ? b.dim(1) : b.dim(2);
                Tensor ga(a.shape());
                Tensor gb(b.shape());
                if (!entry.flag) {
                    // c = a b: ga = go b^T, gb = a^T go
                    bmm_accumulate(go.data().data(), false, b.data().data(), true,
                                   ga.data().data(), batches, m, n, k);
                    bmm_accumulate(a.data().data(), true, go.data().data(), false,
                                   gb.data().data(), batches, k, m, n);
                } else {
                    // c = a b^T: ga = go b, gb = go^T a
                    bmm_accumulate(go.data().data(), false, b.data().data(), false,
                                   ga.data().data(), batches, m, n, k);
                    bmm_accumulate(go.data().data(), true, a.data().data(), false,
                                   gb.data().data(), batches, n, m, k);
                }
                accumulate(grads[entry.a], ga, a);
                accumulate(grads[entry.b], gb, b);
                break;
            }
            case Op::Softmax: {
                const Tensor& y = nodes_[entry.out];
                const std::size_t w = y.shape().back();
                const std::size_t n_rows = y.numel() / w;
                Tensor g(y.shape());
                for (std::size_t r = 0; r < n_rows; ++r) {
                    const std::size_t base = r * w;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < w; ++j) dot += go[base + j] * y[base + j];
                    for (std::size_t j = 0; j < w; ++j) {
                        g[base + j] = y[base + j] * (go[base + j] - dot);
                    }
                }
                accumulate(grads[entry.a], g, nodes_[entry.a]);
                break;
            }
            case Op::LogSoftmax: {
                const Tensor& y = nodes_[entry.out];  // log-probabilities
                const std::size_t w = y.shape().back();
                const std::size_t n_rows = y.numel() / w;
                Tensor g(y.shape());
                for (std::size_t r = 0; r < n_rows; ++r) {
                    const std::size_t base = r * w;
                    double total = 0.0;
                    for (std::size_t j = 0; j < w; ++j) total += go[base + j];
                    for (std::size_t j = 0; j < w; ++j) {
                        g[base + j] = go[base + j] - std::exp(y[base + j]) * total;
                    }
                }
                accumulate(grads[entry.a], g, nodes_[entry.a]);
                break;
            }
            case Op::Sum: {
                const double gv = go[0];
                Tensor g(nodes_[entry.a].shape(), gv);
                accumulate(grads[entry.a], g, nodes_[entry.a]);
                break;
            }
            case Op::Scale: {
                accumulate(grads[entry.a], proxyforge::scale(go, entry.c), nodes_[entry.a]);
                break;
            }
            case Op::Reshape: {
                Tensor g(nodes_[entry.a].shape(), go.data());
                accumulate(grads[entry.a], g, nodes_[entry.a]);
                break;
            }
            case Op::SliceLast: {
                const Tensor& x = nodes_[entry.a];
                const std::size_t w = x.shape().back();
                const std::size_t start = entry.meta[0], len = entry.meta[1];
                Tensor g(x.shape());
                const std::size_t n_rows = x.numel() / w;
                for (std::size_t r = 0; r < n_rows; ++r) {
                    for (std::size_t j = 0; j < len; ++j) g[r * w + start + j] = go[r * len + j];
                }
                accumulate(grads[entry.a], g, x);
                break;
            }
            case Op::ConcatLast: {
                const std::size_t total = nodes_[entry.out].shape().back();
                const std::size_t n_rows = nodes_[entry.out].numel() / total;
                std::size_t offset = 0;
                for (NodeId p : entry.parts) {
                    const Tensor& part = nodes_[p];
                    const std::size_t w = part.shape().back();
                    Tensor g(part.shape());
                    for (std::size_t r = 0; r < n_rows; ++r) {
                        for (std::size_t j = 0; j < w; ++j) g[r * w + j] = go[r * total + offset + j];
                    }
                    accumulate(grads[p], g, part);
                    offset += w;
                }
                break;
            }
            case Op::GatherRows: {
                const Tensor& table = nodes_[entry.a];
                const std::size_t w = table.cols();
                Tensor g(table.shape());
                for (std::size_t r = 0; r < entry.meta.size(); ++r) {
                    for (std::size_t j = 0; j < w; ++j) g[entry.meta[r] * w + j] += go[r * w + j];
                }
                accumulate(grads[entry.a], g, table);
                break;
            }
            case Op::GatherElems: {
                Tensor g(nodes_[entry.a].shape());
                for (std::size_t i = 0; i < entry.meta.size(); ++i) g[entry.meta[i]] += go[i];
                accumulate(grads[entry.a], g, nodes_[entry.a]);
                break;
            }
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Tensor> shift_params(const std::vector<Tensor>& params, const Tensor& v, double step) {
    std::vector<Tensor> out = params;
    std::size_t offset = 0;
    for (Tensor& p : out) {
        for (std::size_t i = 0; i < p.numel(); ++i) p[i] += step * v[offset + i];
        offset += p.numel();
    }
    return out;
}

Tensor flat_param_grads(const LossProbe& probe, std::size_t total) {
    const std::vector<Tensor> grads = probe.tape.backward(probe.loss);
    Tensor out({total});
    std::size_t offset = 0;
    for (NodeId id : probe.param_nodes) {
        const Tensor& g = grads[id];
        for (std::size_t i = 0; i < g.numel(); ++i) out[offset + i] = g[i];
        offset += g.numel();
    }
    return out;
}

}  // namespace

Tensor hvp(const LossFn& loss_fn, const std::vector<Tensor>& params, const Tensor& v) {
    std::size_t total = 0;
    double max_abs = 0.0;
    for (const Tensor& p : params) {
        total += p.numel();
        for (std::size_t i = 0; i < p.numel(); ++i) max_abs = std::max(max_abs, std::fabs(p[i]));
    }
    if (v.numel() != total) {
        throw std::invalid_argument("hvp: v must match the flattened parameter length");
    }
    const double eps = 1e-3 * (1.0 + max_abs);

    const LossProbe plus = loss_fn(shift_params(params, v, eps));
    const Tensor g_plus = flat_param_grads(plus, total);
    const LossProbe minus = loss_fn(shift_params(params, v, -eps));
    const Tensor g_minus = flat_param_grads(minus, total);

    Tensor out({total});
    for (std::size_t i = 0; i < total; ++i) out[i] = (g_plus[i] - g_minus[i]) / (2.0 * eps);
    if (!out.all_finite()) throw NumericError("hvp: non-finite result");
    return out;
}

}  // namespace proxyforge
