#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "proxyforge/tensor.hpp"

namespace proxyforge {

using NodeId = std::uint32_t;

/// Raised when a numeric procedure (e.g. Hessian-vector probing) produces a
/// non-finite result.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reverse-mode tape. Records primitive applications in topological order
/// (operands must already be on the tape) and replays them backwards to
/// accumulate gradients. One tape per trace; not thread-safe across traces.
class Tape {
public:
    NodeId leaf(Tensor value);

    const Tensor& value(NodeId id) const;
    std::size_t node_count() const { return nodes_.size(); }

    // -- recorded primitives --------------------------------------------------
    NodeId add(NodeId a, NodeId b);  // equal shapes or one scalar operand
    NodeId mul(NodeId a, NodeId b);  // equal shapes or one scalar operand
    NodeId relu(NodeId a);           // relu'(0) := 0
    NodeId exp(NodeId a);
    NodeId log(NodeId a);
    NodeId abs(NodeId a);
    NodeId neg(NodeId a);
    NodeId sqrt(NodeId a);
    NodeId square(NodeId a);
    NodeId reciprocal(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId matmul(NodeId a, NodeId b);                     // 2-d
    NodeId bmm(NodeId a, NodeId b, bool transpose_b = false);  // 3-d batched
    NodeId softmax_lastaxis(NodeId a);
    NodeId log_softmax_lastaxis(NodeId a);
    NodeId sum(NodeId a);            // reduce all elements to a scalar
    NodeId scale(NodeId a, double c);
    NodeId reshape(NodeId a, std::vector<std::size_t> shape);
    NodeId slice_lastdim(NodeId a, std::size_t start, std::size_t len);
    NodeId concat_lastdim(const std::vector<NodeId>& parts);
    /// Row lookup into a 2-d table (embedding); backward scatter-adds rows.
    NodeId gather_rows(NodeId table, std::vector<std::size_t> rows);
    /// Picks elements by flat index; backward scatter-adds.
    NodeId gather_elements(NodeId a, std::vector<std::size_t> flat_indices);

    /// Gradients of a scalar loss node with respect to every node on the tape,
    /// indexed by NodeId (zero tensors for nodes the loss does not depend on).
    /// Accumulation follows reverse tape order, so repeated calls are
    /// bitwise identical.
    std::vector<Tensor> backward(NodeId loss) const;

private:
    enum class Op : std::uint8_t {
        Leaf, Add, Mul, Relu, Exp, Log, Abs, Neg, Sqrt, Square, Reciprocal,
        Sigmoid, Matmul, Bmm, Softmax, LogSoftmax, Sum, Scale, Reshape,
        SliceLast, ConcatLast, GatherRows, GatherElems,
    };

    struct Entry {
        explicit Entry(Op op_, NodeId a_ = 0, NodeId b_ = 0) : op(op_), a(a_), b(b_) {}

        Op op;
        NodeId out = 0;
        NodeId a = 0;
        NodeId b = 0;
        double c = 0.0;                 // scale factor
        bool flag = false;              // bmm transpose_b
        std::vector<std::size_t> meta;  // indices / offsets
        std::vector<NodeId> parts;      // concat inputs
    };

    NodeId push(Tensor value, Entry entry);
    NodeId check(NodeId id) const;

    std::vector<Tensor> nodes_;
    std::vector<Entry> entries_;
};

/// Builds the scalar loss for the given parameter values. Returned ids are the
/// parameter leaves, in the same order as the input vector.
struct LossProbe {
    Tape tape;
    NodeId loss = 0;
    std::vector<NodeId> param_nodes;
};
using LossFn = std::function<LossProbe(const std::vector<Tensor>& params)>;

/// Hessian-vector product by central gradient differencing:
///   (grad L(theta + eps v) - grad L(theta - eps v)) / (2 eps),
/// eps = 1e-3 * (1 + max|theta|). v is flat over the concatenated parameters;
/// the result is flat with the same length. Throws NumericError if the result
/// is not finite.
Tensor hvp(const LossFn& loss_fn, const std::vector<Tensor>& params, const Tensor& v);

}  // namespace proxyforge
