#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "proxyforge/rng.hpp"
#include "proxyforge/stats.hpp"
#include "proxyforge/tensor.hpp"

namespace proxyforge {

/// Unary primitives f01..f20. Reductions (NormFro, NormSum, NormL1, Average,
/// Std) map vectors/matrices to scalars; Softmax/LogSoftmax act along the last
/// axis; Prune eliminates its branch.
enum class UnaryOp : std::uint8_t {
    Log = 1,         // f01
    AbsLog,          // f02
    Abs,             // f03
    Square,          // f04
    Exp,             // f05
    Sqrt,            // f06
    Relu,            // f07
    Reciprocal,      // f08
    Neg,             // f09
    NormFro,         // f10
    NormSum,         // f11  (sum / numel)
    NormL1,          // f12
    Softmax,         // f13
    Sigmoid,         // f14
    LogSoftmax,      // f15
    MinMaxScale,     // f16
    Average,         // f17
    Std,             // f18
    Identity,        // f19
    Prune,           // f20
};
inline constexpr std::size_t kUnaryCount = 20;

enum class BinaryOp : std::uint8_t {
    Add = 1,  // g01
    Sub,      // g02
    Mul,      // g03
    Div,      // g04
};
inline constexpr std::size_t kBinaryCount = 4;
inline constexpr std::size_t kOperandCount = 6;

/// One side of a proxy: an operand statistic pushed through a unary chain.
struct Branch {
    OperandKind operand = OperandKind::A;
    std::vector<UnaryOp> unary;

    bool operator==(const Branch&) const = default;
};

/// Two-branch genotype combined by one binary operation. Search-space
/// generation keeps the two operand kinds distinct; parsing also accepts
/// equal kinds so externally documented proxies over two weight sets load.
struct SymbolicExpression {
    Branch left;
    Branch right;
    BinaryOp binary = BinaryOp::Add;

    bool operator==(const SymbolicExpression&) const = default;
};

/// Evaluation value: a tensor, the empty value produced by a pruned branch,
/// or the invalid signal (domain/kind/shape violation).
class EvalValue {
public:
    enum class State : std::uint8_t { Value, Empty, Invalid };

    static EvalValue invalid() { return EvalValue(State::Invalid); }
    static EvalValue empty() { return EvalValue(State::Empty); }
    static EvalValue of(Tensor t) {
        EvalValue v(State::Value);
        v.tensor_ = std::move(t);
        return v;
    }

    bool is_invalid() const { return state_ == State::Invalid; }
    bool is_empty() const { return state_ == State::Empty; }
    bool has_value() const { return state_ == State::Value; }
    const Tensor& tensor() const { return tensor_; }

private:
    explicit EvalValue(State s) : state_(s) {}
    State state_;
    Tensor tensor_;
};

/// Applies one unary primitive. A kind violation (e.g. a reduction applied to
/// a scalar) yields Invalid, not an exception; softmax/log-softmax of a scalar
/// follow the literal formula and give 1 resp. 0. Any non-finite element in
/// the result also yields Invalid.
EvalValue eval_unary(UnaryOp op, const EvalValue& v);

/// Elementwise combine with scalar broadcast. A pruned (empty) side passes the
/// other side through unchanged; mismatched non-scalar shapes are Invalid.
EvalValue eval_binary(BinaryOp op, const EvalValue& a, const EvalValue& b);

EvalValue eval_branch(const Branch& branch, const Tensor& input);

/// Scalar proxy score: per block, both branches are evaluated on their
/// operands and combined; non-scalar block results are reduced by element
/// sum; block scores are summed. Any violation anywhere yields nullopt.
std::optional<double> evaluate(const SymbolicExpression& expr, const NetworkStatistics& stats);

/// Fitness sentinel assigned to invalid candidates.
inline constexpr double kInvalidFitness = -1.0;

// -- serialization ------------------------------------------------------------
// Grammar: <KIND>:<fNN>,<fNN>,...|<gNN>|<KIND>:<fNN>,...
// e.g. "H:f08,f04|g01|A:f10,f13,f01"

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t position)
        : std::runtime_error(message + " (at position " + std::to_string(position) + ")"),
          position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

std::string serialize(const SymbolicExpression& expr);
SymbolicExpression parse_expression(const std::string& text);

// -- search space -------------------------------------------------------------

/// Uniform over valid genotypes with `unary_depth` unary slots per branch;
/// operand kinds are a distinct pair in canonical (A,J,G,H,W,S) order.
SymbolicExpression random_expr(Rng& rng, std::size_t unary_depth);

/// C(6,2) * 20^(2*depth) * 4; 24,000 at depth 1.
std::uint64_t space_size(std::size_t unary_depth);

/// Every genotype at the given depth, operand pairs in canonical order.
/// Sized space_size(depth); meant for depth-1 sweeps.
std::vector<SymbolicExpression> enumerate_space(std::size_t unary_depth);

std::string unary_name(UnaryOp op);    // "f01".."f20"
std::string binary_name(BinaryOp op);  // "g01".."g04"

}  // namespace proxyforge
