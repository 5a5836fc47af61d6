#include "proxyforge/dsl.hpp"

#include <cmath>

namespace proxyforge {

namespace {

bool finite(const Tensor& t) { return t.all_finite(); }

EvalValue checked(Tensor t) {
    if (!finite(t)) return EvalValue::invalid();
    return EvalValue::of(std::move(t));
}

}  // namespace

EvalValue eval_unary(UnaryOp op, const EvalValue& v) {
    if (v.is_invalid()) return EvalValue::invalid();
    if (op == UnaryOp::Prune) return EvalValue::empty();
    if (v.is_empty()) return EvalValue::empty();
    const Tensor& x = v.tensor();
    const bool is_scalar = x.ndim() == 0;
    switch (op) {
        case UnaryOp::Log: return checked(log(x));
        case UnaryOp::AbsLog: return checked(abs(log(x)));
        case UnaryOp::Abs: return checked(abs(x));
        case UnaryOp::Square: return checked(square(x));
        case UnaryOp::Exp: return checked(exp(x));
        case UnaryOp::Sqrt: return checked(sqrt(x));
        case UnaryOp::Relu: return checked(relu(x));
        case UnaryOp::Reciprocal: return checked(reciprocal(x));
        case UnaryOp::Neg: return checked(neg(x));
        // reductions require a vector or matrix input
        case UnaryOp::NormFro:
            if (is_scalar) return EvalValue::invalid();
            return checked(Tensor::scalar(frobenius_norm(x)));
        case UnaryOp::NormSum:
            if (is_scalar) return EvalValue::invalid();
            return checked(Tensor::scalar(mean(x)));
        case UnaryOp::NormL1:
            if (is_scalar) return EvalValue::invalid();
            return checked(Tensor::scalar(l1_norm(x)));
        // softmax of a single value is e^x / e^x = 1 by the literal formula,
        // so scalars are admitted here (and give log-softmax 0)
        case UnaryOp::Softmax: return checked(softmax_lastaxis(x));
        case UnaryOp::LogSoftmax: return checked(log_softmax_lastaxis(x));
        case UnaryOp::Sigmoid:
            if (is_scalar) return EvalValue::invalid();
            return checked(sigmoid(x));
        case UnaryOp::MinMaxScale: {
            if (is_scalar) return EvalValue::invalid();
            const double lo = min_value(x);
            const double hi = max_value(x);
            Tensor out(x.shape());
            for (std::size_t i = 0; i < x.numel(); ++i) out[i] = (x[i] - lo) / (hi - lo);
            return checked(std::move(out));
        }
        case UnaryOp::Average:
            if (is_scalar) return EvalValue::invalid();
            return checked(Tensor::scalar(mean(x)));
        case UnaryOp::Std:
            if (is_scalar) return EvalValue::invalid();
            return checked(Tensor::scalar(stddev(x)));
        case UnaryOp::Identity: return EvalValue::of(x);
        case UnaryOp::Prune: break;  // handled above
    }
    return EvalValue::invalid();
}

EvalValue eval_binary(BinaryOp op, const EvalValue& a, const EvalValue& b) {
    if (a.is_invalid() || b.is_invalid()) return EvalValue::invalid();
    if (a.is_empty() && b.is_empty()) return EvalValue::empty();
    // a pruned branch contributes nothing: the result is the other branch
    if (a.is_empty()) return b;
    if (b.is_empty()) return a;
    const Tensor& x = a.tensor();
    const Tensor& y = b.tensor();
    if (x.numel() != 1 && y.numel() != 1 && !x.same_shape(y)) return EvalValue::invalid();
    switch (op) {
        case BinaryOp::Add: return checked(add(x, y));
        case BinaryOp::Sub: return checked(sub(x, y));
        case BinaryOp::Mul: return checked(mul(x, y));
        case BinaryOp::Div: return checked(divide(x, y));
    }
    return EvalValue::invalid();
}

EvalValue eval_branch(const Branch& branch, const Tensor& input) {
    EvalValue v = EvalValue::of(input);
    for (UnaryOp op : branch.unary) {
        v = eval_unary(op, v);
        if (v.is_invalid()) return v;
    }
    return v;
}

std::optional<double> evaluate(const SymbolicExpression& expr, const NetworkStatistics& stats) {
    double total = 0.0;
    for (std::size_t b = 0; b < stats.blocks.size(); ++b) {
        const EvalValue left = eval_branch(expr.left, operand(stats, expr.left.operand, b));
        const EvalValue right = eval_branch(expr.right, operand(stats, expr.right.operand, b));
        const EvalValue combined = eval_binary(expr.binary, left, right);
        if (combined.is_invalid() || combined.is_empty()) return std::nullopt;
        const double block_score = sum(combined.tensor());
        if (!std::isfinite(block_score)) return std::nullopt;
        total += block_score;
    }
    if (!std::isfinite(total)) return std::nullopt;
    return total;
}

// ---------------------------------------------------------------------------

std::string unary_name(UnaryOp op) {
    const int id = static_cast<int>(op);
    return id < 10 ? "f0" + std::to_string(id) : "f" + std::to_string(id);
}

std::string binary_name(BinaryOp op) {
    return "g0" + std::to_string(static_cast<int>(op));
}

namespace {

std::string serialize_branch(const Branch& b) {
    std::string out;
    out += operand_letter(b.operand);
    out += ':';
    for (std::size_t i = 0; i < b.unary.size(); ++i) {
        if (i > 0) out += ',';
        out += unary_name(b.unary[i]);
    }
    return out;
}

class Parser {
public:
    explicit Parser(const std::string& text) : text_(text) {}

    SymbolicExpression run() {
        SymbolicExpression expr;
        expr.left = branch();
        expect('|');
        expr.binary = binary();
        expect('|');
        expr.right = branch();
        if (pos_ != text_.size()) throw ParseError("trailing characters", pos_);
        return expr;
    }

private:
    Branch branch() {
        Branch b;
        if (pos_ >= text_.size()) throw ParseError("expected operand kind", pos_);
        try {
            b.operand = operand_from_letter(text_[pos_]);
        } catch (const std::invalid_argument&) {
            throw ParseError("unknown operand kind", pos_);
        }
        ++pos_;
        expect(':');
        b.unary.push_back(unary());
        while (pos_ < text_.size() && text_[pos_] == ',') {
            ++pos_;
            b.unary.push_back(unary());
        }
        return b;
    }

    UnaryOp unary() {
        const std::size_t at = pos_;
        const int id = op_id('f');
        if (id < 1 || id > static_cast<int>(kUnaryCount)) {
            throw ParseError("unknown unary op id", at);
        }
        return static_cast<UnaryOp>(id);
    }

    BinaryOp binary() {
        const std::size_t at = pos_;
        const int id = op_id('g');
        if (id < 1 || id > static_cast<int>(kBinaryCount)) {
            throw ParseError("unknown binary op id", at);
        }
        return static_cast<BinaryOp>(id);
    }

    int op_id(char prefix) {
        if (pos_ >= text_.size() || text_[pos_] != prefix) {
            throw ParseError(std::string("expected '") + prefix + "' op id", pos_);
        }
        ++pos_;
        if (pos_ + 1 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
            !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))) {
            throw ParseError("expected two-digit op id", pos_);
        }
        const int id = (text_[pos_] - '0') * 10 + (text_[pos_ + 1] - '0');
        pos_ += 2;
        return id;
    }

    void expect(char c) {
        if (pos_ >= text_.size() || text_[pos_] != c) {
            throw ParseError(std::string("expected '") + c + "'", pos_);
        }
        ++pos_;
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const SymbolicExpression& expr) {
    return serialize_branch(expr.left) + '|' + binary_name(expr.binary) + '|' +
           serialize_branch(expr.right);
}

SymbolicExpression parse_expression(const std::string& text) {
    return Parser(text).run();
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<OperandKind, kOperandCount> kOperands = {
    OperandKind::A, OperandKind::J, OperandKind::G,
    OperandKind::H, OperandKind::W, OperandKind::S,
};

}  // namespace

SymbolicExpression random_expr(Rng& rng, std::size_t unary_depth) {
    if (unary_depth < 1) throw std::invalid_argument("random_expr: unary_depth must be >= 1");
    // distinct pair of operand kinds, kept in canonical order so the sampled
    // space matches the C(6,2)-counted enumeration
    std::size_t first = rng.index(kOperandCount);
    std::size_t second = rng.index(kOperandCount - 1);
    if (second >= first) ++second;
    if (first > second) std::swap(first, second);

    SymbolicExpression expr;
    expr.left.operand = kOperands[first];
    expr.right.operand = kOperands[second];
    expr.left.unary.resize(unary_depth);
    expr.right.unary.resize(unary_depth);
    for (std::size_t i = 0; i < unary_depth; ++i) {
        expr.left.unary[i] = static_cast<UnaryOp>(1 + rng.index(kUnaryCount));
    }
    for (std::size_t i = 0; i < unary_depth; ++i) {
        expr.right.unary[i] = static_cast<UnaryOp>(1 + rng.index(kUnaryCount));
    }
    expr.binary = static_cast<BinaryOp>(1 + rng.index(kBinaryCount));
    return expr;
}

std::uint64_t space_size(std::size_t unary_depth) {
    if (unary_depth < 1) throw std::invalid_argument("space_size: unary_depth must be >= 1");
    const std::uint64_t kind_pairs = kOperandCount * (kOperandCount - 1) / 2;  // C(6,2)
    std::uint64_t unary_combos = 1;
    for (std::size_t i = 0; i < 2 * unary_depth; ++i) unary_combos *= kUnaryCount;
    return kind_pairs * unary_combos * kBinaryCount;
}

std::vector<SymbolicExpression> enumerate_space(std::size_t unary_depth) {
    if (unary_depth < 1) throw std::invalid_argument("enumerate_space: unary_depth must be >= 1");
    std::vector<SymbolicExpression> out;
    out.reserve(space_size(unary_depth));
    std::vector<std::size_t> unary_digits(2 * unary_depth, 0);
    for (std::size_t i = 0; i < kOperandCount; ++i) {
        for (std::size_t j = i + 1; j < kOperandCount; ++j) {
            std::fill(unary_digits.begin(), unary_digits.end(), 0);
            for (;;) {
                for (std::size_t g = 1; g <= kBinaryCount; ++g) {
                    SymbolicExpression expr;
                    expr.left.operand = kOperands[i];
                    expr.right.operand = kOperands[j];
                    expr.binary = static_cast<BinaryOp>(g);
                    expr.left.unary.resize(unary_depth);
                    expr.right.unary.resize(unary_depth);
                    for (std::size_t u = 0; u < unary_depth; ++u) {
                        expr.left.unary[u] = static_cast<UnaryOp>(1 + unary_digits[u]);
                        expr.right.unary[u] = static_cast<UnaryOp>(1 + unary_digits[unary_depth + u]);
                    }
                    out.push_back(std::move(expr));
                }
                // odometer over the unary slots
                std::size_t slot = 0;
                while (slot < unary_digits.size()) {
                    if (++unary_digits[slot] < kUnaryCount) break;
                    unary_digits[slot] = 0;
                    ++slot;
                }
                if (slot == unary_digits.size()) break;
            }
        }
    }
    return out;
}

}  // namespace proxyforge
