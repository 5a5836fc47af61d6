#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace proxyforge {

/// Dense row-major tensor of 64-bit floats. Rank 0 is a scalar (one element).
/// Immutable by convention once handed to another component; operations
/// return fresh tensors.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);  // zero-filled
    Tensor(std::vector<std::size_t> shape, double fill);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor ones(std::vector<std::size_t> shape);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool is_scalar() const { return shape_.empty() && data_.size() == 1; }

    // 2-d accessors; dim(i) is checked, rows/cols assume ndim()==2.
    std::size_t dim(std::size_t i) const;
    std::size_t rows() const { return dim(0); }
    std::size_t cols() const { return dim(1); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    double item() const;  // value of a one-element tensor
    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

// ---- elementwise (equal shapes, or one operand a scalar) --------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// ---- elementwise unary -------------------------------------------------------
// Domain violations produce NaN/Inf which propagate; nothing is clamped.
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor neg(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
Tensor reciprocal(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// ---- linear algebra ----------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);      // 2-d only
Tensor transpose(const Tensor& a);                    // 2-d only

// ---- last-axis softmax (max-subtracted) ---------------------------------------
Tensor softmax_lastaxis(const Tensor& a);
Tensor log_softmax_lastaxis(const Tensor& a);

// ---- reductions over all elements ---------------------------------------------
double sum(const Tensor& a);
double mean(const Tensor& a);
double min_value(const Tensor& a);
double max_value(const Tensor& a);
double frobenius_norm(const Tensor& a);
double l1_norm(const Tensor& a);
double stddev(const Tensor& a);  // population convention (1/N)

}  // namespace proxyforge
