#include "proxyforge/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace proxyforge {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
        throw std::invalid_argument("Tensor: shape does not match data length");
    }
    for (std::size_t d : shape_) {
        if (d == 0) throw std::invalid_argument("Tensor: zero dimension");
    }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }
Tensor Tensor::zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
Tensor Tensor::ones(std::vector<std::size_t> shape) { return Tensor(std::move(shape), 1.0); }

std::size_t Tensor::dim(std::size_t i) const {
    if (i >= shape_.size()) throw std::out_of_range("Tensor::dim: axis out of range");
    return shape_[i];
}

double& Tensor::at(std::size_t r, std::size_t c) {
    if (ndim() != 2) throw std::invalid_argument("Tensor::at: not a matrix");
    return data_[r * shape_[1] + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    if (ndim() != 2) throw std::invalid_argument("Tensor::at: not a matrix");
    return data_[r * shape_[1] + c];
}

double Tensor::item() const {
    if (data_.size() != 1) throw std::invalid_argument("Tensor::item: not a single element");
    return data_[0];
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------

namespace {

template <typename F>
Tensor binary_op(const Tensor& a, const Tensor& b, F f, const char* name) {
    if (a.numel() == 1 && b.numel() != 1) {
        Tensor out(b.shape());
        const double av = a[0];
        for (std::size_t i = 0; i < b.numel(); ++i) out[i] = f(av, b[i]);
        return out;
    }
    if (b.numel() == 1) {
        Tensor out(a.shape());
        const double bv = b[0];
        for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i], bv);
        return out;
    }
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(name) + ": shape mismatch");
    }
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i], b[i]);
    return out;
}

template <typename F>
Tensor unary_op(const Tensor& a, F f) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i]);
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(a, b, [](double x, double y) { return x + y; }, "add");
}
Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(a, b, [](double x, double y) { return x - y; }, "sub");
}
Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(a, b, [](double x, double y) { return x * y; }, "mul");
}
Tensor divide(const Tensor& a, const Tensor& b) {
    return binary_op(a, b, [](double x, double y) { return x / y; }, "divide");
}
Tensor scale(const Tensor& a, double c) {
    return unary_op(a, [c](double x) { return x * c; });
}

Tensor relu(const Tensor& a) {
    // NaN is kept (not clamped to 0) so domain errors stay visible downstream.
    return unary_op(a, [](double x) { return x > 0.0 || std::isnan(x) ? x : 0.0; });
}
Tensor exp(const Tensor& a) {
    return unary_op(a, [](double x) { return std::exp(x); });
}
Tensor log(const Tensor& a) {
    return unary_op(a, [](double x) { return std::log(x); });
}
Tensor abs(const Tensor& a) {
    return unary_op(a, [](double x) { return std::fabs(x); });
}
Tensor neg(const Tensor& a) {
    return unary_op(a, [](double x) { return -x; });
}
Tensor sqrt(const Tensor& a) {
    return unary_op(a, [](double x) { return std::sqrt(x); });
}
Tensor square(const Tensor& a) {
    return unary_op(a, [](double x) { return x * x; });
}
Tensor reciprocal(const Tensor& a) {
    return unary_op(a, [](double x) { return 1.0 / x; });
}
Tensor sigmoid(const Tensor& a) {
    return unary_op(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2) {
        throw std::invalid_argument("matmul: operands must be matrices");
    }
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimensions disagree");
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                out[i * n + j] += av * b[p * n + j];
            }
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.ndim() != 2) throw std::invalid_argument("transpose: not a matrix");
    Tensor out({a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out[j * a.rows() + i] = a[i * a.cols() + j];
        }
    }
    return out;
}

Tensor softmax_lastaxis(const Tensor& a) {
    if (a.ndim() == 0) return Tensor::scalar(1.0);
    const std::size_t w = a.shape().back();
    const std::size_t n_rows = a.numel() / w;
    Tensor out(a.shape());
    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::size_t base = r * w;
        double m = a[base];
        for (std::size_t j = 1; j < w; ++j) m = std::max(m, a[base + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < w; ++j) {
            out[base + j] = std::exp(a[base + j] - m);
            denom += out[base + j];
        }
        for (std::size_t j = 0; j < w; ++j) out[base + j] /= denom;
    }
    return out;
}

Tensor log_softmax_lastaxis(const Tensor& a) {
    if (a.ndim() == 0) return Tensor::scalar(0.0);
    const std::size_t w = a.shape().back();
    const std::size_t n_rows = a.numel() / w;
    Tensor out(a.shape());
    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::size_t base = r * w;
        double m = a[base];
        for (std::size_t j = 1; j < w; ++j) m = std::max(m, a[base + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < w; ++j) denom += std::exp(a[base + j] - m);
        const double lse = m + std::log(denom);
        for (std::size_t j = 0; j < w; ++j) out[base + j] = a[base + j] - lse;
    }
    return out;
}

double sum(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a[i];
    return s;
}

double mean(const Tensor& a) {
    if (a.numel() == 0) throw std::invalid_argument("mean: empty tensor");
    return sum(a) / static_cast<double>(a.numel());
}

double min_value(const Tensor& a) {
    if (a.numel() == 0) throw std::invalid_argument("min_value: empty tensor");
    double m = a[0];
    for (std::size_t i = 1; i < a.numel(); ++i) m = std::min(m, a[i]);
    return m;
}

double max_value(const Tensor& a) {
    if (a.numel() == 0) throw std::invalid_argument("max_value: empty tensor");
    double m = a[0];
    for (std::size_t i = 1; i < a.numel(); ++i) m = std::max(m, a[i]);
    return m;
}

double frobenius_norm(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * a[i];
    return std::sqrt(s);
}

double l1_norm(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += std::fabs(a[i]);
    return s;
}

double stddev(const Tensor& a) {
    if (a.numel() == 0) throw std::invalid_argument("stddev: empty tensor");
    const double mu = mean(a);
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = a[i] - mu;
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(a.numel()));
}

}  // namespace proxyforge
