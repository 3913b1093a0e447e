#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kooplab {

// Dense row-major float64 tensor. All model math in the repo runs in doubles
// so finite-difference oracles and cross-run determinism stay clean.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);  // zero-filled

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double v);
    static Tensor from(std::vector<int> shape, std::vector<double> data);
    static Tensor scalar(double v) { return from({1}, {v}); }

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    std::string shape_str() const;

    // 2-D helpers; valid only when ndim() == 2
    int rows() const { return shape_[0]; }
    int cols() const { return shape_[1]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& at(int i) { return data_[static_cast<std::size_t>(i)]; }
    double at(int i) const { return data_[static_cast<std::size_t>(i)]; }
    double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }

    bool all_finite() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

void check_same_shape(const Tensor& a, const Tensor& b, const char* op);

// ---- kernels (shared by the autodiff tape and eval-mode forwards) ----

Tensor matmul(const Tensor& a, const Tensor& b);     // [M,K]@[K,N]
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T @ b
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a @ b^T

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_rowvec(const Tensor& a, const Tensor& v);  // [M,N] + [N]
Tensor transpose(const Tensor& a);                    // 2-D

Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);   // exact Gaussian-CDF form
Tensor tanh_t(const Tensor& a);

double gelu_scalar(double x);
double gelu_grad_scalar(double x);

// Softmax over the last axis of a 2-D tensor.
Tensor softmax_rows(const Tensor& a);

struct LayerNormCache {
    Tensor xhat;
    std::vector<double> rstd;
};
// Normalizes each row to zero mean / unit variance (eps 1e-5), then applies
// the learned elementwise scale and shift.
Tensor layernorm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      LayerNormCache* cache = nullptr);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, int begin, int count);
Tensor slice_rows(const Tensor& a, int begin, int count);

double sum_all(const Tensor& a);
double mean_all(const Tensor& a);
double sum_squares(const Tensor& a);
double mse(const Tensor& pred, const Tensor& target);

}  // namespace kooplab
