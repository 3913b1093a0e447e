#include "kooplab/tensor.hpp"

#include <cmath>
#include <cstring>

#include "kooplab/errors.hpp"

namespace kooplab {

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    std::int64_t n = 1;
    for (int d : shape_) {
        if (d < 0) throw ShapeMismatchError("negative dimension in shape " + shape_str());
        n *= d;
    }
    data_.assign(static_cast<std::size_t>(n), 0.0);
}

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data) {
    Tensor t;
    t.shape_ = std::move(shape);
    std::int64_t n = 1;
    for (int d : t.shape_) n *= d;
    if (n != static_cast<std::int64_t>(data.size()))
        throw ShapeMismatchError("data length " + std::to_string(data.size()) +
                                 " does not match shape " + t.shape_str());
    t.data_ = std::move(data);
    return t;
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeMismatchError(std::string(op) + ": shapes " + a.shape_str() + " vs " +
                                 b.shape_str());
}

static void check_2d(const Tensor& t, const char* op) {
    if (t.ndim() != 2) throw ShapeMismatchError(std::string(op) + ": expected 2-D, got " + t.shape_str());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul");
    check_2d(b, "matmul");
    if (a.cols() != b.rows())
        throw ShapeMismatchError("matmul: shapes " + a.shape_str() + " vs " + b.shape_str());
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    // i-k-j accumulation, k unrolled by 4: streams rows of b and amortizes the
    // accumulator row traffic.
    for (int i = 0; i < m; ++i) {
        double* crow = pc + static_cast<std::size_t>(i) * n;
        const double* arow = pa + static_cast<std::size_t>(i) * k;
        int kk = 0;
        for (; kk + 4 <= k; kk += 4) {
            const double a0 = arow[kk], a1 = arow[kk + 1], a2 = arow[kk + 2], a3 = arow[kk + 3];
            const double* b0 = pb + static_cast<std::size_t>(kk) * n;
            const double* b1 = b0 + n;
            const double* b2 = b1 + n;
            const double* b3 = b2 + n;
            for (int j = 0; j < n; ++j) crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
        }
        for (; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = pb + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul_tn");
    check_2d(b, "matmul_tn");
    if (a.rows() != b.rows())
        throw ShapeMismatchError("matmul_tn: shapes " + a.shape_str() + " vs " + b.shape_str());
    const int m = a.cols(), k = a.rows(), n = b.cols();
    Tensor c({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    int kk = 0;
    for (; kk + 4 <= k; kk += 4) {
        const double* a0 = pa + static_cast<std::size_t>(kk) * m;
        const double* a1 = a0 + m;
        const double* a2 = a1 + m;
        const double* a3 = a2 + m;
        const double* b0 = pb + static_cast<std::size_t>(kk) * n;
        const double* b1 = b0 + n;
        const double* b2 = b1 + n;
        const double* b3 = b2 + n;
        for (int i = 0; i < m; ++i) {
            double* crow = pc + static_cast<std::size_t>(i) * n;
            const double v0 = a0[i], v1 = a1[i], v2 = a2[i], v3 = a3[i];
            for (int j = 0; j < n; ++j) crow[j] += v0 * b0[j] + v1 * b1[j] + v2 * b2[j] + v3 * b3[j];
        }
    }
    for (; kk < k; ++kk) {
        const double* arow = pa + static_cast<std::size_t>(kk) * m;
        const double* brow = pb + static_cast<std::size_t>(kk) * n;
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = pc + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul_nt");
    check_2d(b, "matmul_nt");
    if (a.cols() != b.cols())
        throw ShapeMismatchError("matmul_nt: shapes " + a.shape_str() + " vs " + b.shape_str());
    // The transpose copy is cheap next to the multiply and the i-k-j kernel is
    // far faster than short dot products here.
    return matmul(a, transpose(b));
}

#define KOOPLAB_EW_OP(name, expr)                                   \
    Tensor name(const Tensor& a, const Tensor& b) {                 \
        check_same_shape(a, b, #name);                              \
        Tensor c = a;                                               \
        double* pc = c.data();                                      \
        const double* pb = b.data();                                \
        const std::int64_t n = c.numel();                           \
        for (std::int64_t i = 0; i < n; ++i) pc[i] = expr;          \
        return c;                                                   \
    }

KOOPLAB_EW_OP(add, pc[i] + pb[i])
KOOPLAB_EW_OP(sub, pc[i] - pb[i])
KOOPLAB_EW_OP(hadamard, pc[i] * pb[i])
#undef KOOPLAB_EW_OP

Tensor scale(const Tensor& a, double c) {
    Tensor out = a;
    double* p = out.data();
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) p[i] *= c;
    return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    check_2d(a, "add_rowvec");
    if (v.ndim() != 1 || v.dim(0) != a.cols())
        throw ShapeMismatchError("add_rowvec: shapes " + a.shape_str() + " vs " + v.shape_str());
    Tensor c = a;
    const int m = a.rows(), n = a.cols();
    const double* pv = v.data();
    double* pc = c.data();
    for (int i = 0; i < m; ++i) {
        double* row = pc + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) row[j] += pv[j];
    }
    return c;
}

Tensor transpose(const Tensor& a) {
    check_2d(a, "transpose");
    Tensor c({a.cols(), a.rows()});
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) c.at(j, i) = a.at(i, j);
    return c;
}

Tensor relu(const Tensor& a) {
    Tensor c = a;
    double* p = c.data();
    const std::int64_t n = c.numel();
    for (std::int64_t i = 0; i < n; ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
    return c;
}

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad_scalar(double x) {
    double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    double pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779399460599344;
    return cdf + x * pdf;
}

Tensor gelu(const Tensor& a) {
    Tensor c = a;
    double* p = c.data();
    const std::int64_t n = c.numel();
    for (std::int64_t i = 0; i < n; ++i) p[i] = gelu_scalar(p[i]);
    return c;
}

Tensor tanh_t(const Tensor& a) {
    Tensor c = a;
    double* p = c.data();
    const std::int64_t n = c.numel();
    for (std::int64_t i = 0; i < n; ++i) p[i] = std::tanh(p[i]);
    return c;
}

Tensor softmax_rows(const Tensor& a) {
    check_2d(a, "softmax_rows");
    Tensor c = a;
    const int m = a.rows(), n = a.cols();
    double* pc = c.data();
    for (int i = 0; i < m; ++i) {
        double* row = pc + static_cast<std::size_t>(i) * n;
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (int j = 0; j < n; ++j) row[j] /= sum;
    }
    return c;
}

Tensor layernorm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      LayerNormCache* cache) {
    check_2d(x, "layernorm_rows");
    const int m = x.rows(), n = x.cols();
    if (gamma.ndim() != 1 || gamma.dim(0) != n || beta.ndim() != 1 || beta.dim(0) != n)
        throw ShapeMismatchError("layernorm_rows: scale/shift must be [" + std::to_string(n) + "]");
    constexpr double kEps = 1e-5;
    Tensor y({m, n});
    if (cache) {
        cache->xhat = Tensor({m, n});
        cache->rstd.assign(static_cast<std::size_t>(m), 0.0);
    }
    const double* pg = gamma.data();
    const double* pb = beta.data();
    for (int i = 0; i < m; ++i) {
        const double* row = x.data() + static_cast<std::size_t>(i) * n;
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += row[j];
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            double d = row[j] - mean;
            var += d * d;
        }
        var /= n;
        double rstd = 1.0 / std::sqrt(var + kEps);
        double* yrow = y.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            double xh = (row[j] - mean) * rstd;
            if (cache) cache->xhat.at(i, j) = xh;
            yrow[j] = xh * pg[j] + pb[j];
        }
        if (cache) cache->rstd[static_cast<std::size_t>(i)] = rstd;
    }
    return y;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    check_2d(a, "concat_cols");
    check_2d(b, "concat_cols");
    if (a.rows() != b.rows())
        throw ShapeMismatchError("concat_cols: shapes " + a.shape_str() + " vs " + b.shape_str());
    Tensor c({a.rows(), a.cols() + b.cols()});
    for (int i = 0; i < a.rows(); ++i) {
        std::memcpy(c.data() + static_cast<std::size_t>(i) * c.cols(),
                    a.data() + static_cast<std::size_t>(i) * a.cols(),
                    sizeof(double) * static_cast<std::size_t>(a.cols()));
        std::memcpy(c.data() + static_cast<std::size_t>(i) * c.cols() + a.cols(),
                    b.data() + static_cast<std::size_t>(i) * b.cols(),
                    sizeof(double) * static_cast<std::size_t>(b.cols()));
    }
    return c;
}

Tensor slice_cols(const Tensor& a, int begin, int count) {
    check_2d(a, "slice_cols");
    if (begin < 0 || count < 0 || begin + count > a.cols())
        throw ShapeMismatchError("slice_cols: range [" + std::to_string(begin) + "," +
                                 std::to_string(begin + count) + ") of " + a.shape_str());
    Tensor c({a.rows(), count});
    for (int i = 0; i < a.rows(); ++i)
        std::memcpy(c.data() + static_cast<std::size_t>(i) * count,
                    a.data() + static_cast<std::size_t>(i) * a.cols() + begin,
                    sizeof(double) * static_cast<std::size_t>(count));
    return c;
}

Tensor slice_rows(const Tensor& a, int begin, int count) {
    check_2d(a, "slice_rows");
    if (begin < 0 || count < 0 || begin + count > a.rows())
        throw ShapeMismatchError("slice_rows: range [" + std::to_string(begin) + "," +
                                 std::to_string(begin + count) + ") of " + a.shape_str());
    Tensor c({count, a.cols()});
    std::memcpy(c.data(), a.data() + static_cast<std::size_t>(begin) * a.cols(),
                sizeof(double) * static_cast<std::size_t>(count) * a.cols());
    return c;
}

double sum_all(const Tensor& a) {
    double acc = 0.0;
    const double* p = a.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) acc += p[i];
    return acc;
}

double mean_all(const Tensor& a) {
    if (a.numel() == 0) throw EmptyInputError("mean of empty tensor");
    return sum_all(a) / static_cast<double>(a.numel());
}

double sum_squares(const Tensor& a) {
    double acc = 0.0;
    const double* p = a.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) acc += p[i] * p[i];
    return acc;
}

double mse(const Tensor& pred, const Tensor& target) {
    // Mean over samples (first axis) of the squared norm of the residual, so
    // a [N,d] pair averages N squared row norms.
    check_same_shape(pred, target, "mse");
    if (pred.numel() == 0) throw EmptyInputError("mse of empty tensors");
    double acc = 0.0;
    const double* pp = pred.data();
    const double* pt = target.data();
    const std::int64_t n = pred.numel();
    for (std::int64_t i = 0; i < n; ++i) {
        double d = pp[i] - pt[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.dim(0));
}

}  // namespace kooplab
