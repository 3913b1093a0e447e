#include "kooplab/autodiff.hpp"

#include <cmath>
#include <cstring>
#include <memory>

#include "kooplab/errors.hpp"

namespace kooplab {

int Tape::check(Var v, const char* op) const {
    if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
        throw DetachedNodeError(std::string(op) + ": variable does not belong to this tape");
    return v.id;
}

Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(int id, const Tensor& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    if (!n.grad_set) {
        n.grad = g;
        n.grad_set = true;
        return;
    }
    check_same_shape(n.grad, g, "grad accumulate");
    double* pd = n.grad.data();
    const double* ps = g.data();
    const std::int64_t m = g.numel();
    for (std::int64_t i = 0; i < m; ++i) pd[i] += ps[i];
}

void Tape::accumulate_grad(Var v, const Tensor& g) { accumulate(check(v, "accumulate_grad"), g); }

Var Tape::leaf(const Tensor& t, bool requires_grad) { return push(t, requires_grad, nullptr); }

const Tensor& Tape::value(Var v) const { return nodes_[static_cast<std::size_t>(check(v, "value"))].value; }

Tensor Tape::grad(Var v) const {
    const Node& n = nodes_[static_cast<std::size_t>(check(v, "grad"))];
    if (!n.grad_set) return Tensor(n.value.shape());
    return n.grad;
}

void Tape::backward(Var loss) {
    int id = check(loss, "backward");
    Node& ln = nodes_[static_cast<std::size_t>(id)];
    if (ln.value.numel() != 1)
        throw NotScalarError("backward: loss has shape " + ln.value.shape_str());
    if (!ln.requires_grad) return;  // nothing to do: no parameter feeds the loss
    accumulate(id, Tensor::full(ln.value.shape(), 1.0));
    for (int i = id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad_set && n.backprop) n.backprop(*this);
    }
}

// -- helpers shared by op closures -----------------------------------------

namespace {
Tensor colsum(const Tensor& g) {
    Tensor out({g.cols()});
    for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j) out.at(j) += g.at(i, j);
    return out;
}
}  // namespace

#define GRAD_OF(vid) nodes_[static_cast<std::size_t>(vid)].grad
#define VALUE_OF(vid) nodes_[static_cast<std::size_t>(vid)].value

Var Tape::add(Var a, Var b) {
    int ia = check(a, "add"), ib = check(b, "add");
    Tensor out = kooplab::add(VALUE_OF(ia), VALUE_OF(ib));
    bool rg = needs_grad(a) || needs_grad(b);
    int self = static_cast<int>(nodes_.size());
    return push(std::move(out), rg, [ia, ib, self](Tape& t) {
        const Tensor& g = t.GRAD_OF(self);
        t.accumulate(ia, g);
        t.accumulate(ib, g);
    });
}

Var Tape::sub(Var a, Var b) {
    int ia = check(a, "sub"), ib = check(b, "sub");
    Tensor out = kooplab::sub(VALUE_OF(ia), VALUE_OF(ib));
    bool rg = needs_grad(a) || needs_grad(b);
    int self = static_cast<int>(nodes_.size());
    return push(std::move(out), rg, [ia, ib, self](Tape& t) {
        const Tensor& g = t.GRAD_OF(self);
        t.accumulate(ia, g);
        t.accumulate(ib, kooplab::scale(g, -1.0));
    });
}

Var Tape::mul(Var a, Var b) {
    int ia = check(a, "mul"), ib = check(b, "mul");
    Tensor out = hadamard(VALUE_OF(ia), VALUE_OF(ib));
    bool rg = needs_grad(a) || needs_grad(b);
    int self = static_cast<int>(nodes_.size());
    return push(std::move(out), rg, [ia, ib, self](Tape& t) {
        const Tensor& g = t.GRAD_OF(self);
        t.accumulate(ia, hadamard(g, t.VALUE_OF(ib)));
        t.accumulate(ib, hadamard(g, t.VALUE_OF(ia)));
    });
}

Var Tape::scale(Var a, double c) {
    int ia = check(a, "scale");
    Tensor out = kooplab::scale(VALUE_OF(ia), c);
    int self = static_cast<int>(nodes_.size());
    return push(std::move(out), needs_grad(a), [ia, c, self](Tape& t) {
        t.accumulate(ia, kooplab::scale(t.GRAD_OF(self), c));
    });
}

Var Tape::add_rowvec(Var a, Var v) {
    int ia = check(a, "add_rowvec"), iv = check(v, "add_rowvec");
    Tensor out = kooplab::add_rowvec(VALUE_OF(ia), VALUE_OF(iv));
    bool rg = needs_grad(a) || needs_grad(v);
    int self = static_cast<int>(nodes_.size());
    return push(std::move(out), rg, [ia, iv, self](Tape& t) {
        const Tensor& g = t.GRAD_OF(self);
        t.accumulate(ia, g);
        t.accumulate(iv, colsum(g));
    });
}

Var Tape::matmul(Var a, Var b) {
    int ia = check(a, "matmul"), ib = check(b, "matmul");
    Tensor out = kooplab::matmul(VALUE_OF(ia), VALUE_OF(ib));
    bool rg = needs_grad(a) || needs_grad(b);
    int self = static_cast<int>(nodes_.size());
    bool ga = needs_grad(a), gb = needs_grad(b);
    return push(std::move(out), rg, [ia, ib, self, ga, gb](Tape& t) {
        const Tensor& g = t.GRAD_OF(self);
        if (ga) t.accumulate(ia, matmul_nt(g, t.VALUE_OF(ib)));
        if (gb) t.accumulate(ib, matmul_tn(t.VALUE_OF(ia), g));
    });
}

Var Tape::transpose(Var a) {
    int ia = check(a, "transpose");
    Tensor out = kooplab::transpose(VALUE_OF(ia));
    int self = static_cast<int>(nodes_.size());
    return push(std::move(out), needs_grad(a), [ia, self](Tape& t) {
        t.accumulate(ia, kooplab::transpose(t.GRAD_OF(self)));
    });
}

Var Tape::relu(Var a) {
    int ia = check(a, "relu");
    Tensor out = kooplab::relu(VALUE_OF(ia));
    int self = static_cast<int>(nodes_.size());
    return push(std::move(out), needs_grad(a), [ia, self](Tape& t) {
        Tensor g = t.GRAD_OF(self);
        const Tensor& x = t.VALUE_OF(ia);
        for (std::int64_t i = 0; i < g.numel(); ++i)
            if (x.data()[i] <= 0.0) g.data()[i] = 0.0;
        t.accumulate(ia, g);
    });
}

Var Tape::gelu(Var a) {
    int ia = check(a, "gelu");
    Tensor out = kooplab::gelu(VALUE_OF(ia));
    int self = static_cast<int>(nodes_.size());
    return push(std::move(out), needs_grad(a), [ia, self](Tape& t) {
        Tensor g = t.GRAD_OF(self);
        const Tensor& x = t.VALUE_OF(ia);
        for (std::int64_t i = 0; i < g.numel(); ++i) g.data()[i] *= gelu_grad_scalar(x.data()[i]);
        t.accumulate(ia, g);
    });
}

Var Tape::tanh_(Var a) {
    int ia = check(a, "tanh");
    Tensor out = tanh_t(VALUE_OF(ia));
    int self = static_cast<int>(nodes_.size());
    return push(std::move(out), needs_grad(a), [ia, self](Tape& t) {
        Tensor g = t.GRAD_OF(self);
        const Tensor& y = t.VALUE_OF(self);
        for (std::int64_t i = 0; i < g.numel(); ++i) {
            double yv = y.data()[i];
            g.data()[i] *= 1.0 - yv * yv;
        }
        t.accumulate(ia, g);
    });
}

Var Tape::softmax_rows(Var a) {
    int ia = check(a, "softmax_rows");
    Tensor out = kooplab::softmax_rows(VALUE_OF(ia));
    int self = static_cast<int>(nodes_.size());
    return push(std::move(out), needs_grad(a), [ia, self](Tape& t) {
        const Tensor& g = t.GRAD_OF(self);
        const Tensor& y = t.VALUE_OF(self);
        Tensor dx(y.shape());
        for (int i = 0; i < y.rows(); ++i) {
            double dot = 0.0;
            for (int j = 0; j < y.cols(); ++j) dot += g.at(i, j) * y.at(i, j);
            for (int j = 0; j < y.cols(); ++j) dx.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
        }
        t.accumulate(ia, dx);
    });
}

Var Tape::causal_softmax_rows(Var a) {
    int ia = check(a, "causal_softmax_rows");
    const Tensor& x = VALUE_OF(ia);
    if (x.ndim() != 2) throw ShapeMismatchError("causal_softmax_rows: expected 2-D");
    Tensor out(x.shape());
    for (int i = 0; i < x.rows(); ++i) {
        int limit = std::min(i, x.cols() - 1);
        double mx = x.at(i, 0);
        for (int j = 1; j <= limit; ++j) mx = std::max(mx, x.at(i, j));
        double sum = 0.0;
        for (int j = 0; j <= limit; ++j) {
            double e = std::exp(x.at(i, j) - mx);
            out.at(i, j) = e;
            sum += e;
        }
        for (int j = 0; j <= limit; ++j) out.at(i, j) /= sum;
    }
    int self = static_cast<int>(nodes_.size());
    return push(std::move(out), needs_grad(a), [ia, self](Tape& t) {
        const Tensor& g = t.GRAD_OF(self);
        const Tensor& y = t.VALUE_OF(self);
        Tensor dx(y.shape());
        for (int i = 0; i < y.rows(); ++i) {
            int limit = std::min(i, y.cols() - 1);
            double dot = 0.0;
            for (int j = 0; j <= limit; ++j) dot += g.at(i, j) * y.at(i, j);
            for (int j = 0; j <= limit; ++j) dx.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
        }
        t.accumulate(ia, dx);
    });
}

Var Tape::layernorm_rows(Var x, Var gamma, Var beta) {
    int ix = check(x, "layernorm"), ig = check(gamma, "layernorm"), ib = check(beta, "layernorm");
    auto cache = std::make_shared<LayerNormCache>();
    Tensor out = kooplab::layernorm_rows(VALUE_OF(ix), VALUE_OF(ig), VALUE_OF(ib), cache.get());
    bool rg = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
    int self = static_cast<int>(nodes_.size());
    bool gx = needs_grad(x);
    return push(std::move(out), rg, [ix, ig, ib, self, cache, gx](Tape& t) {
        const Tensor& g = t.GRAD_OF(self);
        const Tensor& gamma_v = t.VALUE_OF(ig);
        const int m = g.rows(), n = g.cols();
        Tensor dgamma({n}), dbeta({n});
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                dgamma.at(j) += g.at(i, j) * cache->xhat.at(i, j);
                dbeta.at(j) += g.at(i, j);
            }
        t.accumulate(ig, dgamma);
        t.accumulate(ib, dbeta);
        if (!gx) return;
        Tensor dx({m, n});
        for (int i = 0; i < m; ++i) {
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int j = 0; j < n; ++j) {
                double dxhat = g.at(i, j) * gamma_v.at(j);
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * cache->xhat.at(i, j);
            }
            double rstd = cache->rstd[static_cast<std::size_t>(i)];
            for (int j = 0; j < n; ++j) {
                double dxhat = g.at(i, j) * gamma_v.at(j);
                dx.at(i, j) =
                    (rstd / n) * (n * dxhat - sum_dxhat - cache->xhat.at(i, j) * sum_dxhat_xhat);
            }
        }
        t.accumulate(ix, dx);
    });
}

Var Tape::concat_cols(Var a, Var b) {
    int ia = check(a, "concat_cols"), ib = check(b, "concat_cols");
    Tensor out = kooplab::concat_cols(VALUE_OF(ia), VALUE_OF(ib));
    bool rg = needs_grad(a) || needs_grad(b);
    int self = static_cast<int>(nodes_.size());
    int na = VALUE_OF(ia).cols(), nb = VALUE_OF(ib).cols();
    return push(std::move(out), rg, [ia, ib, self, na, nb](Tape& t) {
        const Tensor& g = t.GRAD_OF(self);
        t.accumulate(ia, kooplab::slice_cols(g, 0, na));
        t.accumulate(ib, kooplab::slice_cols(g, na, nb));
    });
}

Var Tape::stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw EmptyInputError("stack_rows: no rows");
    std::vector<int> ids;
    ids.reserve(rows.size());
    bool rg = false;
    int total_rows = 0;
    int cols = VALUE_OF(check(rows[0], "stack_rows")).cols();
    for (Var r : rows) {
        int id = check(r, "stack_rows");
        const Tensor& v = VALUE_OF(id);
        if (v.ndim() != 2 || v.cols() != cols)
            throw ShapeMismatchError("stack_rows: inconsistent row shapes");
        total_rows += v.rows();
        rg = rg || needs_grad(r);
        ids.push_back(id);
    }
    Tensor out({total_rows, cols});
    int at = 0;
    for (int id : ids) {
        const Tensor& v = VALUE_OF(id);
        std::memcpy(out.data() + static_cast<std::size_t>(at) * cols, v.data(),
                    sizeof(double) * static_cast<std::size_t>(v.numel()));
        at += v.rows();
    }
    int self = static_cast<int>(nodes_.size());
    return push(std::move(out), rg, [ids, self](Tape& t) {
        const Tensor& g = t.GRAD_OF(self);
        int row = 0;
        for (int id : ids) {
            int r = t.VALUE_OF(id).rows();
            t.accumulate(id, kooplab::slice_rows(g, row, r));
            row += r;
        }
    });
}

Var Tape::slice_cols(Var a, int begin, int count) {
    int ia = check(a, "slice_cols");
    Tensor out = kooplab::slice_cols(VALUE_OF(ia), begin, count);
    int self = static_cast<int>(nodes_.size());
    return push(std::move(out), needs_grad(a), [ia, begin, count, self](Tape& t) {
        const Tensor& g = t.GRAD_OF(self);
        Tensor dx(t.VALUE_OF(ia).shape());
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < count; ++j) dx.at(i, begin + j) = g.at(i, j);
        t.accumulate(ia, dx);
    });
}

Var Tape::slice_rows(Var a, int begin, int count) {
    int ia = check(a, "slice_rows");
    Tensor out = kooplab::slice_rows(VALUE_OF(ia), begin, count);
    int self = static_cast<int>(nodes_.size());
    return push(std::move(out), needs_grad(a), [ia, begin, count, self](Tape& t) {
        const Tensor& g = t.GRAD_OF(self);
        Tensor dx(t.VALUE_OF(ia).shape());
        for (int i = 0; i < count; ++i)
            for (int j = 0; j < g.cols(); ++j) dx.at(begin + i, j) = g.at(i, j);
        t.accumulate(ia, dx);
    });
}

Var Tape::mean_all(Var a) {
    int ia = check(a, "mean_all");
    double m = kooplab::mean_all(VALUE_OF(ia));
    int self = static_cast<int>(nodes_.size());
    return push(Tensor::scalar(m), needs_grad(a), [ia, self](Tape& t) {
        double g = t.GRAD_OF(self).at(0);
        const Tensor& x = t.VALUE_OF(ia);
        t.accumulate(ia, Tensor::full(x.shape(), g / static_cast<double>(x.numel())));
    });
}

Var Tape::sum_squares_all(Var a) {
    int ia = check(a, "sum_squares_all");
    double s = kooplab::sum_squares(VALUE_OF(ia));
    int self = static_cast<int>(nodes_.size());
    return push(Tensor::scalar(s), needs_grad(a), [ia, self](Tape& t) {
        double g = t.GRAD_OF(self).at(0);
        t.accumulate(ia, kooplab::scale(t.VALUE_OF(ia), 2.0 * g));
    });
}

Var Tape::mse_loss(Var pred, const Tensor& target) {
    int ip = check(pred, "mse_loss");
    const Tensor& p = VALUE_OF(ip);
    check_same_shape(p, target, "mse_loss");
    double loss = kooplab::mse(p, target);
    int self = static_cast<int>(nodes_.size());
    auto tgt = std::make_shared<Tensor>(target);
    return push(Tensor::scalar(loss), needs_grad(pred), [ip, self, tgt](Tape& t) {
        double g = t.GRAD_OF(self).at(0);
        const Tensor& pv = t.VALUE_OF(ip);
        double c = 2.0 * g / static_cast<double>(pv.dim(0));
        t.accumulate(ip, kooplab::scale(kooplab::sub(pv, *tgt), c));
    });
}

Var Tape::dropout(Var a, double rate, CounterRng& rng) {
    int ia = check(a, "dropout");
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0,1)");
    const Tensor& x = VALUE_OF(ia);
    if (rate == 0.0) return Var{this, ia};
    auto mask = std::make_shared<Tensor>(x.shape());
    double keep = 1.0 - rate;
    for (std::int64_t i = 0; i < x.numel(); ++i)
        mask->data()[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
    Tensor out = hadamard(x, *mask);
    int self = static_cast<int>(nodes_.size());
    return push(std::move(out), needs_grad(a), [ia, self, mask](Tape& t) {
        t.accumulate(ia, hadamard(t.GRAD_OF(self), *mask));
    });
}

Var Tape::custom(std::vector<Var> parents, Tensor value,
                 std::function<void(Tape&, const Tensor&, const std::vector<Var>&)> vjp) {
    bool rg = false;
    for (Var p : parents) {
        check(p, "custom");
        rg = rg || needs_grad(p);
    }
    int self = static_cast<int>(nodes_.size());
    auto ps = std::make_shared<std::vector<Var>>(std::move(parents));
    return push(std::move(value), rg, [self, ps, vjp = std::move(vjp)](Tape& t) {
        vjp(t, t.GRAD_OF(self), *ps);
    });
}

#undef GRAD_OF
#undef VALUE_OF

// -- parameter stores --------------------------------------------------------

Tensor& ParamStore::add(const std::string& name, Tensor t) {
    auto [it, inserted] = items_.emplace(name, std::move(t));
    if (!inserted) throw ConfigError("duplicate parameter name: " + name);
    return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
    auto it = items_.find(name);
    if (it == items_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = items_.find(name);
    if (it == items_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

std::int64_t ParamStore::total_numel() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
}

BoundParams::BoundParams(Tape& tape, const ParamStore& params, bool requires_grad) {
    for (const auto& [name, t] : params.items()) vars_.emplace(name, tape.leaf(t, requires_grad));
}

Var BoundParams::operator[](const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw ConfigError("unbound parameter: " + name);
    return it->second;
}

GradMap collect_grads(const Tape& tape, const BoundParams& bound) {
    GradMap g;
    for (const auto& [name, var] : bound.vars()) g.emplace(name, tape.grad(var));
    return g;
}

}  // namespace kooplab
