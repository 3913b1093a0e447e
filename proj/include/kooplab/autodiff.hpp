#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kooplab/rng.hpp"
#include "kooplab/tensor.hpp"

namespace kooplab {

class Tape;

// Handle to a node on a specific tape.
struct Var {
    const Tape* tape = nullptr;
    int id = -1;
};

// Reverse-mode tape. Nodes are appended in evaluation order, which is already
// a topological order, so backward() is a single reverse sweep.
class Tape {
public:
    Var leaf(const Tensor& t, bool requires_grad = true);
    Var constant(const Tensor& t) { return leaf(t, false); }
    Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var scale(Var a, double c);
    Var add_rowvec(Var a, Var v);
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var relu(Var a);
    Var gelu(Var a);
    Var tanh_(Var a);
    Var softmax_rows(Var a);
    // Row i of the output is a softmax over columns 0..i; later columns are
    // exactly zero. This is the causal-attention kernel.
    Var causal_softmax_rows(Var a);
    Var layernorm_rows(Var x, Var gamma, Var beta);
    Var concat_cols(Var a, Var b);
    Var stack_rows(const std::vector<Var>& rows);
    Var slice_cols(Var a, int begin, int count);
    Var slice_rows(Var a, int begin, int count);
    Var mean_all(Var a);
    Var sum_squares_all(Var a);
    Var mse_loss(Var pred, const Tensor& target);
    // Inverted dropout; scales kept entries by 1/(1-rate). rate 0 is identity.
    Var dropout(Var a, double rate, CounterRng& rng);
    // Escape hatch for shape-changing ops with bespoke gradients. vjp receives
    // the output cotangent and must accumulate into the parents' grads.
    Var custom(std::vector<Var> parents, Tensor value,
               std::function<void(Tape&, const Tensor& dout, const std::vector<Var>& parents)> vjp);

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. loss must be
    // a scalar node of this tape.
    void backward(Var loss);

    const Tensor& value(Var v) const;
    // Zero tensor when the node was never reached by backward().
    Tensor grad(Var v) const;
    void accumulate_grad(Var v, const Tensor& g);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool grad_set = false;
        std::function<void(Tape&)> backprop;
    };

    std::vector<Node> nodes_;

    int check(Var v, const char* op) const;
    bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
    Var push(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop);
    void accumulate(int id, const Tensor& g);
};

// Leaves for every entry of a parameter store, in deterministic name order.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor t);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const { return items_.count(name) > 0; }
    std::int64_t total_numel() const;
    const std::map<std::string, Tensor>& items() const { return items_; }
    std::map<std::string, Tensor>& items() { return items_; }

private:
    std::map<std::string, Tensor> items_;
};

class BoundParams {
public:
    BoundParams(Tape& tape, const ParamStore& params, bool requires_grad);
    Var operator[](const std::string& name) const;
    const std::map<std::string, Var>& vars() const { return vars_; }

private:
    std::map<std::string, Var> vars_;
};

using GradMap = std::map<std::string, Tensor>;

GradMap collect_grads(const Tape& tape, const BoundParams& bound);

}  // namespace kooplab
