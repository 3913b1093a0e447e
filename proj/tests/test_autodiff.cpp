#include "kooplab/autodiff.hpp"

#include <cmath>

#include "doctest.h"
#include "fd_check.hpp"
#include "kooplab/errors.hpp"

using namespace kooplab;
using kooplab::testing::check_gradients;

namespace {

Tensor random_tensor(std::vector<int> shape, CounterRng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

// Runs the FD oracle for a loss expressed as a function of bound parameters.
void expect_fd_match(const ParamStore& params,
                     const std::function<Var(Tape&, const BoundParams&)>& build, CounterRng& rng,
                     int samples = 6) {
    auto loss_value = [&](const ParamStore& ps) {
        Tape tape;
        BoundParams bound(tape, ps, true);
        return tape.value(build(tape, bound)).at(0);
    };
    auto loss_grads = [&](const ParamStore& ps) {
        Tape tape;
        BoundParams bound(tape, ps, true);
        tape.backward(build(tape, bound));
        return collect_grads(tape, bound);
    };
    auto report = check_gradients(loss_value, loss_grads, params, samples, rng);
    INFO("worst entry: ", report.worst);
    CHECK(report.max_rel_err < 1e-4);
}

}  // namespace

TEST_CASE("d/dx x^2 = 2x") {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(3.0));
    Var loss = tape.sum_squares_all(x);
    tape.backward(loss);
    CHECK(tape.value(loss).at(0) == 9.0);
    CHECK(tape.grad(x).at(0) == 6.0);
}

TEST_CASE("matmul gradients match finite differences") {
    CounterRng rng(100, 1);
    for (int trial = 0; trial < 20; ++trial) {
        ParamStore ps;
        ps.add("a", random_tensor({4, 5}, rng));
        ps.add("b", random_tensor({5, 3}, rng));
        expect_fd_match(ps, [](Tape& t, const BoundParams& p) {
            return t.sum_squares_all(t.matmul(p["a"], p["b"]));
        }, rng);
    }
}

TEST_CASE("layernorm + mse composite matches finite differences") {
    CounterRng rng(101, 1);
    Tensor target = random_tensor({1, 8}, rng);
    for (int trial = 0; trial < 20; ++trial) {
        ParamStore ps;
        ps.add("x", random_tensor({1, 8}, rng, -2.0, 2.0));
        ps.add("gamma", random_tensor({8}, rng, 0.5, 1.5));
        ps.add("beta", random_tensor({8}, rng, -0.5, 0.5));
        expect_fd_match(ps, [&](Tape& t, const BoundParams& p) {
            return t.mse_loss(t.layernorm_rows(p["x"], p["gamma"], p["beta"]), target);
        }, rng);
    }
}

TEST_CASE("every unary op passes the finite-difference check") {
    CounterRng rng(102, 1);
    struct Case {
        const char* name;
        std::function<Var(Tape&, Var)> op;
    };
    const Case cases[] = {
        {"relu", [](Tape& t, Var x) { return t.relu(x); }},
        {"gelu", [](Tape& t, Var x) { return t.gelu(x); }},
        {"tanh", [](Tape& t, Var x) { return t.tanh_(x); }},
        {"softmax", [](Tape& t, Var x) { return t.softmax_rows(x); }},
        {"causal_softmax", [](Tape& t, Var x) { return t.causal_softmax_rows(x); }},
        {"transpose", [](Tape& t, Var x) { return t.transpose(x); }},
        {"scale", [](Tape& t, Var x) { return t.scale(x, -1.7); }},
        {"slice", [](Tape& t, Var x) { return t.slice_cols(x, 1, 3); }},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        for (int trial = 0; trial < 20; ++trial) {
            ParamStore ps;
            // keep relu inputs away from the kink
            Tensor x = random_tensor({5, 5}, rng, -2.0, 2.0);
            for (std::int64_t i = 0; i < x.numel(); ++i)
                if (std::abs(x.data()[i]) < 0.05) x.data()[i] = 0.1;
            ps.add("x", x);
            expect_fd_match(ps, [&](Tape& t, const BoundParams& p) {
                return t.sum_squares_all(c.op(t, p["x"]));
            }, rng, 4);
        }
    }
}

TEST_CASE("binary ops pass the finite-difference check") {
    CounterRng rng(103, 1);
    for (int trial = 0; trial < 20; ++trial) {
        ParamStore ps;
        ps.add("a", random_tensor({3, 4}, rng));
        ps.add("b", random_tensor({3, 4}, rng));
        ps.add("v", random_tensor({4}, rng));
        expect_fd_match(ps, [](Tape& t, const BoundParams& p) {
            Var s = t.add(t.mul(p["a"], p["b"]), t.sub(p["a"], p["b"]));
            Var w = t.add_rowvec(s, p["v"]);
            Var c = t.concat_cols(w, t.mul(p["a"], p["a"]));
            return t.mean_all(c);
        }, rng);
    }
}

TEST_CASE("shared subexpressions accumulate gradients additively") {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(1.5));
    Var u = tape.mul(x, x);
    Var loss = tape.mean_all(tape.add(u, u));  // 2 x^2
    tape.backward(loss);
    CHECK(tape.grad(x).at(0) == doctest::Approx(4.0 * 1.5).epsilon(1e-14));
}

TEST_CASE("leaves off the loss path receive zero gradient") {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(2.0));
    Var unused = tape.leaf(Tensor::from({3}, {1, 2, 3}));
    Var loss = tape.sum_squares_all(x);
    tape.backward(loss);
    Tensor g = tape.grad(unused);
    for (int i = 0; i < 3; ++i) CHECK(g.at(i) == 0.0);
}

TEST_CASE("backward rejects non-scalar losses and foreign variables") {
    Tape tape;
    Var x = tape.leaf(Tensor::from({2}, {1.0, 2.0}));
    CHECK_THROWS_AS(tape.backward(x), NotScalarError);

    Tape other;
    Var y = other.leaf(Tensor::scalar(1.0));
    CHECK_THROWS_AS(tape.backward(y), DetachedNodeError);
    CHECK_THROWS_AS(tape.value(y), DetachedNodeError);
}

TEST_CASE("dropout scales kept entries and zeroes the rest") {
    CounterRng rng(7, rng_stream::kDropout);
    Tape tape;
    Var x = tape.leaf(Tensor::full({100, 10}, 1.0));
    Var y = tape.dropout(x, 0.4, rng);
    const Tensor& v = tape.value(y);
    int kept = 0;
    for (std::int64_t i = 0; i < v.numel(); ++i) {
        if (v.data()[i] != 0.0) {
            CHECK(v.data()[i] == doctest::Approx(1.0 / 0.6).epsilon(1e-12));
            ++kept;
        }
    }
    double keep_rate = static_cast<double>(kept) / static_cast<double>(v.numel());
    CHECK(keep_rate == doctest::Approx(0.6).epsilon(0.1));

    // rate 0 is the identity node
    Var z = tape.dropout(x, 0.0, rng);
    CHECK(z.id == x.id);
}

TEST_CASE("stack_rows splits gradients back to its inputs") {
    CounterRng rng(104, 1);
    ParamStore ps;
    ps.add("r0", random_tensor({1, 4}, rng));
    ps.add("r1", random_tensor({1, 4}, rng));
    ps.add("r2", random_tensor({2, 4}, rng));
    expect_fd_match(ps, [](Tape& t, const BoundParams& p) {
        Var s = t.stack_rows({p["r0"], p["r1"], p["r2"]});
        return t.sum_squares_all(t.matmul(s, t.transpose(s)));
    }, rng);
}
