#include "kooplab/optim.hpp"

#include <cmath>

#include "kooplab/errors.hpp"

namespace kooplab {

OptimizerKind optimizer_from_name(const std::string& name) {
    if (name == "adam" || name == "Adam") return OptimizerKind::Adam;
    if (name == "adamw" || name == "AdamW" || name == "Adamw") return OptimizerKind::AdamW;
    throw ConfigError("unknown optimizer: " + name);
}

const char* optimizer_name(OptimizerKind k) {
    return k == OptimizerKind::Adam ? "adam" : "adamw";
}

void optimizer_step(OptimizerState& state, ParamStore& params, const GradMap& grads) {
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

    for (const auto& [name, grad] : grads) {
        Tensor& p = params.get(name);
        if (!p.same_shape(grad))
            throw ShapeMismatchError("optimizer_step: param " + name + " " + p.shape_str() +
                                     " vs grad " + grad.shape_str());
        auto mit = state.m.find(name);
        if (mit == state.m.end()) {
            mit = state.m.emplace(name, Tensor(p.shape())).first;
            state.v.emplace(name, Tensor(p.shape()));
        }
        Tensor& m = mit->second;
        Tensor& v = state.v.at(name);

        const std::int64_t n = p.numel();
        double* pp = p.data();
        double* pm = m.data();
        double* pv = v.data();
        const double* pg = grad.data();
        for (std::int64_t i = 0; i < n; ++i) {
            double g = pg[i];
            if (state.kind == OptimizerKind::Adam) {
                g += state.weight_decay * pp[i];
            } else {
                pp[i] *= 1.0 - state.lr * state.weight_decay;
            }
            pm[i] = state.beta1 * pm[i] + (1.0 - state.beta1) * g;
            pv[i] = state.beta2 * pv[i] + (1.0 - state.beta2) * g * g;
            double mhat = pm[i] / bc1;
            double vhat = pv[i] / bc2;
            pp[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

Tensor init_kaiming_uniform(std::vector<int> shape, int fan_in, CounterRng& rng) {
    if (fan_in <= 0) throw ConfigError("init_kaiming_uniform: fan_in must be positive");
    Tensor t(std::move(shape));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-bound, bound);
    return t;
}

Tensor init_normal(std::vector<int> shape, double std, CounterRng& rng) {
    if (std <= 0.0) throw ConfigError("init_normal: std must be positive");
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.normal(0.0, std);
    return t;
}

}  // namespace kooplab
