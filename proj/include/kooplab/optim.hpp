#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "kooplab/autodiff.hpp"
#include "kooplab/rng.hpp"
#include "kooplab/tensor.hpp"

namespace kooplab {

enum class OptimizerKind { Adam, AdamW };

OptimizerKind optimizer_from_name(const std::string& name);
const char* optimizer_name(OptimizerKind k);

// Adam applies weight decay as an L2 term folded into the gradient; AdamW
// decays the parameter directly (param *= 1 - lr*wd) before the moment update.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    std::int64_t step_count = 0;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
};

// Updates every parameter that has an entry in grads; parameters without a
// gradient entry are left untouched (frozen).
void optimizer_step(OptimizerState& state, ParamStore& params, const GradMap& grads);

Tensor init_kaiming_uniform(std::vector<int> shape, int fan_in, CounterRng& rng);
Tensor init_normal(std::vector<int> shape, double std, CounterRng& rng);

}  // namespace kooplab
