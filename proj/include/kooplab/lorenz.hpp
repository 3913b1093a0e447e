#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace kooplab {

struct LorenzParams {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
};

struct State3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    State3 operator+(const State3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    State3 operator-(const State3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    State3 operator*(double c) const { return {x * c, y * c, z * c}; }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double distance(const State3& a, const State3& b) { return (a - b).norm(); }

struct IntegratorConfig {
    double dt_sample = 0.01;
    double rtol = 1e-10;
    double atol = 1e-10;
    double max_internal_step = 0.0;  // 0 = uncapped
    double min_internal_step = 1e-12;
};

enum class Split { Train, Val, Test };

const char* split_name(Split s);
Split split_from_name(const std::string& s);

struct Trajectory {
    std::vector<State3> states;  // n_steps + 1 samples at t = 0, dt, 2 dt, ...
    double dt = 0.01;
    std::uint64_t seed = 0;
    Split split = Split::Train;

    int steps() const { return static_cast<int>(states.size()) - 1; }
};

State3 lorenz_deriv(const State3& s, const LorenzParams& p);

// Samples at t = k * dt_sample for k = 0..n_steps. The adaptive Dormand-Prince
// 5(4) stepper lands exactly on every sample time.
Trajectory integrate(const State3& s0, int n_steps, const IntegratorConfig& cfg,
                     const LorenzParams& p);

// Advances the state for time tau without intermediate sample landings, then
// adds the noise perturbation. tau == 0 returns q + noise.
State3 flow_map(const State3& q, double tau, const State3& noise, const IntegratorConfig& cfg,
                const LorenzParams& p);

// Fixed points of the vector field for the given parameters.
State3 equilibrium_origin();
State3 equilibrium_c_plus(const LorenzParams& p = {});
State3 equilibrium_c_minus(const LorenzParams& p = {});

}  // namespace kooplab
