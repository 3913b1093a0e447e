#include "kooplab/lorenz.hpp"

#include <algorithm>
#include <string>

#include "kooplab/errors.hpp"

namespace kooplab {

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split split_from_name(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw ConfigError("unknown split name: " + s);
}

State3 lorenz_deriv(const State3& s, const LorenzParams& p) {
    return {p.sigma * (s.y - s.x), s.x * (p.rho - s.z) - s.y, s.x * s.y - p.beta * s.z};
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                 A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;
// 5th-order minus embedded 4th-order weights.
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200,
                 E6 = 22.0 / 525, E7 = -1.0 / 40;

struct Stepper {
    const IntegratorConfig& cfg;
    const LorenzParams& p;
    State3 y;
    State3 k1;  // FSAL stage
    double h;
    double fac_old = 1e-4;

    Stepper(const State3& s0, double h0, const IntegratorConfig& c, const LorenzParams& lp)
        : cfg(c), p(lp), y(s0), k1(lorenz_deriv(s0, lp)), h(h0) {}

    double error_norm(const State3& err, const State3& y_new) const {
        double acc = 0.0;
        for (int i = 0; i < 3; ++i) {
            double sc = cfg.atol + cfg.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            double r = err[i] / sc;
            acc += r * r;
        }
        return std::sqrt(acc / 3.0);
    }

    // One accepted step of size exactly h_try; h_try must already respect caps.
    // Returns the error-controller's preferred size for the next step.
    bool try_step(double h_try, State3& y_out, State3& k7_out, double& err_out) {
        const State3& k = k1;
        State3 k2 = lorenz_deriv(y + k * (A21 * h_try), p);
        State3 k3 = lorenz_deriv(y + k * (A31 * h_try) + k2 * (A32 * h_try), p);
        State3 k4 = lorenz_deriv(y + k * (A41 * h_try) + k2 * (A42 * h_try) + k3 * (A43 * h_try), p);
        State3 k5 = lorenz_deriv(
            y + k * (A51 * h_try) + k2 * (A52 * h_try) + k3 * (A53 * h_try) + k4 * (A54 * h_try), p);
        State3 k6 = lorenz_deriv(y + k * (A61 * h_try) + k2 * (A62 * h_try) + k3 * (A63 * h_try) +
                                     k4 * (A64 * h_try) + k5 * (A65 * h_try),
                                 p);
        y_out = y + (k * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h_try;
        k7_out = lorenz_deriv(y_out, p);
        State3 err = (k * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7_out * E7) * h_try;
        err_out = error_norm(err, y_out);
        return err_out <= 1.0;
    }

    // Integrate from local time 0 to t_end (> 0).
    void advance(double t_end) {
        constexpr double kSafe = 0.9, kBeta = 0.04;
        constexpr double kExpo = 0.2 - kBeta * 0.75;
        constexpr double kFacMin = 0.2, kFacMax = 10.0;

        double t = 0.0;
        while (t < t_end) {
            double h_cap = h;
            if (cfg.max_internal_step > 0.0) h_cap = std::min(h_cap, cfg.max_internal_step);
            bool clipped = t + h_cap >= t_end;
            double h_try = clipped ? t_end - t : h_cap;
            if (!clipped && h_try < cfg.min_internal_step)
                throw StepSizeUnderflowError("step size " + std::to_string(h_try) +
                                             " fell below floor " +
                                             std::to_string(cfg.min_internal_step));

            State3 y_new, k7;
            double err;
            bool accept = try_step(h_try, y_new, k7, err);

            double fac11 = std::pow(std::max(err, 1e-16), kExpo);
            if (accept) {
                t = clipped ? t_end : t + h_try;
                y = y_new;
                k1 = k7;
                double fac = fac11 / std::pow(fac_old, kBeta);
                fac = std::max(1.0 / kFacMax, std::min(1.0 / kFacMin, fac / kSafe));
                fac_old = std::max(err, 1e-4);
                h = h_try / fac;
            } else {
                h = h_try / std::min(1.0 / kFacMin, fac11 / kSafe);
            }
        }
    }
};

// Classic cheap starting-step heuristic: match the scale of the first derivative.
double initial_step(const State3& s0, const IntegratorConfig& cfg, const LorenzParams& p) {
    State3 f0 = lorenz_deriv(s0, p);
    double d0 = 0.0, d1 = 0.0;
    for (int i = 0; i < 3; ++i) {
        double sc = cfg.atol + cfg.rtol * std::abs(s0[i]);
        d0 += (s0[i] / sc) * (s0[i] / sc);
        d1 += (f0[i] / sc) * (f0[i] / sc);
    }
    d0 = std::sqrt(d0 / 3.0);
    d1 = std::sqrt(d1 / 3.0);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * (d0 / d1);
    return std::min(h0, 1e-2);
}

}  // namespace

Trajectory integrate(const State3& s0, int n_steps, const IntegratorConfig& cfg,
                     const LorenzParams& p) {
    if (n_steps < 1) throw ConfigError("integrate: n_steps must be >= 1");
    if (!s0.finite()) throw ConfigError("integrate: non-finite initial state");

    Trajectory traj;
    traj.dt = cfg.dt_sample;
    traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);
    traj.states.push_back(s0);

    Stepper st(s0, initial_step(s0, cfg, p), cfg, p);
    for (int k = 1; k <= n_steps; ++k) {
        // Segment times are recomputed per sample so no additive drift occurs.
        st.advance(cfg.dt_sample);
        traj.states.push_back(st.y);
    }
    return traj;
}

State3 flow_map(const State3& q, double tau, const State3& noise, const IntegratorConfig& cfg,
                const LorenzParams& p) {
    if (tau < 0.0) throw ConfigError("flow_map: tau must be >= 0");
    if (tau == 0.0) return q + noise;
    Stepper st(q, std::min(initial_step(q, cfg, p), tau), cfg, p);
    st.advance(tau);
    return st.y + noise;
}

State3 equilibrium_origin() { return {0.0, 0.0, 0.0}; }

State3 equilibrium_c_plus(const LorenzParams& p) {
    double r = std::sqrt(p.beta * (p.rho - 1.0));
    return {r, r, p.rho - 1.0};
}

State3 equilibrium_c_minus(const LorenzParams& p) {
    double r = std::sqrt(p.beta * (p.rho - 1.0));
    return {-r, -r, p.rho - 1.0};
}

}  // namespace kooplab
