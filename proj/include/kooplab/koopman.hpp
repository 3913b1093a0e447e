#pragma once

#include <cstdint>
#include <vector>

#include "kooplab/autodiff.hpp"
#include "kooplab/dataset.hpp"
#include "kooplab/optim.hpp"
#include "kooplab/tensor.hpp"

namespace kooplab {

// K = D + S_band: a diagonal vector plus two skew-symmetric bands. Entries
// with |i-j| > 2 are identically zero by construction.
Tensor materialize_koopman(const Tensor& d, const Tensor& s1, const Tensor& s2);
Var materialize_koopman(Tape& tape, Var d, Var s1, Var s2);

// Diagonal ramps linearly from 1 to 0; bands start weakly coupled in [0, 0.1).
void init_structured_koopman(ParamStore& params, int latent_dim, CounterRng& rng);

struct KoopmanAutoencoder {
    int latent_dim = 32;
    int hidden = 500;
    ParamStore params;  // enc.*, dec.*, op.{d,s1,s2}

    static KoopmanAutoencoder init(std::uint64_t seed, int latent_dim = 32, int hidden = 500);

    // Eval-mode forwards on normalized states.
    Tensor encode(const Tensor& states) const;  // [N,3] -> [N,latent]
    Tensor decode(const Tensor& z) const;       // [N,latent] -> [N,3]
    Tensor operator_matrix() const;
};

// Tape-mode forwards (identical kernel sequence to the eval path).
Var ae_encode(Tape& tape, const BoundParams& p, Var states);
Var ae_decode(Tape& tape, const BoundParams& p, Var z);

// lambda0 * MSE(s, dec(enc(s))) + lambda1 * MSE(s', dec(K enc(s))) + lambda2 * ||K||^2,
// with both MSE terms reduced as means over the batch rows.
Var composite_loss(Tape& tape, const BoundParams& p, const Tensor& s_now, const Tensor& s_next,
                   double lambda0, double lambda1, double lambda2);
double composite_loss_eval(const KoopmanAutoencoder& model, const Tensor& s_now,
                           const Tensor& s_next, double lambda0, double lambda1, double lambda2);

struct Stage1Config {
    double lr = 1e-3;
    int epochs = 300;
    int batch = 512;  // windows per optimizer step
    double lr_decay = 0.95;
    double weight_decay = 1e-8;
    double lambda0 = 1e4;
    double lambda1 = 1.0;
    double lambda2 = 0.1;
    WindowSpec train_window{64, 16};
    WindowSpec val_window{64, 32};
    int latent_dim = 32;
    int hidden = 500;
    std::uint64_t seed = 42;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct Stage1Result {
    KoopmanAutoencoder model;  // best-validation parameters
    std::vector<EpochLog> curve;
    double best_val = 0.0;
    int best_epoch = -1;
    ParamStore best_params;
};

Stage1Result train_stage1(const Dataset& ds, const Normalizer& norm, const Stage1Config& cfg);

// (s_j, s_{j+1}) pairs for every window of every trajectory, normalized.
void windows_to_pairs(const std::vector<Trajectory>& trajs, const WindowSpec& w,
                      const Normalizer& norm, Tensor& s_now, Tensor& s_next);

}  // namespace kooplab
