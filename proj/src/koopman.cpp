#include "kooplab/koopman.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kooplab/errors.hpp"

namespace kooplab {

Tensor materialize_koopman(const Tensor& d, const Tensor& s1, const Tensor& s2) {
    const int n = d.dim(0);
    if (s1.dim(0) != n - 1 || s2.dim(0) != n - 2)
        throw ShapeMismatchError("materialize_koopman: bands must have lengths n-1 and n-2");
    Tensor k({n, n});
    for (int i = 0; i < n; ++i) k.at(i, i) = d.at(i);
    for (int i = 0; i + 1 < n; ++i) {
        k.at(i, i + 1) = s1.at(i);
        k.at(i + 1, i) = -s1.at(i);
    }
    for (int i = 0; i + 2 < n; ++i) {
        k.at(i, i + 2) = s2.at(i);
        k.at(i + 2, i) = -s2.at(i);
    }
    return k;
}

Var materialize_koopman(Tape& tape, Var d, Var s1, Var s2) {
    Tensor value = materialize_koopman(tape.value(d), tape.value(s1), tape.value(s2));
    const int n = value.rows();
    return tape.custom(
        {d, s1, s2}, std::move(value),
        [n](Tape& t, const Tensor& dout, const std::vector<Var>& parents) {
            Tensor dd({n}), ds1({n - 1}), ds2({n - 2});
            for (int i = 0; i < n; ++i) dd.at(i) = dout.at(i, i);
            for (int i = 0; i + 1 < n; ++i) ds1.at(i) = dout.at(i, i + 1) - dout.at(i + 1, i);
            for (int i = 0; i + 2 < n; ++i) ds2.at(i) = dout.at(i, i + 2) - dout.at(i + 2, i);
            t.accumulate_grad(parents[0], dd);
            t.accumulate_grad(parents[1], ds1);
            t.accumulate_grad(parents[2], ds2);
        });
}

void init_structured_koopman(ParamStore& params, int latent_dim, CounterRng& rng) {
    Tensor d({latent_dim});
    for (int i = 0; i < latent_dim; ++i)
        d.at(i) = 1.0 - static_cast<double>(i) / static_cast<double>(latent_dim - 1);
    Tensor s1({latent_dim - 1}), s2({latent_dim - 2});
    for (int i = 0; i < latent_dim - 1; ++i) s1.at(i) = rng.uniform(0.0, 0.1);
    for (int i = 0; i < latent_dim - 2; ++i) s2.at(i) = rng.uniform(0.0, 0.1);
    params.add("op.d", std::move(d));
    params.add("op.s1", std::move(s1));
    params.add("op.s2", std::move(s2));
}

KoopmanAutoencoder KoopmanAutoencoder::init(std::uint64_t seed, int latent_dim, int hidden) {
    KoopmanAutoencoder m;
    m.latent_dim = latent_dim;
    m.hidden = hidden;
    CounterRng rng(seed, rng_stream::kParamInit);
    auto bias = [&rng](int n, int fan_in) {
        Tensor b({n});
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (int i = 0; i < n; ++i) b.at(i) = rng.uniform(-bound, bound);
        return b;
    };
    m.params.add("enc.w1", init_kaiming_uniform({3, hidden}, 3, rng));
    m.params.add("enc.b1", bias(hidden, 3));
    m.params.add("enc.w2", init_kaiming_uniform({hidden, latent_dim}, hidden, rng));
    m.params.add("enc.b2", bias(latent_dim, hidden));
    m.params.add("enc.ln.g", Tensor::full({latent_dim}, 1.0));
    m.params.add("enc.ln.b", Tensor({latent_dim}));
    m.params.add("dec.w1", init_kaiming_uniform({latent_dim, hidden}, latent_dim, rng));
    m.params.add("dec.b1", bias(hidden, latent_dim));
    m.params.add("dec.w2", init_kaiming_uniform({hidden, 3}, hidden, rng));
    m.params.add("dec.b2", bias(3, hidden));
    CounterRng band_rng(seed, rng_stream::kKoopmanBands);
    init_structured_koopman(m.params, latent_dim, band_rng);
    return m;
}

Tensor KoopmanAutoencoder::encode(const Tensor& states) const {
    Tensor h = relu(add_rowvec(matmul(states, params.get("enc.w1")), params.get("enc.b1")));
    Tensor z = add_rowvec(matmul(h, params.get("enc.w2")), params.get("enc.b2"));
    return layernorm_rows(z, params.get("enc.ln.g"), params.get("enc.ln.b"));
}

Tensor KoopmanAutoencoder::decode(const Tensor& z) const {
    Tensor h = relu(add_rowvec(matmul(z, params.get("dec.w1")), params.get("dec.b1")));
    return add_rowvec(matmul(h, params.get("dec.w2")), params.get("dec.b2"));
}

Tensor KoopmanAutoencoder::operator_matrix() const {
    return materialize_koopman(params.get("op.d"), params.get("op.s1"), params.get("op.s2"));
}

Var ae_encode(Tape& tape, const BoundParams& p, Var states) {
    Var h = tape.relu(tape.add_rowvec(tape.matmul(states, p["enc.w1"]), p["enc.b1"]));
    Var z = tape.add_rowvec(tape.matmul(h, p["enc.w2"]), p["enc.b2"]);
    return tape.layernorm_rows(z, p["enc.ln.g"], p["enc.ln.b"]);
}

Var ae_decode(Tape& tape, const BoundParams& p, Var z) {
    Var h = tape.relu(tape.add_rowvec(tape.matmul(z, p["dec.w1"]), p["dec.b1"]));
    return tape.add_rowvec(tape.matmul(h, p["dec.w2"]), p["dec.b2"]);
}

Var composite_loss(Tape& tape, const BoundParams& p, const Tensor& s_now, const Tensor& s_next,
                   double lambda0, double lambda1, double lambda2) {
    Var x = tape.constant(s_now);
    Var z = ae_encode(tape, p, x);
    Var recon = ae_decode(tape, p, z);
    Var k = materialize_koopman(tape, p["op.d"], p["op.s1"], p["op.s2"]);
    Var z_next = tape.matmul(z, tape.transpose(k));
    Var pred = ae_decode(tape, p, z_next);
    Var loss = tape.scale(tape.mse_loss(recon, s_now), lambda0);
    loss = tape.add(loss, tape.scale(tape.mse_loss(pred, s_next), lambda1));
    return tape.add(loss, tape.scale(tape.sum_squares_all(k), lambda2));
}

double composite_loss_eval(const KoopmanAutoencoder& model, const Tensor& s_now,
                           const Tensor& s_next, double lambda0, double lambda1, double lambda2) {
    Tensor z = model.encode(s_now);
    Tensor recon = model.decode(z);
    Tensor k = model.operator_matrix();
    Tensor pred = model.decode(matmul_nt(z, k));
    return lambda0 * mse(recon, s_now) + lambda1 * mse(pred, s_next) +
           lambda2 * sum_squares(k);
}

void windows_to_pairs(const std::vector<Trajectory>& trajs, const WindowSpec& w,
                      const Normalizer& norm, Tensor& s_now, Tensor& s_next) {
    std::int64_t rows = 0;
    for (const auto& t : trajs) rows += static_cast<std::int64_t>(window_count(t.steps(), w)) * w.length;
    s_now = Tensor({static_cast<int>(rows), 3});
    s_next = Tensor({static_cast<int>(rows), 3});
    int r = 0;
    for (const auto& t : trajs) {
        int count = window_count(t.steps(), w);
        for (int wi = 0; wi < count; ++wi) {
            int start = wi * w.stride;
            for (int j = 0; j < w.length; ++j) {
                State3 a = norm.apply(t.states[static_cast<std::size_t>(start + j)]);
                State3 b = norm.apply(t.states[static_cast<std::size_t>(start + j + 1)]);
                s_now.at(r, 0) = a.x;
                s_now.at(r, 1) = a.y;
                s_now.at(r, 2) = a.z;
                s_next.at(r, 0) = b.x;
                s_next.at(r, 1) = b.y;
                s_next.at(r, 2) = b.z;
                ++r;
            }
        }
    }
}

namespace {

// Gradient accumulation over row chunks, so a 512-window batch never holds the
// whole [batch*64, hidden] activation set at once. The lambda2 operator term
// enters once through its own small tape.
constexpr int kChunkRows = 8192;

GradMap batch_gradients(const KoopmanAutoencoder& model, const Tensor& s_now, const Tensor& s_next,
                        const Stage1Config& cfg, double& loss_out) {
    const int total = s_now.rows();
    GradMap grads;
    double loss = 0.0;
    for (int begin = 0; begin < total; begin += kChunkRows) {
        int rows = std::min(kChunkRows, total - begin);
        double weight = static_cast<double>(rows) / static_cast<double>(total);
        Tensor now_c = slice_rows(s_now, begin, rows);
        Tensor next_c = slice_rows(s_next, begin, rows);

        Tape tape;
        BoundParams bound(tape, model.params, true);
        Var chunk_loss = composite_loss(tape, bound, now_c, next_c, cfg.lambda0, cfg.lambda1, 0.0);
        Var weighted = tape.scale(chunk_loss, weight);
        tape.backward(weighted);
        loss += tape.value(weighted).at(0);
        for (const auto& [name, var] : bound.vars()) {
            Tensor g = tape.grad(var);
            auto it = grads.find(name);
            if (it == grads.end())
                grads.emplace(name, std::move(g));
            else
                it->second = add(it->second, g);
        }
    }
    {
        Tape tape;
        BoundParams bound(tape, model.params, true);
        Var k = materialize_koopman(tape, bound["op.d"], bound["op.s1"], bound["op.s2"]);
        Var reg = tape.scale(tape.sum_squares_all(k), cfg.lambda2);
        tape.backward(reg);
        loss += tape.value(reg).at(0);
        for (const char* name : {"op.d", "op.s1", "op.s2"})
            grads.at(name) = add(grads.at(name), tape.grad(bound[name]));
    }
    loss_out = loss;
    return grads;
}

}  // namespace

Stage1Result train_stage1(const Dataset& ds, const Normalizer& norm, const Stage1Config& cfg) {
    Stage1Result result;
    result.model = KoopmanAutoencoder::init(cfg.seed, cfg.latent_dim, cfg.hidden);
    if (cfg.epochs == 0) return result;

    Tensor val_now, val_next;
    windows_to_pairs(ds.val, cfg.val_window, norm, val_now, val_next);

    // Window index table; shuffled every epoch.
    struct Ref {
        int traj;
        int start;
    };
    std::vector<Ref> windows;
    for (std::size_t ti = 0; ti < ds.train.size(); ++ti) {
        int count = window_count(ds.train[ti].steps(), cfg.train_window);
        for (int wi = 0; wi < count; ++wi)
            windows.push_back({static_cast<int>(ti), wi * cfg.train_window.stride});
    }

    OptimizerState opt;
    opt.kind = OptimizerKind::Adam;
    opt.weight_decay = cfg.weight_decay;

    const int L = cfg.train_window.length;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        opt.lr = cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch));

        CounterRng shuffle_rng(cfg.seed + static_cast<std::uint64_t>(epoch) * 0x9e37ULL,
                               rng_stream::kShuffle);
        for (std::size_t i = windows.size(); i > 1; --i)
            std::swap(windows[i - 1], windows[static_cast<std::size_t>(shuffle_rng.below(i))]);

        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t at = 0; at < windows.size(); at += static_cast<std::size_t>(cfg.batch)) {
            std::size_t n_win = std::min(static_cast<std::size_t>(cfg.batch), windows.size() - at);
            Tensor s_now({static_cast<int>(n_win) * L, 3});
            Tensor s_next({static_cast<int>(n_win) * L, 3});
            int r = 0;
            for (std::size_t wi = 0; wi < n_win; ++wi) {
                const Ref& ref = windows[at + wi];
                const Trajectory& t = ds.train[static_cast<std::size_t>(ref.traj)];
                for (int j = 0; j < L; ++j) {
                    State3 a = norm.apply(t.states[static_cast<std::size_t>(ref.start + j)]);
                    State3 b = norm.apply(t.states[static_cast<std::size_t>(ref.start + j + 1)]);
                    s_now.at(r, 0) = a.x;
                    s_now.at(r, 1) = a.y;
                    s_now.at(r, 2) = a.z;
                    s_next.at(r, 0) = b.x;
                    s_next.at(r, 1) = b.y;
                    s_next.at(r, 2) = b.z;
                    ++r;
                }
            }
            double batch_loss = 0.0;
            GradMap grads = batch_gradients(result.model, s_now, s_next, cfg, batch_loss);
            if (!std::isfinite(batch_loss))
                throw NonFiniteLossError("stage1: non-finite loss at epoch " +
                                         std::to_string(epoch));
            optimizer_step(opt, result.model.params, grads);
            epoch_loss += batch_loss;
            ++batches;
        }
        epoch_loss /= std::max(batches, 1);

        double val_loss = composite_loss_eval(result.model, val_now, val_next, cfg.lambda0,
                                              cfg.lambda1, cfg.lambda2);
        result.curve.push_back({epoch, epoch_loss, val_loss, opt.lr});
        if (result.best_epoch < 0 || val_loss < result.best_val) {
            result.best_val = val_loss;
            result.best_epoch = epoch;
            result.best_params = result.model.params;
        }
    }
    if (result.best_epoch >= 0) result.model.params = result.best_params;
    return result;
}

}  // namespace kooplab
