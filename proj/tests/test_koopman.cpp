#include "kooplab/koopman.hpp"

#include <cmath>

#include "doctest.h"
#include "fd_check.hpp"
#include "kooplab/embedder.hpp"
#include "kooplab/errors.hpp"

using namespace kooplab;

namespace {
DatasetSpec micro_spec() {
    DatasetSpec s;
    s.n_train = 6;
    s.len_train = 96;
    s.n_val = 2;
    s.len_val = 96;
    s.n_test = 2;
    s.len_test = 96;
    s.init.burn_in_time = 1.0;
    s.master_seed = 5;
    return s;
}

bool is_banded_skew(const Tensor& k, double* max_violation = nullptr) {
    const int n = k.rows();
    double worst = 0.0;
    bool ok = true;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (std::abs(i - j) > 2 && k.at(i, j) != 0.0) ok = false;
            if (i != j && std::abs(i - j) <= 2) {
                double v = std::abs(k.at(i, j) + k.at(j, i));
                worst = std::max(worst, v);
                if (v != 0.0) ok = false;
            }
        }
    if (max_violation) *max_violation = worst;
    return ok;
}
}  // namespace

TEST_CASE("materialize: zeros, identity, band structure") {
    Tensor d({4}), s1({3}), s2({2});
    Tensor zero = materialize_koopman(d, s1, s2);
    for (std::int64_t i = 0; i < zero.numel(); ++i) CHECK(zero.data()[i] == 0.0);

    Tensor ident = materialize_koopman(Tensor::full({4}, 1.0), s1, s2);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(ident.at(i, j) == (i == j ? 1.0 : 0.0));

    CounterRng rng(3, 1);
    Tensor dr({6}), s1r({5}), s2r({4});
    for (int i = 0; i < 6; ++i) dr.at(i) = rng.uniform(-1, 1);
    for (int i = 0; i < 5; ++i) s1r.at(i) = rng.uniform(-1, 1);
    for (int i = 0; i < 4; ++i) s2r.at(i) = rng.uniform(-1, 1);
    Tensor k = materialize_koopman(dr, s1r, s2r);
    CHECK(is_banded_skew(k));
    CHECK(k.at(0, 1) == s1r.at(0));
    CHECK(k.at(1, 0) == -s1r.at(0));
    CHECK(k.at(2, 4) == s2r.at(2));
    CHECK(k.at(4, 2) == -s2r.at(2));
}

TEST_CASE("structured initialization ramps the diagonal and bounds the bands") {
    ParamStore ps;
    CounterRng rng(42, rng_stream::kKoopmanBands);
    init_structured_koopman(ps, 32, rng);
    const Tensor& d = ps.get("op.d");
    CHECK(d.at(0) == 1.0);
    CHECK(d.at(31) == 0.0);
    CHECK(d.at(15) == doctest::Approx(1.0 - 15.0 / 31.0).epsilon(1e-12));
    for (int i = 0; i < 31; ++i) {
        CHECK(ps.get("op.s1").at(i) >= 0.0);
        CHECK(ps.get("op.s1").at(i) < 0.1);
    }
    for (int i = 0; i < 30; ++i) {
        CHECK(ps.get("op.s2").at(i) >= 0.0);
        CHECK(ps.get("op.s2").at(i) < 0.1);
    }
}

TEST_CASE("materialize gradient flows back to the band parameters") {
    CounterRng rng(9, 1);
    ParamStore ps;
    Tensor d({5}), s1({4}), s2({3});
    for (int i = 0; i < 5; ++i) d.at(i) = rng.uniform(-1, 1);
    for (int i = 0; i < 4; ++i) s1.at(i) = rng.uniform(-1, 1);
    for (int i = 0; i < 3; ++i) s2.at(i) = rng.uniform(-1, 1);
    ps.add("d", d);
    ps.add("s1", s1);
    ps.add("s2", s2);

    auto loss_value = [](const ParamStore& p) {
        Tape t;
        BoundParams b(t, p, true);
        Var k = materialize_koopman(t, b["d"], b["s1"], b["s2"]);
        return t.value(t.sum_squares_all(t.matmul(k, k))).at(0);
    };
    auto loss_grads = [](const ParamStore& p) {
        Tape t;
        BoundParams b(t, p, true);
        Var k = materialize_koopman(t, b["d"], b["s1"], b["s2"]);
        t.backward(t.sum_squares_all(t.matmul(k, k)));
        return collect_grads(t, b);
    };
    CounterRng fd_rng(10, 1);
    auto report = kooplab::testing::check_gradients(loss_value, loss_grads, ps, 10, fd_rng);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("composite loss: hand-built degenerate cases") {
    // 1-D analogue: identity-like behaviour is impossible to rig exactly with
    // the fixed architecture, so check the weight-linearity contracts instead.
    Dataset ds = generate_splits(micro_spec());
    Normalizer norm = fit_normalizer(ds.train);
    KoopmanAutoencoder model = KoopmanAutoencoder::init(3, 8, 16);

    Tensor s_now, s_next;
    windows_to_pairs({ds.train[0]}, {32, 32}, norm, s_now, s_next);

    double full = composite_loss_eval(model, s_now, s_next, 2.0, 3.0, 0.5);
    double t0 = composite_loss_eval(model, s_now, s_next, 1.0, 0.0, 0.0);
    double t1 = composite_loss_eval(model, s_now, s_next, 0.0, 1.0, 0.0);
    double t2 = composite_loss_eval(model, s_now, s_next, 0.0, 0.0, 1.0);
    CHECK(full == doctest::Approx(2.0 * t0 + 3.0 * t1 + 0.5 * t2).epsilon(1e-12));
    // doubling one weight with the others zeroed doubles the loss
    CHECK(composite_loss_eval(model, s_now, s_next, 0.0, 2.0, 0.0) ==
          doctest::Approx(2.0 * t1).epsilon(1e-12));

    // constant-zero trajectory in normalized space: reconstruction of zero
    // through untrained nets is nonzero, but the lambda2 term alone matches
    // the operator Frobenius norm exactly
    Tensor k = model.operator_matrix();
    CHECK(t2 == doctest::Approx(sum_squares(k)).epsilon(1e-12));
}

TEST_CASE("composite loss: crafted window matches an independent scalar evaluation") {
    // Tiny model with hand-set weights, evaluated against a from-scratch
    // computation that never touches the Tensor kernels.
    KoopmanAutoencoder m;
    m.latent_dim = 2;
    m.hidden = 2;
    m.params.add("enc.w1", Tensor::from({3, 2}, {0.1, -0.2, 0.3, 0.4, -0.5, 0.6}));
    m.params.add("enc.b1", Tensor::from({2}, {0.05, -0.05}));
    m.params.add("enc.w2", Tensor::from({2, 2}, {1.0, 0.5, -0.5, 1.0}));
    m.params.add("enc.b2", Tensor::from({2}, {0.0, 0.1}));
    m.params.add("enc.ln.g", Tensor::from({2}, {1.0, 1.0}));
    m.params.add("enc.ln.b", Tensor::from({2}, {0.0, 0.0}));
    m.params.add("dec.w1", Tensor::from({2, 2}, {0.7, -0.1, 0.2, 0.9}));
    m.params.add("dec.b1", Tensor::from({2}, {0.0, 0.0}));
    m.params.add("dec.w2", Tensor::from({2, 3}, {0.3, 0.1, -0.2, 0.6, -0.4, 0.5}));
    m.params.add("dec.b2", Tensor::from({3}, {0.01, 0.02, 0.03}));
    m.params.add("op.d", Tensor::from({2}, {0.9, 0.8}));
    m.params.add("op.s1", Tensor::from({1}, {0.05}));
    m.params.add("op.s2", Tensor::from({0}, {}));

    const double s_a[3] = {0.4, -0.3, 0.2};
    const double s_b[3] = {0.5, -0.1, 0.1};

    // scalar re-implementation
    auto encode1 = [&](const double* s, double* z) {
        double h[2];
        for (int j = 0; j < 2; ++j) {
            h[j] = m.params.get("enc.b1").at(j);
            for (int i = 0; i < 3; ++i) h[j] += s[i] * m.params.get("enc.w1").at(i, j);
            h[j] = std::max(h[j], 0.0);
        }
        double pre[2];
        for (int j = 0; j < 2; ++j) {
            pre[j] = m.params.get("enc.b2").at(j);
            for (int i = 0; i < 2; ++i) pre[j] += h[i] * m.params.get("enc.w2").at(i, j);
        }
        double mean = (pre[0] + pre[1]) / 2.0;
        double var = ((pre[0] - mean) * (pre[0] - mean) + (pre[1] - mean) * (pre[1] - mean)) / 2.0;
        for (int j = 0; j < 2; ++j) z[j] = (pre[j] - mean) / std::sqrt(var + 1e-5);
    };
    auto decode1 = [&](const double* z, double* s) {
        double h[2];
        for (int j = 0; j < 2; ++j) {
            h[j] = m.params.get("dec.b1").at(j);
            for (int i = 0; i < 2; ++i) h[j] += z[i] * m.params.get("dec.w1").at(i, j);
            h[j] = std::max(h[j], 0.0);
        }
        for (int j = 0; j < 3; ++j) {
            s[j] = m.params.get("dec.b2").at(j);
            for (int i = 0; i < 2; ++i) s[j] += h[i] * m.params.get("dec.w2").at(i, j);
        }
    };

    double z[2], recon[3], zk[2], pred[3];
    encode1(s_a, z);
    decode1(z, recon);
    const double k00 = 0.9, k01 = 0.05, k10 = -0.05, k11 = 0.8;
    zk[0] = k00 * z[0] + k01 * z[1];
    zk[1] = k10 * z[0] + k11 * z[1];
    decode1(zk, pred);

    double term0 = 0.0, term1 = 0.0;
    for (int i = 0; i < 3; ++i) {
        term0 += (recon[i] - s_a[i]) * (recon[i] - s_a[i]);
        term1 += (pred[i] - s_b[i]) * (pred[i] - s_b[i]);
    }
    double term2 = k00 * k00 + k01 * k01 + k10 * k10 + k11 * k11;
    double expected = 1e4 * term0 + 1.0 * term1 + 0.1 * term2;

    Tensor s_now = Tensor::from({1, 3}, {s_a[0], s_a[1], s_a[2]});
    Tensor s_next = Tensor::from({1, 3}, {s_b[0], s_b[1], s_b[2]});
    double actual = composite_loss_eval(m, s_now, s_next, 1e4, 1.0, 0.1);
    CHECK(actual == doctest::Approx(expected).epsilon(1e-10));

    // tape path agrees with the eval path
    Tape tape;
    BoundParams bound(tape, m.params, true);
    Var loss = composite_loss(tape, bound, s_now, s_next, 1e4, 1.0, 0.1);
    CHECK(tape.value(loss).at(0) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("composite loss gradients match finite differences on a micro-batch") {
    Dataset ds = generate_splits(micro_spec());
    Normalizer norm = fit_normalizer(ds.train);
    KoopmanAutoencoder model = KoopmanAutoencoder::init(17, 4, 6);

    Tensor s_now, s_next;
    windows_to_pairs({ds.train[0]}, {8, 48}, norm, s_now, s_next);  // 2 windows, 16 pairs

    auto loss_value = [&](const ParamStore& p) {
        KoopmanAutoencoder m2;
        m2.latent_dim = 4;
        m2.hidden = 6;
        m2.params = p;
        return composite_loss_eval(m2, s_now, s_next, 1e2, 1.0, 0.1);
    };
    auto loss_grads = [&](const ParamStore& p) {
        Tape tape;
        BoundParams bound(tape, p, true);
        tape.backward(composite_loss(tape, bound, s_now, s_next, 1e2, 1.0, 0.1));
        return collect_grads(tape, bound);
    };
    CounterRng rng(77, 1);
    auto report = kooplab::testing::check_gradients(loss_value, loss_grads, model.params, 4, rng);
    INFO("worst: ", report.worst);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("stage 1 desk-scale training learns and keeps the operator structure") {
    DatasetSpec spec = micro_spec();
    spec.n_train = 16;
    spec.len_train = 128;
    Dataset ds = generate_splits(spec);
    Normalizer norm = fit_normalizer(ds.train);

    Stage1Config cfg;
    cfg.epochs = 12;
    cfg.batch = 64;
    cfg.latent_dim = 16;
    cfg.hidden = 64;
    cfg.train_window = {32, 16};
    cfg.val_window = {32, 32};
    cfg.seed = 1;

    Stage1Result r = train_stage1(ds, norm, cfg);
    REQUIRE(r.curve.size() == 12);

    // operator structure is exact after optimization
    Tensor k = r.model.operator_matrix();
    CHECK(is_banded_skew(k));

    // training made progress and stayed finite
    CHECK(r.curve.back().train_loss < r.curve.front().train_loss);
    for (const auto& e : r.curve) CHECK(std::isfinite(e.train_loss));

    // loss stability: next epoch no worse than 1.5x current for >= 90% of epochs
    int stable = 0;
    for (std::size_t i = 1; i < r.curve.size(); ++i)
        if (r.curve[i].train_loss <= 1.5 * r.curve[i - 1].train_loss) ++stable;
    CHECK(static_cast<double>(stable) >= 0.9 * static_cast<double>(r.curve.size() - 1));

    // reconstruction on normalized validation states
    Tensor val_now, val_next;
    windows_to_pairs(ds.val, cfg.val_window, norm, val_now, val_next);
    double recon_mse = mse(r.model.decode(r.model.encode(val_now)), val_now);
    CHECK(recon_mse < 0.1);  // micro-scale bound; the acceptance suite checks 1e-2 at desk scale

    // one latent step approximates the encoded next state (Eq. 4 sense):
    // dynamics error in latent space stays below the dynamics loss share
    Tensor z = r.model.encode(val_now);
    Tensor z_next_pred = matmul_nt(z, r.model.operator_matrix());
    Tensor z_next = r.model.encode(val_next);
    double latent_mse = mse(z_next_pred, z_next);
    double dyn_loss = mse(r.model.decode(z_next_pred), val_next);
    CHECK(latent_mse < std::max(dyn_loss * 10.0, 1.0));
}

TEST_CASE("zero-epoch training returns the initialized model unchanged") {
    Dataset ds = generate_splits(micro_spec());
    Normalizer norm = fit_normalizer(ds.train);
    Stage1Config cfg;
    cfg.epochs = 0;
    cfg.latent_dim = 8;
    cfg.hidden = 16;
    cfg.seed = 21;
    Stage1Result r = train_stage1(ds, norm, cfg);
    KoopmanAutoencoder fresh = KoopmanAutoencoder::init(21, 8, 16);
    for (const auto& [name, t] : fresh.params.items()) {
        const Tensor& trained = r.model.params.get(name);
        for (std::int64_t i = 0; i < t.numel(); ++i)
            CHECK(trained.data()[i] == t.data()[i]);
    }
}

TEST_CASE("koopman embedder round trips through encode/decode") {
    Dataset ds = generate_splits(micro_spec());
    Normalizer norm = fit_normalizer(ds.train);
    KoopmanAutoencoder model = KoopmanAutoencoder::init(3, 8, 32);
    KoopmanEmbedder emb(model, norm);
    CHECK(emb.dim() == 8);
    Tensor e = emb.embed(ds.train[0].states);
    CHECK(e.rows() == static_cast<int>(ds.train[0].states.size()));
    CHECK(e.cols() == 8);
    // decode is lossy for an untrained model; just check it is finite and deterministic
    std::vector<double> row(8);
    for (int j = 0; j < 8; ++j) row[static_cast<std::size_t>(j)] = e.at(0, j);
    State3 s1 = emb.decode(row);
    State3 s2 = emb.decode(row);
    CHECK(s1.finite());
    CHECK(s1.x == s2.x);
}
