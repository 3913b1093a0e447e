#include "kooplab/pca.hpp"

#include <cmath>

#include "doctest.h"
#include "kooplab/dataset.hpp"
#include "kooplab/errors.hpp"
#include "kooplab/rng.hpp"

using namespace kooplab;

namespace {

std::vector<Trajectory> small_lorenz_split() {
    DatasetSpec spec;
    spec.n_train = 3;
    spec.len_train = 128;
    spec.n_val = 1;
    spec.len_val = 8;
    spec.n_test = 1;
    spec.len_test = 8;
    spec.init.burn_in_time = 1.0;
    spec.master_seed = 11;
    return generate_splits(spec).train;
}

Tensor random_samples(int n, int d, CounterRng& rng) {
    Tensor t({n, d});
    for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-3.0, 3.0);
    return t;
}

}  // namespace

TEST_CASE("full-rank pca explains all variance and round trips") {
    auto train = small_lorenz_split();
    PcaModel m = fit_pca(states_matrix(train), 3);

    double total = 0.0;
    for (double r : m.explained_variance_ratio) total += r;
    CHECK(std::abs(total - 1.0) < 1e-10);
    CHECK(m.rank == 3);

    // orthonormal rows
    Tensor gram = matmul_nt(m.components, m.components);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(std::abs(gram.at(i, j) - (i == j ? 1.0 : 0.0)) < 1e-10);

    // ratios non-increasing
    for (std::size_t i = 1; i < m.explained_variance_ratio.size(); ++i)
        CHECK(m.explained_variance_ratio[i] <= m.explained_variance_ratio[i - 1] + 1e-15);

    Tensor x = states_matrix(train);
    Tensor back = m.inverse_transform(m.transform(x));
    for (std::int64_t i = 0; i < x.numel(); ++i)
        CHECK(std::abs(back.data()[i] - x.data()[i]) < 1e-10);
}

TEST_CASE("planar data yields a vanishing third ratio; strict mode throws") {
    CounterRng rng(21, 1);
    Tensor samples({200, 3});
    for (int i = 0; i < 200; ++i) {
        samples.at(i, 0) = rng.uniform(-2.0, 2.0);
        samples.at(i, 1) = rng.uniform(-1.0, 5.0);
        samples.at(i, 2) = 0.0;
    }
    PcaModel m = fit_pca(samples, 3);
    CHECK(m.explained_variance_ratio[2] < 1e-12);
    CHECK(m.rank == 2);

    try {
        fit_pca(samples, 3, /*strict=*/true);
        FAIL("expected RankDeficientError");
    } catch (const RankDeficientError& e) {
        CHECK(std::string(e.what()).find("rank 2") != std::string::npos);
    }
}

TEST_CASE("mean input maps to the zero vector") {
    CounterRng rng(22, 1);
    Tensor samples = random_samples(50, 4, rng);
    PcaModel m = fit_pca(samples, 4);
    std::vector<double> mu(4);
    for (int j = 0; j < 4; ++j) mu[static_cast<std::size_t>(j)] = m.mean.at(j);
    auto z = m.transform_one(mu);
    for (double v : z) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("fit is deterministic and the sign convention is fixed") {
    auto train = small_lorenz_split();
    PcaModel a = fit_pca(states_matrix(train), 3);
    PcaModel b = fit_pca(states_matrix(train), 3);
    for (std::int64_t i = 0; i < a.components.numel(); ++i)
        CHECK(a.components.data()[i] == b.components.data()[i]);
    for (int r = 0; r < 3; ++r) {
        double best = 0.0;
        double at_best = 0.0;
        for (int j = 0; j < 3; ++j)
            if (std::abs(a.components.at(r, j)) > best) {
                best = std::abs(a.components.at(r, j));
                at_best = a.components.at(r, j);
            }
        CHECK(at_best > 0.0);
    }
}

TEST_CASE("pi_features identity-pca hand example") {
    PcaModel identity;
    identity.mean = Tensor({3});
    identity.components = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    identity.explained_variance_ratio = {1.0, 0.0, 0.0};
    identity.rank = 3;

    auto f = pi_features({1, 2, 3}, identity, LorenzParams{});
    REQUIRE(f.size() == 9);
    CHECK(f[0] == doctest::Approx(1.0));
    CHECK(f[1] == doctest::Approx(2.0));
    CHECK(f[2] == doctest::Approx(3.0));
    CHECK(f[3] == doctest::Approx(10.0));
    CHECK(f[4] == doctest::Approx(23.0));
    CHECK(f[5] == doctest::Approx(-6.0));
    CHECK(f[6] == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-12));
    CHECK(f[7] == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-12));
    CHECK(f[8] == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("pi_features unit circle identity and degenerate angle") {
    auto train = small_lorenz_split();
    PcaModel pca1 = fit_pca(states_matrix(train), 3);
    for (const auto& s : train[0].states) {
        auto f = pi_features(s, pca1, LorenzParams{});
        if (f[8] > 1e-12) CHECK(f[6] * f[6] + f[7] * f[7] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(f[8] >= 0.0);
    }
    // query exactly at the pca1 mean: z1 = z2 = 0 -> angle defined as 0
    PcaModel centered;
    centered.mean = Tensor::from({3}, {1.0, 2.0, 3.0});
    centered.components = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    auto f0 = pi_features({1, 2, 3}, centered, LorenzParams{});
    CHECK(f0[6] == 0.0);
    CHECK(f0[7] == 1.0);
    CHECK(f0[8] == 0.0);
}

TEST_CASE("pi pipeline embeds to 9 dimensions with zero training mean") {
    auto train = small_lorenz_split();
    PiEmbedder emb = fit_pi_pipeline(train, LorenzParams{});

    std::vector<double> acc(9, 0.0);
    std::int64_t n = 0;
    for (const auto& t : train)
        for (const auto& s : t.states) {
            auto e = emb.embed_one(s);
            REQUIRE(e.size() == 9);
            for (int j = 0; j < 9; ++j) acc[static_cast<std::size_t>(j)] += e[static_cast<std::size_t>(j)];
            ++n;
        }
    for (double v : acc) CHECK(std::abs(v / static_cast<double>(n)) < 1e-9);

    // determinism across refits
    PiEmbedder emb2 = fit_pi_pipeline(train, LorenzParams{});
    auto a = emb.embed_one(train[0].states[7]);
    auto b = emb2.embed_one(train[0].states[7]);
    for (int j = 0; j < 9; ++j) CHECK(a[static_cast<std::size_t>(j)] == b[static_cast<std::size_t>(j)]);
}

TEST_CASE("pi decode recovers states from embeddings") {
    auto train = small_lorenz_split();
    PiEmbedder emb = fit_pi_pipeline(train, LorenzParams{});
    // full-rank pca2 makes decode exact on the coordinate block
    const State3& s = train[1].states[33];
    State3 back = emb.decode_one(emb.embed_one(s));
    CHECK(std::abs(back.x - s.x) < 1e-8);
    CHECK(std::abs(back.y - s.y) < 1e-8);
    CHECK(std::abs(back.z - s.z) < 1e-8);
}

TEST_CASE("pca checkpoint namespaces round trip") {
    auto train = small_lorenz_split();
    PiEmbedder emb = fit_pi_pipeline(train, LorenzParams{});
    ParamStore ps = pca_to_params(emb.pca1, "PCA1");
    ParamStore ps2 = pca_to_params(emb.pca2, "PCA2");
    for (auto& [name, t] : ps2.items()) ps.add(name, t);

    PcaModel p1 = pca_from_params(ps, "PCA1");
    PcaModel p2 = pca_from_params(ps, "PCA2");
    CHECK(p1.components.at(0, 0) == emb.pca1.components.at(0, 0));
    CHECK(p2.components.at(8, 8) == emb.pca2.components.at(8, 8));
    CHECK(p2.rank == emb.pca2.rank);
}
