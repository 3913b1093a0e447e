#include "kooplab/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kooplab/errors.hpp"

namespace kooplab {

void symmetric_eig(const Tensor& m, Tensor& eigvecs_rows, std::vector<double>& eigvals) {
    const int n = m.rows();
    if (m.ndim() != 2 || m.cols() != n) throw ShapeMismatchError("symmetric_eig: expected square");
    Tensor a = m;
    Tensor v({n, n});
    for (int i = 0; i < n; ++i) v.at(i, i) = 1.0;

    // Cyclic Jacobi; converges quadratically for the small matrices used here.
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double apq = a.at(p, q);
                if (apq == 0.0) continue;
                double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) diag[static_cast<std::size_t>(i)] = a.at(i, i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return diag[static_cast<std::size_t>(i)] > diag[static_cast<std::size_t>(j)]; });

    eigvals.resize(static_cast<std::size_t>(n));
    eigvecs_rows = Tensor({n, n});
    for (int r = 0; r < n; ++r) {
        int src = order[static_cast<std::size_t>(r)];
        eigvals[static_cast<std::size_t>(r)] = diag[static_cast<std::size_t>(src)];
        // columns of v are eigenvectors; store as rows, sign-normalized
        int arg = 0;
        double best = 0.0;
        for (int k = 0; k < n; ++k) {
            double val = std::abs(v.at(k, src));
            if (val > best) {
                best = val;
                arg = k;
            }
        }
        double sign = v.at(arg, src) >= 0.0 ? 1.0 : -1.0;
        for (int k = 0; k < n; ++k) eigvecs_rows.at(r, k) = sign * v.at(k, src);
    }
}

PcaModel fit_pca(const Tensor& samples, int k, bool strict) {
    if (samples.ndim() != 2) throw ShapeMismatchError("fit_pca: expected [n,d]");
    const int n = samples.rows(), d = samples.cols();
    if (k < 1 || k > d) throw ConfigError("fit_pca: k must be in [1, d]");
    if (n <= k) throw ConfigError("fit_pca: need more samples than components");

    PcaModel model;
    model.mean = Tensor({d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) model.mean.at(j) += samples.at(i, j);
    for (int j = 0; j < d; ++j) model.mean.at(j) /= n;

    Tensor cov({d, d});
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < d; ++a) {
            double da = samples.at(i, a) - model.mean.at(a);
            for (int b = a; b < d; ++b)
                cov.at(a, b) += da * (samples.at(i, b) - model.mean.at(b));
        }
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            cov.at(a, b) /= (n - 1);
            cov.at(b, a) = cov.at(a, b);
        }

    Tensor vecs;
    std::vector<double> vals;
    symmetric_eig(cov, vecs, vals);

    double total = 0.0;
    for (double v : vals) total += std::max(v, 0.0);
    double tol = std::max(vals.empty() ? 0.0 : vals[0], 0.0) * 1e-12;
    model.rank = 0;
    for (double v : vals)
        if (v > tol) ++model.rank;
    if (strict && model.rank < k)
        throw RankDeficientError("fit_pca: covariance rank " + std::to_string(model.rank) +
                                 " is below requested components " + std::to_string(k));

    model.components = slice_rows(vecs, 0, k);
    model.explained_variance_ratio.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
        model.explained_variance_ratio[static_cast<std::size_t>(i)] =
            total > 0.0 ? std::max(vals[static_cast<std::size_t>(i)], 0.0) / total : 0.0;
    return model;
}

Tensor PcaModel::transform(const Tensor& x) const {
    if (x.ndim() != 2 || x.cols() != in_dim())
        throw ShapeMismatchError("PcaModel::transform: got " + x.shape_str());
    Tensor centered = x;
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < in_dim(); ++j) centered.at(i, j) -= mean.at(j);
    return matmul_nt(centered, components);
}

Tensor PcaModel::inverse_transform(const Tensor& z) const {
    if (z.ndim() != 2 || z.cols() != out_dim())
        throw ShapeMismatchError("PcaModel::inverse_transform: got " + z.shape_str());
    Tensor x = matmul(z, components);
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < in_dim(); ++j) x.at(i, j) += mean.at(j);
    return x;
}

std::vector<double> PcaModel::transform_one(const std::vector<double>& x) const {
    std::vector<double> out(static_cast<std::size_t>(out_dim()), 0.0);
    for (int r = 0; r < out_dim(); ++r)
        for (int j = 0; j < in_dim(); ++j)
            out[static_cast<std::size_t>(r)] +=
                components.at(r, j) * (x[static_cast<std::size_t>(j)] - mean.at(j));
    return out;
}

std::vector<double> PcaModel::inverse_one(const std::vector<double>& z) const {
    std::vector<double> out(static_cast<std::size_t>(in_dim()), 0.0);
    for (int j = 0; j < in_dim(); ++j) {
        double acc = mean.at(j);
        for (int r = 0; r < out_dim(); ++r)
            acc += components.at(r, j) * z[static_cast<std::size_t>(r)];
        out[static_cast<std::size_t>(j)] = acc;
    }
    return out;
}

std::vector<double> PcaModel::rotate(const std::vector<double>& v) const {
    std::vector<double> out(static_cast<std::size_t>(out_dim()), 0.0);
    for (int r = 0; r < out_dim(); ++r)
        for (int j = 0; j < in_dim(); ++j)
            out[static_cast<std::size_t>(r)] += components.at(r, j) * v[static_cast<std::size_t>(j)];
    return out;
}

std::vector<double> pi_features(const State3& s, const PcaModel& pca1, const LorenzParams& p) {
    std::vector<double> z = pca1.transform_one({s.x, s.y, s.z});
    State3 deriv = lorenz_deriv(s, p);
    std::vector<double> dv = pca1.rotate({deriv.x, deriv.y, deriv.z});

    double z1 = z[0], z2 = z[1];
    double angle = (z1 == 0.0 && z2 == 0.0) ? 0.0 : std::atan2(z2, z1);
    double radius = std::sqrt(z1 * z1 + z2 * z2);
    return {z[0], z[1], z[2], dv[0], dv[1], dv[2], std::sin(angle), std::cos(angle), radius};
}

std::vector<double> PiEmbedder::embed_one(const State3& s) const {
    return pca2.transform_one(pi_features(s, pca1, params));
}

State3 PiEmbedder::decode_one(const std::vector<double>& e) const {
    std::vector<double> feats = pca2.inverse_one(e);
    std::vector<double> xyz = pca1.inverse_one({feats[0], feats[1], feats[2]});
    return {xyz[0], xyz[1], xyz[2]};
}

Tensor states_matrix(const std::vector<Trajectory>& trajs) {
    std::int64_t total = 0;
    for (const auto& t : trajs) total += static_cast<std::int64_t>(t.states.size());
    Tensor m({static_cast<int>(total), 3});
    int row = 0;
    for (const auto& t : trajs)
        for (const auto& s : t.states) {
            m.at(row, 0) = s.x;
            m.at(row, 1) = s.y;
            m.at(row, 2) = s.z;
            ++row;
        }
    return m;
}

PiEmbedder fit_pi_pipeline(const std::vector<Trajectory>& train, const LorenzParams& p) {
    if (train.empty()) throw EmptyInputError("fit_pi_pipeline: empty training split");
    PiEmbedder emb;
    emb.params = p;
    Tensor states = states_matrix(train);
    emb.pca1 = fit_pca(states, 3);

    Tensor feats({states.rows(), 9});
    for (int i = 0; i < states.rows(); ++i) {
        State3 s{states.at(i, 0), states.at(i, 1), states.at(i, 2)};
        std::vector<double> f = pi_features(s, emb.pca1, p);
        for (int j = 0; j < 9; ++j) feats.at(i, j) = f[static_cast<std::size_t>(j)];
    }
    emb.pca2 = fit_pca(feats, 9);
    return emb;
}

PcaModel fit_standard_pca(const std::vector<Trajectory>& train) {
    if (train.empty()) throw EmptyInputError("fit_standard_pca: empty training split");
    return fit_pca(states_matrix(train), 3);
}

ParamStore pca_to_params(const PcaModel& m, const std::string& ns) {
    ParamStore ps;
    ps.add(ns + ".mean", m.mean);
    ps.add(ns + ".components", m.components);
    Tensor evr({static_cast<int>(m.explained_variance_ratio.size())});
    for (std::size_t i = 0; i < m.explained_variance_ratio.size(); ++i)
        evr.at(static_cast<int>(i)) = m.explained_variance_ratio[i];
    ps.add(ns + ".explained_variance_ratio", evr);
    ps.add(ns + ".rank", Tensor::scalar(static_cast<double>(m.rank)));
    return ps;
}

PcaModel pca_from_params(const ParamStore& ps, const std::string& ns) {
    PcaModel m;
    m.mean = ps.get(ns + ".mean");
    m.components = ps.get(ns + ".components");
    const Tensor& evr = ps.get(ns + ".explained_variance_ratio");
    m.explained_variance_ratio.resize(static_cast<std::size_t>(evr.numel()));
    for (std::int64_t i = 0; i < evr.numel(); ++i)
        m.explained_variance_ratio[static_cast<std::size_t>(i)] = evr.at(static_cast<int>(i));
    m.rank = static_cast<int>(ps.get(ns + ".rank").at(0));
    return m;
}

}  // namespace kooplab
