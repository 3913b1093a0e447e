#pragma once

#include <vector>

#include "kooplab/autodiff.hpp"
#include "kooplab/lorenz.hpp"
#include "kooplab/tensor.hpp"

namespace kooplab {

// Principal axes of mean-centered data, rows of `components` orthonormal and
// ordered by descending eigenvalue. Sign convention: the largest-magnitude
// entry of each axis is positive, so fits are reproducible across platforms.
struct PcaModel {
    Tensor mean;        // [d]
    Tensor components;  // [k, d]
    std::vector<double> explained_variance_ratio;  // length k, non-increasing
    int rank = 0;       // numerical rank of the covariance

    int in_dim() const { return mean.dim(0); }
    int out_dim() const { return components.rows(); }

    Tensor transform(const Tensor& x) const;          // [n,d] -> [n,k]
    Tensor inverse_transform(const Tensor& z) const;  // [n,k] -> [n,d]
    std::vector<double> transform_one(const std::vector<double>& x) const;
    std::vector<double> inverse_one(const std::vector<double>& z) const;
    // Rotates a direction vector into the component basis (no centering).
    std::vector<double> rotate(const std::vector<double>& v) const;
};

// Jacobi eigendecomposition of a symmetric matrix; eigenvalues descending.
void symmetric_eig(const Tensor& m, Tensor& eigvecs_rows, std::vector<double>& eigvals);

// strict = true raises RankDeficientError when the covariance rank is below k;
// otherwise the model is returned with the rank recorded.
PcaModel fit_pca(const Tensor& samples, int k, bool strict = false);

// 9-D physics-informed features for one state: pca1 coordinates, the Lorenz
// velocity rotated into the pca1 basis, and (sin, cos, radius) of the leading
// principal plane. atan2(0,0) is taken as angle 0.
std::vector<double> pi_features(const State3& s, const PcaModel& pca1, const LorenzParams& p);

struct PiEmbedder {
    PcaModel pca1;  // 3 -> 3 on states
    PcaModel pca2;  // 9 -> 9 on intermediate features
    LorenzParams params;

    std::vector<double> embed_one(const State3& s) const;
    // Recovers the state from an embedding: invert pca2, take the coordinate
    // block, invert pca1.
    State3 decode_one(const std::vector<double>& e) const;
};

// Both PCA pipelines are fit on raw states: PCA centers internally, and the
// physics features (Lorenz velocity, angle, radius) live in physical
// coordinates.
PiEmbedder fit_pi_pipeline(const std::vector<Trajectory>& train, const LorenzParams& p);
PcaModel fit_standard_pca(const std::vector<Trajectory>& train);

Tensor states_matrix(const std::vector<Trajectory>& trajs);

ParamStore pca_to_params(const PcaModel& m, const std::string& ns);
PcaModel pca_from_params(const ParamStore& ps, const std::string& ns);

}  // namespace kooplab
