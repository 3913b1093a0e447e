#pragma once

#include <memory>
#include <string>
#include <vector>

#include "kooplab/dataset.hpp"
#include "kooplab/koopman.hpp"
#include "kooplab/pca.hpp"

namespace kooplab {

enum class EmbedderKind { Koopman, PcaPi, Pca };

const char* embedder_name(EmbedderKind k);
EmbedderKind embedder_from_name(const std::string& name);

// Frozen state-to-embedding map used by the transformer stages. Implementations
// take raw states and return raw states from decode.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbedderKind kind() const = 0;
    virtual int dim() const = 0;
    virtual Tensor embed(const std::vector<State3>& states) const = 0;  // [T, dim]
    virtual State3 decode(const std::vector<double>& embedding) const = 0;
};

class KoopmanEmbedder final : public Embedder {
public:
    KoopmanEmbedder(KoopmanAutoencoder ae, Normalizer norm)
        : ae_(std::move(ae)), norm_(norm) {}
    EmbedderKind kind() const override { return EmbedderKind::Koopman; }
    int dim() const override { return ae_.latent_dim; }
    Tensor embed(const std::vector<State3>& states) const override;
    State3 decode(const std::vector<double>& embedding) const override;
    const KoopmanAutoencoder& autoencoder() const { return ae_; }

private:
    KoopmanAutoencoder ae_;
    Normalizer norm_;
};

class PcaEmbedder final : public Embedder {
public:
    explicit PcaEmbedder(PcaModel model) : model_(std::move(model)) {}
    EmbedderKind kind() const override { return EmbedderKind::Pca; }
    int dim() const override { return model_.out_dim(); }
    Tensor embed(const std::vector<State3>& states) const override;
    State3 decode(const std::vector<double>& embedding) const override;
    const PcaModel& model() const { return model_; }

private:
    PcaModel model_;
};

class PiPcaEmbedder final : public Embedder {
public:
    explicit PiPcaEmbedder(PiEmbedder model) : model_(std::move(model)) {}
    EmbedderKind kind() const override { return EmbedderKind::PcaPi; }
    int dim() const override { return 9; }
    Tensor embed(const std::vector<State3>& states) const override;
    State3 decode(const std::vector<double>& embedding) const override;
    const PiEmbedder& model() const { return model_; }

private:
    PiEmbedder model_;
};

}  // namespace kooplab
