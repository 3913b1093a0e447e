#include "kooplab/embedder.hpp"

#include "kooplab/errors.hpp"

namespace kooplab {

const char* embedder_name(EmbedderKind k) {
    switch (k) {
        case EmbedderKind::Koopman: return "koopman";
        case EmbedderKind::PcaPi: return "pca-pi";
        case EmbedderKind::Pca: return "pca";
    }
    return "?";
}

EmbedderKind embedder_from_name(const std::string& name) {
    if (name == "koopman") return EmbedderKind::Koopman;
    if (name == "pca-pi") return EmbedderKind::PcaPi;
    if (name == "pca") return EmbedderKind::Pca;
    throw ConfigError("unknown embedder: " + name);
}

namespace {
Tensor states_to_matrix(const std::vector<State3>& states) {
    Tensor m({static_cast<int>(states.size()), 3});
    for (std::size_t i = 0; i < states.size(); ++i) {
        m.at(static_cast<int>(i), 0) = states[i].x;
        m.at(static_cast<int>(i), 1) = states[i].y;
        m.at(static_cast<int>(i), 2) = states[i].z;
    }
    return m;
}
}  // namespace

Tensor KoopmanEmbedder::embed(const std::vector<State3>& states) const {
    return ae_.encode(norm_.apply(states_to_matrix(states)));
}

State3 KoopmanEmbedder::decode(const std::vector<double>& embedding) const {
    Tensor z = Tensor::from({1, ae_.latent_dim}, embedding);
    Tensor s = ae_.decode(z);
    return norm_.invert({s.at(0, 0), s.at(0, 1), s.at(0, 2)});
}

Tensor PcaEmbedder::embed(const std::vector<State3>& states) const {
    return model_.transform(states_to_matrix(states));
}

State3 PcaEmbedder::decode(const std::vector<double>& embedding) const {
    auto s = model_.inverse_one(embedding);
    return {s[0], s[1], s[2]};
}

Tensor PiPcaEmbedder::embed(const std::vector<State3>& states) const {
    Tensor out({static_cast<int>(states.size()), 9});
    for (std::size_t i = 0; i < states.size(); ++i) {
        auto e = model_.embed_one(states[i]);
        for (int j = 0; j < 9; ++j) out.at(static_cast<int>(i), j) = e[static_cast<std::size_t>(j)];
    }
    return out;
}

State3 PiPcaEmbedder::decode(const std::vector<double>& embedding) const {
    return model_.decode_one(embedding);
}

}  // namespace kooplab
