#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtil/grad/ops.hpp"
#include "mtil/grad/registry.hpp"
#include "mtil/model/addresses.hpp"
#include "mtil/model/model.hpp"

namespace mtil::hnet {

using grad::Tensor;
using model::ByteTokenizer;
using model::LayerAddress;
using model::ModelConfig;
using model::ParamView;

// Instruction-conditioned hypernetwork: an auxiliary encoder-decoder LM
// reads the instruction and emits one hidden state per target matrix of
// the main LM; per-target feed-forward heads project each state to five
// vectors which assemble a gated rank-2 weight delta.
struct HnetConfig {
    int64_t hidden_dim = 128;
    model::TargetSelector target = model::TargetSelector::Decoder;
    // Reserved index tokens fed to the decoder, one per target; when off,
    // the decoder sees repeated BOS and must rely on positions alone.
    bool use_index_tokens = true;
    // Condition target n on the decoder state at position n; when off the
    // last state conditions every target.
    bool state_sequence = true;
};

struct Hypernet {
    ModelConfig lm_cfg;  // auxiliary LM, architecturally identical to the main LM
    HnetConfig cfg;
    std::vector<LayerAddress> targets;
};

inline Hypernet make_hypernet(const ModelConfig& main_cfg, const HnetConfig& hcfg) {
    Hypernet h;
    h.lm_cfg = main_cfg;
    h.cfg = hcfg;
    h.targets = model::list_target_layers(main_cfg, hcfg.target);
    return h;
}

inline std::string ff_prefix(const LayerAddress& addr) {
    return "hnetff." + addr.to_string() + ".";
}

// Registers the auxiliary LM under "hnet." and the projection heads under
// "hnetff.". The five output heads are zero-initialized so an untrained
// hypernetwork emits exactly zero deltas and the adapted model coincides
// with the base model at step 0.
template <typename S>
void init_hypernet_params(grad::ParamRegistry<S>& reg, const Hypernet& h,
                          const ModelConfig& main_cfg, std::mt19937_64& rng) {
    model::init_seq2seq_params(reg, h.lm_cfg, "hnet.", rng);
    for (const auto& addr : h.targets) {
        const auto shape = model::target_shape(main_cfg, addr);
        const int64_t m = shape[0], n = shape[1];
        const std::string p = ff_prefix(addr);
        reg.add(p + "w1.w",
                Tensor<S>::randn({h.lm_cfg.d_model, h.cfg.hidden_dim}, rng, h.lm_cfg.init_std));
        reg.add(p + "w1.b", Tensor<S>::zeros({h.cfg.hidden_dim}));
        auto head = [&](const std::string& name, int64_t out_dim) {
            reg.add(p + name + ".w", Tensor<S>::zeros({h.cfg.hidden_dim, out_dim}));
            reg.add(p + name + ".b", Tensor<S>::zeros({out_dim}));
        };
        head("alpha", m);
        head("beta", m);
        head("gamma", n);
        head("delta", n);
        head("eta", 1);
    }
}

// Hidden states h(0..N-1), one [1, d_model] row per target, ordered to
// match the target list. The decoder consumes one index token per target.
template <typename S>
std::vector<Tensor<S>> encode_instruction(const Hypernet& h, const ParamView<S>& params,
                                          const ByteTokenizer& tok,
                                          const std::string& instruction) {
    const int64_t n_targets = static_cast<int64_t>(h.targets.size());
    if (tok.n_index_tokens() < (h.cfg.use_index_tokens ? n_targets : 0))
        throw ContractError("encode_instruction: tokenizer lacks index tokens");

    model::Batch batch;
    batch.batch_size = 1;
    batch.src = model::encode_encoder_text(tok, instruction);
    batch.enc_len = static_cast<int64_t>(batch.src.size());
    if (batch.enc_len > h.lm_cfg.max_encoder_positions)
        throw ContractError("encode_instruction: instruction exceeds encoder limit");
    batch.src_valid = {batch.enc_len};
    batch.dec_len = n_targets;

    auto enc = model::encode(h.lm_cfg, params, "hnet.", batch);

    std::vector<int32_t> dec_in(static_cast<size_t>(n_targets), ByteTokenizer::kBos);
    if (h.cfg.use_index_tokens)
        for (int64_t i = 0; i < n_targets; ++i)
            dec_in[static_cast<size_t>(i)] = tok.index_token(static_cast<int>(i));

    auto hidden = model::decode_hidden(h.lm_cfg, params, "hnet.", enc, dec_in, 1, n_targets);
    auto hidden2d = grad::reshape(hidden, {n_targets, h.lm_cfg.d_model});

    std::vector<Tensor<S>> states;
    states.reserve(static_cast<size_t>(n_targets));
    if (h.cfg.state_sequence) {
        for (int64_t i = 0; i < n_targets; ++i)
            states.push_back(grad::slice_rows(hidden2d, i, 1));
    } else {
        auto last = grad::slice_rows(hidden2d, n_targets - 1, 1);
        for (int64_t i = 0; i < n_targets; ++i) states.push_back(last);
    }
    return states;
}

// Five projected vectors for one target matrix of shape m x n:
// alpha/beta on the rows (m), gamma/delta on the columns (n), eta scalar.
template <typename S>
struct ProjectionVectors {
    Tensor<S> alpha, beta, gamma, delta, eta;
};

template <typename S>
ProjectionVectors<S> project(const ParamView<S>& params, const LayerAddress& addr,
                             const Tensor<S>& h) {
    const std::string p = ff_prefix(addr);
    if (h.rank() != 2 || h.dim(0) != 1)
        throw ShapeError("project: hidden state must be [1, d_model]");
    auto z = grad::tanh(
        grad::add_bias(grad::matmul(h, params.get(p + "w1.w")), params.get(p + "w1.b")));
    auto head = [&](const std::string& name) {
        return grad::add_bias(grad::matmul(z, params.get(p + name + ".w")),
                              params.get(p + name + ".b"));
    };
    return {head("alpha"), head("beta"), head("gamma"), head("delta"), head("eta")};
}

// dW = sigmoid(eta) * (softmax(alpha) gamma^T + softmax(beta) delta^T);
// rank <= 2 by construction, magnitude gated into (0,1) by eta.
template <typename S>
Tensor<S> make_delta(const ProjectionVectors<S>& v) {
    const int64_t m = v.alpha.size(), n = v.gamma.size();
    if (v.beta.size() != m || v.delta.size() != n || v.eta.size() != 1)
        throw ShapeError("make_delta: inconsistent projection shapes");
    auto a = grad::reshape(grad::softmax(v.alpha, -1), {m, 1});
    auto b = grad::reshape(grad::softmax(v.beta, -1), {m, 1});
    auto g = grad::reshape(v.gamma, {1, n});
    auto d = grad::reshape(v.delta, {1, n});
    auto low_rank = grad::add(grad::matmul(a, g), grad::matmul(b, d));
    return grad::scale_by(low_rank, grad::sigmoid(v.eta));
}

// Full pipeline: instruction -> hidden states -> projections -> deltas.
template <typename S>
model::DeltaParams<S> predict_deltas(const Hypernet& h, const ParamView<S>& params,
                                     const ByteTokenizer& tok, const std::string& instruction) {
    auto states = encode_instruction(h, params, tok, instruction);
    model::DeltaParams<S> deltas;
    for (size_t i = 0; i < h.targets.size(); ++i) {
        auto vecs = project(params, h.targets[i], states[i]);
        deltas.entries.emplace_back(h.targets[i], make_delta(vecs));
    }
    return deltas;
}

// Task-specific parameter view over the shared registry; differentiable
// end-to-end into the auxiliary LM, the heads, and the base parameters.
// The base registry is never mutated.
template <typename S>
ParamView<S> task_adapt(const Hypernet& h, const grad::ParamRegistry<S>& reg,
                        const ByteTokenizer& tok, const std::string& instruction) {
    ParamView<S> view(reg);
    return model::apply_delta(reg, predict_deltas(h, view, tok, instruction), "main.");
}

}  // namespace mtil::hnet
