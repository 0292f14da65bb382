#pragma once

// Shared helpers for tests: micro model construction and batch building.

#include <cstdint>
#include <string>
#include <vector>

#include "mtil/grad/registry.hpp"
#include "mtil/grad/rng.hpp"
#include "mtil/hnet/hypernet.hpp"
#include "mtil/model/model.hpp"

namespace mtil_test {

using mtil::model::Batch;
using mtil::model::ByteTokenizer;
using mtil::model::ModelConfig;
using mtil::model::SeqExample;

inline ModelConfig micro_config(int64_t vocab_size, int64_t d_model = 16,
                                int64_t n_layers = 1, int64_t n_heads = 2,
                                int64_t ff_dim = 32) {
    ModelConfig cfg;
    cfg.vocab_size = vocab_size;
    cfg.d_model = d_model;
    cfg.n_heads = n_heads;
    cfg.n_encoder_layers = n_layers;
    cfg.n_decoder_layers = n_layers;
    cfg.ff_dim = ff_dim;
    cfg.max_encoder_positions = 128;
    cfg.max_decoder_positions = 64;
    return cfg;
}

template <typename S>
struct TestModel {
    ModelConfig cfg;
    ByteTokenizer tok;
    mtil::grad::ParamRegistry<S> reg;

    mtil::model::ParamView<S> view() const { return mtil::model::ParamView<S>(reg); }
};

template <typename S>
TestModel<S> make_micro_model(uint64_t seed, int n_index_tokens = 0, int64_t d_model = 16,
                              int64_t n_layers = 1, double init_std = 0.02) {
    TestModel<S> m{micro_config(0, d_model, n_layers), ByteTokenizer(n_index_tokens), {}};
    m.cfg.vocab_size = m.tok.vocab_size();
    m.cfg.init_std = init_std;
    auto rng = mtil::grad::make_rng(seed);
    mtil::model::init_seq2seq_params(m.reg, m.cfg, "main.", rng);
    return m;
}

inline SeqExample make_example(const ByteTokenizer& tok, const std::string& input,
                               const std::string& output,
                               const std::string& prefix = "[Output]:") {
    SeqExample ex;
    ex.src_ids = mtil::model::encode_encoder_text(tok, input);
    ex.tgt_ids = mtil::model::encode_decoder_target(tok, prefix, output);
    return ex;
}

template <typename S>
struct TestHnetModel {
    ModelConfig cfg;
    mtil::hnet::Hypernet h;
    ByteTokenizer tok;
    mtil::grad::ParamRegistry<S> reg;

    mtil::model::ParamView<S> view() const { return mtil::model::ParamView<S>(reg); }
};

template <typename S>
TestHnetModel<S> make_micro_hnet(uint64_t seed, int64_t d_model = 16, int64_t n_layers = 1,
                                 double init_std = 0.02, int64_t hidden_dim = 32) {
    TestHnetModel<S> m;
    m.cfg = micro_config(0, d_model, n_layers);
    m.cfg.init_std = init_std;
    mtil::hnet::HnetConfig hcfg;
    hcfg.hidden_dim = hidden_dim;
    m.h = mtil::hnet::make_hypernet(m.cfg, hcfg);
    m.tok = ByteTokenizer(static_cast<int>(m.h.targets.size()));
    m.cfg.vocab_size = m.tok.vocab_size();
    m.h.lm_cfg = m.cfg;  // keep vocab in sync
    auto rng = mtil::grad::make_rng(seed);
    mtil::model::init_seq2seq_params(m.reg, m.cfg, "main.", rng);
    mtil::hnet::init_hypernet_params(m.reg, m.h, m.cfg, rng);
    return m;
}

}  // namespace mtil_test
