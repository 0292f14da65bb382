#pragma once

#include <cstdint>

#include "mtil/error.hpp"

namespace mtil::model {

// Encoder-decoder transformer dimensions. The defaults are the desk-scale
// configuration: small enough to train in minutes on CPU while keeping
// every mechanism of the full-size model.
struct ModelConfig {
    int64_t vocab_size = 0;  // set from the tokenizer
    int64_t d_model = 64;
    int64_t n_heads = 4;
    int64_t n_encoder_layers = 2;
    int64_t n_decoder_layers = 2;
    int64_t ff_dim = 256;
    int64_t max_encoder_positions = 1024;
    int64_t max_decoder_positions = 128;
    // Weight init scale. Gradient-check configs raise it so that deep-path
    // derivatives stay well above finite-difference noise.
    double init_std = 0.02;

    void validate() const {
        if (vocab_size <= 0) throw ConfigError("model: vocab_size must be positive");
        if (d_model <= 0 || n_heads <= 0 || ff_dim <= 0)
            throw ConfigError("model: dimensions must be positive");
        if (d_model % n_heads != 0)
            throw ConfigError("model: d_model must be divisible by n_heads");
        if (n_encoder_layers <= 0 || n_decoder_layers <= 0)
            throw ConfigError("model: need at least one layer per stack");
        if (max_encoder_positions <= 0 || max_decoder_positions <= 0)
            throw ConfigError("model: position limits must be positive");
    }
};

}  // namespace mtil::model
