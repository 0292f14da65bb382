#pragma once

#include <string>
#include <vector>

#include "mtil/grad/tensor.hpp"
#include "mtil/model/config.hpp"

namespace mtil::model {

// Addresses exactly one 2-D weight matrix of the transformer. Biases and
// layer-norm parameters are not addressable: parameter deltas target
// matrices only.
struct LayerAddress {
    enum class Stack { Encoder, Decoder };

    Stack stack = Stack::Decoder;
    int layer_index = 0;
    std::string matrix_name;  // e.g. "self_attn.q_proj", "ff.w1"

    // Registry key under a namespace prefix ("main.", "hnet.").
    std::string param_name(const std::string& ns) const;
    std::string to_string() const;

    bool operator==(const LayerAddress& o) const {
        return stack == o.stack && layer_index == o.layer_index && matrix_name == o.matrix_name;
    }
};

enum class TargetSelector { Encoder, Decoder, Both };

TargetSelector parse_target_selector(const std::string& name);
std::string target_selector_name(TargetSelector s);

// Deterministic enumeration ordered by (stack, layer, matrix name).
// The default selector targets the decoder.
std::vector<LayerAddress> list_target_layers(const ModelConfig& cfg,
                                             TargetSelector selector = TargetSelector::Decoder);

// Shape of the matrix an address resolves to.
grad::Shape target_shape(const ModelConfig& cfg, const LayerAddress& addr);

}  // namespace mtil::model
