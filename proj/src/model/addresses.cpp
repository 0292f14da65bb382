#include "mtil/model/addresses.hpp"

namespace mtil::model {

namespace {

// Lexicographically sorted within each stack.
const std::vector<std::string> kEncoderMatrices = {
    "ff.w1", "ff.w2", "self_attn.k_proj", "self_attn.out_proj", "self_attn.q_proj",
    "self_attn.v_proj"};

const std::vector<std::string> kDecoderMatrices = {
    "cross_attn.k_proj", "cross_attn.out_proj", "cross_attn.q_proj", "cross_attn.v_proj",
    "ff.w1", "ff.w2", "self_attn.k_proj", "self_attn.out_proj", "self_attn.q_proj",
    "self_attn.v_proj"};

}  // namespace

std::string LayerAddress::param_name(const std::string& ns) const {
    return ns + (stack == Stack::Encoder ? "encoder" : "decoder") + ".layer" +
           std::to_string(layer_index) + "." + matrix_name + ".w";
}

std::string LayerAddress::to_string() const {
    return std::string(stack == Stack::Encoder ? "encoder" : "decoder") + ".layer" +
           std::to_string(layer_index) + "." + matrix_name;
}

TargetSelector parse_target_selector(const std::string& name) {
    if (name == "encoder") return TargetSelector::Encoder;
    if (name == "decoder") return TargetSelector::Decoder;
    if (name == "both") return TargetSelector::Both;
    throw ConfigError("unknown target selector \"" + name +
                      "\"; valid values: encoder, decoder, both");
}

std::string target_selector_name(TargetSelector s) {
    switch (s) {
        case TargetSelector::Encoder: return "encoder";
        case TargetSelector::Decoder: return "decoder";
        case TargetSelector::Both: return "both";
    }
    return "decoder";
}

std::vector<LayerAddress> list_target_layers(const ModelConfig& cfg, TargetSelector selector) {
    std::vector<LayerAddress> out;
    if (selector == TargetSelector::Encoder || selector == TargetSelector::Both) {
        for (int i = 0; i < cfg.n_encoder_layers; ++i)
            for (const auto& m : kEncoderMatrices)
                out.push_back({LayerAddress::Stack::Encoder, i, m});
    }
    if (selector == TargetSelector::Decoder || selector == TargetSelector::Both) {
        for (int i = 0; i < cfg.n_decoder_layers; ++i)
            for (const auto& m : kDecoderMatrices)
                out.push_back({LayerAddress::Stack::Decoder, i, m});
    }
    return out;
}

grad::Shape target_shape(const ModelConfig& cfg, const LayerAddress& addr) {
    if (addr.matrix_name == "ff.w1") return {cfg.d_model, cfg.ff_dim};
    if (addr.matrix_name == "ff.w2") return {cfg.ff_dim, cfg.d_model};
    return {cfg.d_model, cfg.d_model};  // attention projections
}

}  // namespace mtil::model
