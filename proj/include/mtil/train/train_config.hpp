#pragma once

#include <cstdint>
#include <string>

#include "mtil/data/instruction.hpp"
#include "mtil/error.hpp"

namespace mtil::train {

enum class Method { Standard, Maml, Hnet, HnetMaml };

inline Method parse_method(const std::string& name) {
    if (name == "standard") return Method::Standard;
    if (name == "maml") return Method::Maml;
    if (name == "hnet") return Method::Hnet;
    if (name == "hnet_maml") return Method::HnetMaml;
    throw ConfigError("unknown method \"" + name +
                      "\"; valid methods: standard, maml, hnet, hnet_maml");
}

inline std::string method_name(Method m) {
    switch (m) {
        case Method::Standard: return "standard";
        case Method::Maml: return "maml";
        case Method::Hnet: return "hnet";
        case Method::HnetMaml: return "hnet_maml";
    }
    return "standard";
}

inline bool method_uses_hnet(Method m) {
    return m == Method::Hnet || m == Method::HnetMaml;
}

struct TrainConfig {
    Method method = Method::Standard;
    double inner_lr = 5e-3;
    double outer_lr = 5e-4;
    int inner_steps = 3;       // N
    int inner_batch = 10;      // also the plain batch size
    int tasks_per_meta_step = 2;  // K
    int alternation_period = 10;  // k updates per frozen phase
    int grad_accumulation_steps = 1;
    int epochs = 20;  // the config loader defaults hnet_maml to 10
    int instance_cap = 100;
    uint64_t seed = 0;
    bool joint_mode = false;      // hnet ablation: train both groups every step
    bool mean_meta_loss = false;  // average instead of summing the K target losses
    data::InstructionVariant instruction = data::InstructionVariant::DescPosEx;

    void validate() const {
        if (inner_lr <= 0 || outer_lr <= 0) throw ConfigError("train: learning rates must be positive");
        if (inner_steps < 0) throw ConfigError("train: inner_steps must be >= 0");
        if (inner_batch <= 0 || tasks_per_meta_step <= 0)
            throw ConfigError("train: batch and task counts must be positive");
        if (alternation_period < 1) throw ConfigError("train: alternation_period must be >= 1");
        if (grad_accumulation_steps < 1)
            throw ConfigError("train: grad_accumulation_steps must be >= 1");
        if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if (instance_cap < 1) throw ConfigError("train: instance_cap must be >= 1");
    }
};

}  // namespace mtil::train
