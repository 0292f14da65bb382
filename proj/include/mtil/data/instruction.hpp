#pragma once

#include <string>

#include "mtil/data/task.hpp"

namespace mtil::data {

// The four instruction configurations: None keeps the short description
// only, Desc the long description, PosEx adds one worked example, and
// DescPosEx combines both.
enum class InstructionVariant { None, Desc, PosEx, DescPosEx };

InstructionVariant parse_instruction_variant(const std::string& name);
std::string instruction_variant_name(InstructionVariant v);

// Deterministic instruction text for a task. PosEx variants render the
// first listed positive example.
std::string compose_instruction(const TaskSpec& task, InstructionVariant v);

// Encoder text is instruction + marker line + instance input; the decoder
// side always starts with a fixed output prefix.
std::string build_encoder_text(const std::string& instruction, const std::string& instance_input);
const std::string& decoder_prefix();  // "[Output]:"

}  // namespace mtil::data
