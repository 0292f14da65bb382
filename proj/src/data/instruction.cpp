#include "mtil/data/instruction.hpp"

#include "mtil/error.hpp"

namespace mtil::data {

namespace {

constexpr const char* kDefinitionMarker = "Definition: ";
constexpr const char* kExampleMarker = "Positive Example:";
constexpr const char* kInputMarker = "Input: ";
constexpr const char* kOutputMarker = "Output: ";
constexpr const char* kSeparator = "\nNow complete the following.\n";

std::string render_example(const TaskSpec& task) {
    if (task.positive_examples.empty())
        throw DataError("compose_instruction: task " + task.id +
                        " has no positive examples for a PosEx variant");
    const Example& ex = task.positive_examples.front();
    std::string out = kExampleMarker;
    out += "\n";
    out += kInputMarker;
    out += ex.input;
    out += "\n";
    out += kOutputMarker;
    out += ex.output;
    return out;
}

}  // namespace

InstructionVariant parse_instruction_variant(const std::string& name) {
    if (name == "none") return InstructionVariant::None;
    if (name == "desc") return InstructionVariant::Desc;
    if (name == "posex") return InstructionVariant::PosEx;
    if (name == "desc_posex") return InstructionVariant::DescPosEx;
    throw ConfigError("unknown instruction config \"" + name +
                      "\"; valid values: none, desc, posex, desc_posex");
}

std::string instruction_variant_name(InstructionVariant v) {
    switch (v) {
        case InstructionVariant::None: return "none";
        case InstructionVariant::Desc: return "desc";
        case InstructionVariant::PosEx: return "posex";
        case InstructionVariant::DescPosEx: return "desc_posex";
    }
    return "none";
}

std::string compose_instruction(const TaskSpec& task, InstructionVariant v) {
    switch (v) {
        case InstructionVariant::None:
            return task.short_description;
        case InstructionVariant::Desc:
            return kDefinitionMarker + task.long_description;
        case InstructionVariant::PosEx:
            return task.short_description + "\n" + render_example(task);
        case InstructionVariant::DescPosEx:
            return kDefinitionMarker + task.long_description + "\n" + render_example(task);
    }
    throw ContractError("compose_instruction: bad variant");
}

std::string build_encoder_text(const std::string& instruction,
                               const std::string& instance_input) {
    return instruction + kSeparator + instance_input;
}

const std::string& decoder_prefix() {
    static const std::string prefix = "[Output]:";
    return prefix;
}

}  // namespace mtil::data
