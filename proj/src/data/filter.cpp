#include "mtil/data/filter.hpp"

#include <cstdio>

namespace mtil::data {

int64_t encoder_token_length(const model::ByteTokenizer& tok, const std::string& text) {
    return static_cast<int64_t>(tok.encode(text).size()) + 2;  // BOS ... EOS
}

int64_t decoder_token_length(const model::ByteTokenizer& tok, const std::string& reference) {
    return static_cast<int64_t>(tok.encode(decoder_prefix()).size()) +
           static_cast<int64_t>(tok.encode(reference).size()) + 2;  // BOS prefix ref EOS
}

std::vector<TaskSpec> prefilter_instances(const std::vector<TaskSpec>& tasks,
                                          const model::ByteTokenizer& tok,
                                          const FilterLimits& limits) {
    std::vector<TaskSpec> out;
    for (const TaskSpec& task : tasks) {
        const std::string instruction = compose_instruction(task, InstructionVariant::DescPosEx);
        TaskSpec kept = task;
        kept.instances.clear();
        for (const Instance& inst : task.instances) {
            const int64_t enc_len =
                encoder_token_length(tok, build_encoder_text(instruction, inst.input));
            if (enc_len > limits.enc_limit) continue;
            int64_t dec_len = 0;
            for (const auto& ref : inst.references)
                dec_len = std::max(dec_len, decoder_token_length(tok, ref));
            if (dec_len > limits.dec_limit) continue;
            kept.instances.push_back(inst);
        }
        if (kept.instances.empty()) {
            std::fprintf(stderr, "prefilter: task %s completely filtered (limits %lld/%lld)\n",
                         task.id.c_str(), static_cast<long long>(limits.enc_limit),
                         static_cast<long long>(limits.dec_limit));
            continue;
        }
        out.push_back(std::move(kept));
    }
    return out;
}

}  // namespace mtil::data
