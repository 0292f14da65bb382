#pragma once

#include <cstdint>
#include <vector>

#include "mtil/data/instruction.hpp"
#include "mtil/data/task.hpp"
#include "mtil/model/tokenizer.hpp"

namespace mtil::data {

struct FilterLimits {
    int64_t enc_limit = 1024;
    int64_t dec_limit = 128;
};

// Sequence length accounting shared by the pre-filter and batch assembly:
// encoder input is BOS + text + EOS, decoder target is BOS + prefix +
// reference + EOS.
int64_t encoder_token_length(const model::ByteTokenizer& tok, const std::string& text);
int64_t decoder_token_length(const model::ByteTokenizer& tok, const std::string& reference);

// Drops instances that do not fit the context windows under the longest
// instruction configuration (DescPosEx), so the surviving set is identical
// for every configuration. Tasks left with zero instances are dropped with
// a notice on stderr.
std::vector<TaskSpec> prefilter_instances(const std::vector<TaskSpec>& tasks,
                                          const model::ByteTokenizer& tok,
                                          const FilterLimits& limits = {});

}  // namespace mtil::data
