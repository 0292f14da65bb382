#include "mtil/model/tokenizer.hpp"

#include "mtil/error.hpp"

namespace mtil::model {

int32_t ByteTokenizer::index_token(int n) const {
    if (n < 0 || n >= n_index_tokens_)
        throw ContractError("ByteTokenizer: index token " + std::to_string(n) + " out of range");
    return kBaseVocab + n;
}

std::vector<int32_t> ByteTokenizer::encode(std::string_view text) const {
    std::vector<int32_t> ids;
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(static_cast<int32_t>(c));
    return ids;
}

std::string ByteTokenizer::decode(const std::vector<int32_t>& ids) const {
    std::string out;
    out.reserve(ids.size());
    for (int32_t id : ids)
        if (id >= 0 && id < 256) out.push_back(static_cast<char>(id));
    return out;
}

}  // namespace mtil::model
