#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mtil::model {

// Byte-level tokenizer: one token per byte (0..255) plus PAD/BOS/EOS and an
// optional block of reserved index tokens appended at the end of the vocab.
// The index tokens are consumed by the instruction encoder's decoder side
// and never appear in ordinary text.
class ByteTokenizer {
  public:
    static constexpr int32_t kPad = 256;
    static constexpr int32_t kBos = 257;
    static constexpr int32_t kEos = 258;
    static constexpr int32_t kBaseVocab = 259;

    explicit ByteTokenizer(int n_index_tokens = 0) : n_index_tokens_(n_index_tokens) {}

    int32_t vocab_size() const { return kBaseVocab + n_index_tokens_; }
    int n_index_tokens() const { return n_index_tokens_; }

    // Reserved token for target-layer index n (0-based).
    int32_t index_token(int n) const;

    std::vector<int32_t> encode(std::string_view text) const;

    // Inverse of encode for byte tokens; PAD/BOS/EOS/index tokens are dropped.
    std::string decode(const std::vector<int32_t>& ids) const;

  private:
    int n_index_tokens_;
};

}  // namespace mtil::model
