#pragma once

#include <string>
#include <vector>

namespace mtil::evalkit {

// Scoring tokenization: lowercase, split on whitespace/punctuation (tokens
// are maximal alphanumeric runs). No stemming.
std::vector<std::string> rouge_tokenize(const std::string& text);

// N-gram overlap F-measure, max over references. A candidate shorter than
// n tokens scores 0; F is 0 when precision and recall are both 0.
double rouge_n_f(const std::string& candidate, const std::vector<std::string>& references,
                 int n = 2);

// Longest-common-subsequence F-measure over tokens, max over references.
double rouge_l(const std::string& candidate, const std::vector<std::string>& references);

}  // namespace mtil::evalkit
