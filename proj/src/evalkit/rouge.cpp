#include "mtil/evalkit/rouge.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "mtil/error.hpp"

namespace mtil::evalkit {

std::vector<std::string> rouge_tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

namespace {

double f_measure(double overlap, double n_cand, double n_ref) {
    const double p = n_cand > 0 ? overlap / n_cand : 0.0;
    const double r = n_ref > 0 ? overlap / n_ref : 0.0;
    if (p + r == 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

std::map<std::string, int> ngram_counts(const std::vector<std::string>& tokens, int n) {
    std::map<std::string, int> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key;
        for (int j = 0; j < n; ++j) {
            if (j) key.push_back('\x1f');
            key += tokens[i + j];
        }
        ++counts[key];
    }
    return counts;
}

}  // namespace

double rouge_n_f(const std::string& candidate, const std::vector<std::string>& references,
                 int n) {
    if (n < 1) throw ContractError("rouge_n_f: n must be >= 1");
    if (references.empty()) throw ContractError("rouge_n_f: empty reference list");
    const auto cand_tokens = rouge_tokenize(candidate);
    const auto cand_counts = ngram_counts(cand_tokens, n);
    const double n_cand = static_cast<double>(
        cand_tokens.size() >= static_cast<size_t>(n) ? cand_tokens.size() - n + 1 : 0);

    double best = 0.0;
    for (const auto& ref : references) {
        const auto ref_tokens = rouge_tokenize(ref);
        const auto ref_counts = ngram_counts(ref_tokens, n);
        const double n_ref = static_cast<double>(
            ref_tokens.size() >= static_cast<size_t>(n) ? ref_tokens.size() - n + 1 : 0);
        double overlap = 0.0;
        for (const auto& [key, c] : cand_counts) {
            auto it = ref_counts.find(key);
            if (it != ref_counts.end()) overlap += std::min(c, it->second);
        }
        best = std::max(best, f_measure(overlap, n_cand, n_ref));
    }
    return best;
}

double rouge_l(const std::string& candidate, const std::vector<std::string>& references) {
    if (references.empty()) throw ContractError("rouge_l: empty reference list");
    const auto cand = rouge_tokenize(candidate);

    double best = 0.0;
    for (const auto& ref_text : references) {
        const auto ref = rouge_tokenize(ref_text);
        const size_t m = cand.size(), k = ref.size();
        if (m == 0 || k == 0) continue;
        // rolling-row LCS
        std::vector<int> prev(k + 1, 0), cur(k + 1, 0);
        for (size_t i = 1; i <= m; ++i) {
            for (size_t j = 1; j <= k; ++j) {
                if (cand[i - 1] == ref[j - 1])
                    cur[j] = prev[j - 1] + 1;
                else
                    cur[j] = std::max(prev[j], cur[j - 1]);
            }
            std::swap(prev, cur);
        }
        const double lcs = prev[k];
        best = std::max(best, f_measure(lcs, static_cast<double>(m), static_cast<double>(k)));
    }
    return best;
}

}  // namespace mtil::evalkit
