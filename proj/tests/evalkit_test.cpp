#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "mtil/error.hpp"
#include "mtil/evalkit/report.hpp"
#include "mtil/evalkit/rouge.hpp"
#include "mtil/grad/rng.hpp"

using namespace mtil;
using namespace mtil::evalkit;

namespace {

// Brute-force scoring oracles, written independently of the production
// implementations: explicit n-gram multiset construction and a full-table
// LCS dynamic program over the same tokenization.
std::vector<std::string> oracle_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(cur), cur.clear();
    };
    for (char raw : text) {
        const unsigned char c = static_cast<unsigned char>(raw);
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'))
            cur.push_back(static_cast<char>(c));
        else if (c >= 'A' && c <= 'Z')
            cur.push_back(static_cast<char>(c - 'A' + 'a'));
        else
            flush();
    }
    flush();
    return out;
}

double oracle_rouge_n(const std::string& cand, const std::vector<std::string>& refs, int n) {
    auto grams = [&](const std::vector<std::string>& toks) {
        std::multiset<std::vector<std::string>> ms;
        for (int i = 0; i + n <= static_cast<int>(toks.size()); ++i)
            ms.insert(std::vector<std::string>(toks.begin() + i, toks.begin() + i + n));
        return ms;
    };
    const auto ct = oracle_tokens(cand);
    const auto cg = grams(ct);
    double best = 0;
    for (const auto& ref : refs) {
        const auto rg = grams(oracle_tokens(ref));
        double overlap = 0;
        auto remaining = rg;
        for (const auto& g : cg) {
            auto it = remaining.find(g);
            if (it != remaining.end()) {
                overlap += 1;
                remaining.erase(it);
            }
        }
        const double p = cg.empty() ? 0 : overlap / static_cast<double>(cg.size());
        const double r = rg.empty() ? 0 : overlap / static_cast<double>(rg.size());
        const double f = (p + r) == 0 ? 0 : 2 * p * r / (p + r);
        best = std::max(best, f);
    }
    return best;
}

double oracle_rouge_l(const std::string& cand, const std::vector<std::string>& refs) {
    const auto a = oracle_tokens(cand);
    double best = 0;
    for (const auto& ref : refs) {
        const auto b = oracle_tokens(ref);
        std::vector<std::vector<int>> dp(a.size() + 1, std::vector<int>(b.size() + 1, 0));
        for (size_t i = 1; i <= a.size(); ++i)
            for (size_t j = 1; j <= b.size(); ++j)
                dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1
                                                : std::max(dp[i - 1][j], dp[i][j - 1]);
        const double lcs = dp[a.size()][b.size()];
        if (a.empty() || b.empty()) continue;
        const double p = lcs / static_cast<double>(a.size());
        const double r = lcs / static_cast<double>(b.size());
        const double f = (p + r) == 0 ? 0 : 2 * p * r / (p + r);
        best = std::max(best, f);
    }
    return best;
}

std::string random_sentence(std::mt19937_64& rng, int max_words) {
    static const std::vector<std::string> vocab = {"the", "cat",  "sat", "on",  "mat",
                                                   "dog", "ran",  "big", "red", "blue",
                                                   "a",   "bird", "saw", "two", "trees"};
    std::uniform_int_distribution<int> n_dist(0, max_words);
    std::uniform_int_distribution<size_t> w_dist(0, vocab.size() - 1);
    const int n = n_dist(rng);
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += vocab[w_dist(rng)];
    }
    return out;
}

}  // namespace

TEST_CASE("rouge worked example") {
    const double f = rouge_n_f("the cat sat on mat", {"the cat sat"}, 2);
    CHECK(f == doctest::Approx(2.0 * 0.5 * 1.0 / 1.5).epsilon(1e-9));
    CHECK(std::abs(f - 0.6667) < 1e-4);

    const double l = rouge_l("a b c", {"a x c"});
    CHECK(l == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("rouge identities and degenerate cases") {
    CHECK(rouge_n_f("the red dog ran", {"the red dog ran"}, 2) == doctest::Approx(1.0));
    CHECK(rouge_l("the red dog ran", {"the red dog ran"}) == doctest::Approx(1.0));
    CHECK(rouge_n_f("aa bb cc", {"xx yy zz"}, 2) == 0.0);
    CHECK(rouge_l("", {"something"}) == 0.0);
    CHECK(rouge_n_f("single", {"single token reference"}, 2) == 0.0);  // too short for bigrams
    CHECK_THROWS_AS(rouge_n_f("x", {}, 2), ContractError);
    CHECK_THROWS_AS(rouge_l("x", {}), ContractError);
    CHECK_THROWS_AS(rouge_n_f("x", {"y"}, 0), ContractError);
    // tokenization: case and punctuation insensitive
    CHECK(rouge_n_f("The cat, sat!", {"the CAT sat"}, 2) == doctest::Approx(1.0));
}

TEST_CASE("rouge is invariant to reference order") {
    std::vector<std::string> refs = {"the cat sat", "a dog ran far", "two birds"};
    auto shuffled = refs;
    std::reverse(shuffled.begin(), shuffled.end());
    const std::string cand = "the cat sat on a mat";
    CHECK(rouge_n_f(cand, refs, 2) == rouge_n_f(cand, shuffled, 2));
    CHECK(rouge_l(cand, refs) == rouge_l(cand, shuffled));
}

TEST_CASE("rouge matches brute-force oracles on 100 random pairs") {
    auto rng = grad::make_rng(77);
    for (int i = 0; i < 100; ++i) {
        const auto cand = random_sentence(rng, 12);
        std::vector<std::string> refs;
        std::uniform_int_distribution<int> nref(1, 3);
        const int r = nref(rng);
        for (int j = 0; j < r; ++j) refs.push_back(random_sentence(rng, 10));
        CHECK(rouge_n_f(cand, refs, 2) == doctest::Approx(oracle_rouge_n(cand, refs, 2)).epsilon(1e-12));
        CHECK(rouge_l(cand, refs) == doctest::Approx(oracle_rouge_l(cand, refs)).epsilon(1e-12));
        CHECK(rouge_n_f(cand, refs, 1) == doctest::Approx(oracle_rouge_n(cand, refs, 1)).epsilon(1e-12));
    }
}

TEST_CASE("rouge scores stay in [0,1]") {
    auto rng = grad::make_rng(78);
    for (int i = 0; i < 200; ++i) {
        const auto cand = random_sentence(rng, 8);
        const auto ref = random_sentence(rng, 8);
        const double f = rouge_n_f(cand, {ref.empty() ? "x" : ref}, 2);
        const double l = rouge_l(cand, {ref.empty() ? "x" : ref});
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
        CHECK(l >= 0.0);
        CHECK(l <= 1.0);
    }
}

namespace {

EvalReport fabricated_report(int n_tasks, uint64_t seed) {
    EvalReport rep;
    rep.instruction_variant = "none";
    auto rng = grad::make_rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int i = 0; i < n_tasks; ++i) {
        TaskScore t;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "task_%03d", i);
        t.task_id = buf;
        t.categories = {"Cat"};
        t.n_instances = 10;
        t.rouge2_f = dist(rng);
        t.rougeL_f = dist(rng);
        rep.tasks.push_back(std::move(t));
    }
    return rep;
}

}  // namespace

TEST_CASE("difficulty binning counts") {
    auto bins33 = bin_by_difficulty(fabricated_report(33, 1));
    REQUIRE(bins33.size() == 3);
    for (const auto& b : bins33) CHECK(b.task_ids.size() == 11);
    CHECK(bins33[0].label == "hard");
    CHECK(bins33[2].label == "easy");

    auto bins81 = bin_by_difficulty(fabricated_report(81, 2));
    for (const auto& b : bins81) CHECK(b.task_ids.size() == 27);

    // hard bin has the lowest baseline scores
    auto rep = fabricated_report(33, 3);
    auto bins = bin_by_difficulty(rep);
    double hard_max = 0, easy_min = 1;
    for (const auto& id : bins[0].task_ids) hard_max = std::max(hard_max, rep.find(id)->rouge2_f);
    for (const auto& id : bins[2].task_ids) easy_min = std::min(easy_min, rep.find(id)->rouge2_f);
    CHECK(hard_max <= easy_min);
}

TEST_CASE("difficulty binning handles remainders and ties") {
    auto rep = fabricated_report(10, 4);
    auto bins = bin_by_difficulty(rep);
    CHECK(bins[0].task_ids.size() == 4);  // remainder goes to hard first
    CHECK(bins[1].task_ids.size() == 3);
    CHECK(bins[2].task_ids.size() == 3);

    // all-equal scores: tie-break by id, still a partition
    EvalReport tied = fabricated_report(9, 5);
    for (auto& t : tied.tasks) t.rouge2_f = 0.5;
    auto tb = bin_by_difficulty(tied);
    std::set<std::string> seen;
    for (const auto& b : tb)
        for (const auto& id : b.task_ids) seen.insert(id);
    CHECK(seen.size() == 9);
    CHECK(tb[0].task_ids[0] == "task_000");  // lexicographic tie-break

    CHECK_THROWS_AS(bin_by_difficulty(fabricated_report(2, 6)), ContractError);
}

TEST_CASE("pct_change") {
    CHECK(pct_change(0.4, 0.4).value() == doctest::Approx(0.0));
    CHECK(pct_change(2.0, 3.0).value() == doctest::Approx(50.0));
    CHECK(pct_change(0.01, 0.1552).value() == doctest::Approx(1452.0));
    CHECK_FALSE(pct_change(0.0, 0.1).has_value());
    CHECK_FALSE(pct_change(-0.1, 0.1).has_value());
}

TEST_CASE("report save/load round trip") {
    namespace fs = std::filesystem;
    auto rep = fabricated_report(5, 7);
    rep.instruction_variant = "desc_posex";
    rep.tasks[0].categories = {"Title Generation", "Summarization"};
    const auto path = fs::temp_directory_path() / "mtil_report_test.tsv";
    save_report(rep, path.string());
    auto loaded = load_report(path.string());
    CHECK(loaded.instruction_variant == "desc_posex");
    REQUIRE(loaded.tasks.size() == 5);
    CHECK(loaded.tasks[0].categories.size() == 2);
    CHECK(loaded.tasks[0].categories[0] == "Title Generation");
    for (size_t i = 0; i < 5; ++i) {
        CHECK(loaded.tasks[i].task_id == rep.tasks[i].task_id);
        CHECK(loaded.tasks[i].rouge2_f == doctest::Approx(rep.tasks[i].rouge2_f).epsilon(1e-6));
    }
    CHECK(loaded.mean_rouge2_f() == doctest::Approx(rep.mean_rouge2_f()).epsilon(1e-6));
    fs::remove(path);
}
