#include "mtil/data/synth.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <sstream>

#include "mtil/error.hpp"
#include "mtil/grad/rng.hpp"

namespace mtil::data {

namespace {

struct TransformMeta {
    Transform t;
    const char* name;
    const char* category;
    const char* short_desc;
    const char* long_desc;
};

// The first eight rows form the default experiment suite; Sorting and
// Filtering are the held-out families.
const TransformMeta kTransforms[kTransformCount] = {
    {Transform::Reverse, "reverse", "Reordering", "Reverse the order of the items.",
     "Given items separated by spaces, output the same items in the opposite order, "
     "from last to first."},
    {Transform::RotateRight1, "rotate1", "Reordering", "Rotate the items right by one.",
     "Given items separated by spaces, move the last item to the front and keep the "
     "rest in order."},
    {Transform::Duplicate, "duplicate", "Duplication", "Repeat the sequence twice.",
     "Given items separated by spaces, output the whole sequence twice in a row."},
    {Transform::FirstHalf, "firsthalf", "Selection", "Keep the first half of the items.",
     "Given items separated by spaces, output only the first half of the items, "
     "rounding up."},
    {Transform::SwapCase, "swapcase", "Casing", "Swap the case of every letter.",
     "Given items separated by spaces, swap the case of every letter in every item."},
    {Transform::InterleaveMarker, "interleave", "Insertion", "Insert a dash between items.",
     "Given items separated by spaces, insert the marker - between neighboring items."},
    {Transform::SortUnits, "sort", "Sorting", "Sort the items in ascending order.",
     "Given items separated by spaces, output the items sorted in ascending "
     "alphabetical order."},
    {Transform::DropVowelStart, "dropvowel", "Filtering", "Drop items that start with a vowel.",
     "Given items separated by spaces, remove every item whose first letter is a "
     "vowel."},
    {Transform::RotateRight2, "rotate2", "Reordering", "Rotate the items right by two.",
     "Given items separated by spaces, move the last two items to the front and keep "
     "the rest in order."},
    {Transform::RotateRight3, "rotate3", "Reordering", "Rotate the items right by three.",
     "Given items separated by spaces, move the last three items to the front and "
     "keep the rest in order."},
    {Transform::SortUnitsDesc, "sortdesc", "Sorting", "Sort the items in descending order.",
     "Given items separated by spaces, output the items sorted in descending "
     "alphabetical order."},
    {Transform::LastHalf, "lasthalf", "Selection", "Keep the last half of the items.",
     "Given items separated by spaces, output only the last half of the items, "
     "rounding down."},
};

const TransformMeta& meta_of(Transform t) {
    for (const auto& m : kTransforms)
        if (m.t == t) return m;
    throw ContractError("unknown transform");
}

bool is_vowel(char c) {
    switch (std::tolower(static_cast<unsigned char>(c))) {
        case 'a': case 'e': case 'i': case 'o': case 'u': return true;
        default: return false;
    }
}

std::vector<std::string> split_units(const std::string& input, bool& word_mode) {
    word_mode = input.find(' ') != std::string::npos;
    std::vector<std::string> units;
    if (word_mode) {
        std::istringstream is(input);
        std::string w;
        while (is >> w) units.push_back(w);
    } else {
        for (char c : input) units.emplace_back(1, c);
    }
    return units;
}

std::string join_units(const std::vector<std::string>& units, bool word_mode) {
    std::string out;
    for (size_t i = 0; i < units.size(); ++i) {
        if (word_mode && i) out += ' ';
        out += units[i];
    }
    return out;
}

std::string random_word(std::mt19937_64& rng, int min_len, int max_len) {
    std::uniform_int_distribution<int> len_dist(min_len, max_len);
    std::uniform_int_distribution<int> ch_dist(0, 25);
    std::string w(static_cast<size_t>(len_dist(rng)), 'a');
    for (auto& c : w) c = static_cast<char>('a' + ch_dist(rng));
    return w;
}

// Shared input distribution: 4..12 random lowercase words of 3..4 letters,
// resampled until at least one word starts with a consonant so every
// transform has a non-empty output. Worked examples inside instructions
// use a shorter 3..5 word form to keep instruction text compact.
std::string random_input(std::mt19937_64& rng, int min_units = 4, int max_units = 12) {
    for (;;) {
        std::uniform_int_distribution<int> n_dist(min_units, max_units);
        const int n = n_dist(rng);
        std::vector<std::string> words;
        bool has_consonant_start = false;
        for (int i = 0; i < n; ++i) {
            words.push_back(random_word(rng, 3, 4));
            if (!is_vowel(words.back().front())) has_consonant_start = true;
        }
        if (!has_consonant_start) continue;
        return join_units(words, true);
    }
}

}  // namespace

std::string transform_name(Transform t) { return meta_of(t).name; }
std::string transform_category(Transform t) { return meta_of(t).category; }

std::string apply_transform(Transform t, const std::string& input) {
    bool word_mode = false;
    std::vector<std::string> units = split_units(input, word_mode);
    const size_t n = units.size();
    switch (t) {
        case Transform::Reverse:
            std::reverse(units.begin(), units.end());
            break;
        case Transform::RotateRight1:
        case Transform::RotateRight2:
        case Transform::RotateRight3: {
            const size_t k = t == Transform::RotateRight1 ? 1
                             : t == Transform::RotateRight2 ? 2 : 3;
            if (n > 1) std::rotate(units.begin(), units.end() - (k % n), units.end());
            break;
        }
        case Transform::Duplicate: {
            auto copy = units;
            units.insert(units.end(), copy.begin(), copy.end());
            break;
        }
        case Transform::FirstHalf:
            units.resize((n + 1) / 2);
            break;
        case Transform::LastHalf:
            units.erase(units.begin(), units.begin() + static_cast<long>((n + 1) / 2));
            break;
        case Transform::SwapCase:
            for (auto& u : units)
                for (auto& c : u) {
                    const unsigned char uc = static_cast<unsigned char>(c);
                    c = std::islower(uc) ? static_cast<char>(std::toupper(uc))
                                         : static_cast<char>(std::tolower(uc));
                }
            break;
        case Transform::InterleaveMarker: {
            std::vector<std::string> out;
            for (size_t i = 0; i < n; ++i) {
                if (i) out.emplace_back("-");
                out.push_back(units[i]);
            }
            units = std::move(out);
            break;
        }
        case Transform::SortUnits:
            std::sort(units.begin(), units.end());
            break;
        case Transform::SortUnitsDesc:
            std::sort(units.begin(), units.end(), std::greater<>());
            break;
        case Transform::DropVowelStart: {
            std::vector<std::string> out;
            for (auto& u : units)
                if (u.empty() || !is_vowel(u.front())) out.push_back(u);
            units = std::move(out);
            break;
        }
    }
    return join_units(units, word_mode);
}

std::vector<std::string> synth_strong_categories() { return {"Sorting", "Filtering"}; }

std::vector<TaskSpec> synth_suite(uint64_t seed, int n_tasks, int instances_per_task) {
    if (n_tasks < 2) throw ConfigError("synth_suite: need at least 2 tasks");
    if (n_tasks > kTransformCount)
        throw ConfigError("synth_suite: only " + std::to_string(kTransformCount) +
                          " transform combinations available, requested " +
                          std::to_string(n_tasks));
    if (instances_per_task < 1) throw ConfigError("synth_suite: need at least 1 instance");

    std::vector<TaskSpec> tasks;
    for (int ti = 0; ti < n_tasks; ++ti) {
        const TransformMeta& m = kTransforms[ti];
        TaskSpec task;
        char idbuf[64];
        std::snprintf(idbuf, sizeof(idbuf), "synth_%02d_%s", ti, m.name);
        task.id = idbuf;
        task.categories = {m.category};
        task.short_description = m.short_desc;
        task.long_description = m.long_desc;
        task.language = "en";

        auto ex_rng = grad::make_rng(seed, 400 + static_cast<uint64_t>(ti));
        for (int e = 0; e < 2; ++e) {
            Example ex;
            ex.input = random_input(ex_rng, 3, 5);
            ex.output = apply_transform(m.t, ex.input);
            ex.explanation = "The rule of the task maps this input to this output.";
            task.positive_examples.push_back(std::move(ex));
        }

        auto in_rng = grad::make_rng(seed, 300 + static_cast<uint64_t>(ti));
        for (int i = 0; i < instances_per_task; ++i) {
            Instance inst;
            inst.input = random_input(in_rng);
            inst.references = {apply_transform(m.t, inst.input)};
            task.instances.push_back(std::move(inst));
        }
        tasks.push_back(std::move(task));
    }
    return tasks;
}

}  // namespace mtil::data
