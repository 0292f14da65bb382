#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "mtil/data/filter.hpp"
#include "mtil/data/instruction.hpp"
#include "mtil/data/splits.hpp"
#include "mtil/data/synth.hpp"
#include "mtil/data/task.hpp"
#include "mtil/error.hpp"
#include "mtil/model/tokenizer.hpp"

using namespace mtil;
using namespace mtil::data;

namespace {

TaskSpec tiny_task() {
    TaskSpec t;
    t.id = "t0";
    t.categories = {"A", "B", "C"};
    t.short_description = "Short.";
    t.long_description = "Long description.";
    t.positive_examples = {{"in0", "out0", "why"}, {"in1", "out1", ""}};
    t.negative_examples = {{"nin", "nout", ""}};
    t.instances = {{"x0", {"y0"}}, {"x1", {"y1a", "y1b"}}};
    return t;
}

}  // namespace

TEST_CASE("task json round trip") {
    auto t = tiny_task();
    auto parsed = parse_task_json(task_to_json(t), "fallback");
    CHECK(parsed.id == "t0");
    CHECK(parsed.categories.size() == 3);
    CHECK(parsed.instances.size() == 2);
    CHECK(parsed.instances[1].references.size() == 2);
    CHECK(parsed.positive_examples[0].explanation == "why");
    // idempotent: serialize(parse(serialize(t))) == serialize(t)
    CHECK(task_to_json(parsed) == task_to_json(t));
}

TEST_CASE("task json missing mandatory field names the field") {
    const char* text = R"({"Definition": "d", "Categories": ["c"],
        "Positive Examples": [], "Negative Examples": []})";
    try {
        parse_task_json(text, "x");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("Instances") != std::string::npos);
    }
}

TEST_CASE("task json rejects non-list instances") {
    const char* text = R"({"Definition": "d", "Categories": ["c"],
        "Positive Examples": [], "Negative Examples": [], "Instances": 5})";
    CHECK_THROWS_AS(parse_task_json(text, "x"), DataError);
}

TEST_CASE("compose_instruction variants") {
    auto t = tiny_task();
    CHECK(compose_instruction(t, InstructionVariant::None) == "Short.");
    const auto desc = compose_instruction(t, InstructionVariant::Desc);
    CHECK(desc == "Definition: Long description.");
    const auto posex = compose_instruction(t, InstructionVariant::PosEx);
    CHECK(posex.find("Short.") == 0);
    CHECK(posex.find("Positive Example:") != std::string::npos);
    CHECK(posex.find("Input: in0") != std::string::npos);
    CHECK(posex.find("Output: out0") != std::string::npos);
    CHECK(posex.find("in1") == std::string::npos);  // exactly one example block
    const auto both = compose_instruction(t, InstructionVariant::DescPosEx);
    CHECK(both.find("Long description.") != std::string::npos);
    CHECK(both.find("Positive Example:") != std::string::npos);
    // determinism
    CHECK(compose_instruction(t, InstructionVariant::DescPosEx) == both);
}

TEST_CASE("compose_instruction PosEx without examples is a data error") {
    auto t = tiny_task();
    t.positive_examples.clear();
    CHECK_THROWS_AS(compose_instruction(t, InstructionVariant::PosEx), DataError);
    CHECK(compose_instruction(t, InstructionVariant::None) == "Short.");
}

TEST_CASE("build_encoder_text and decoder prefix") {
    CHECK(build_encoder_text("INSTR", "INPUT") ==
          "INSTR\nNow complete the following.\nINPUT");
    // empty instruction degenerates to separator + input
    CHECK(build_encoder_text("", "INPUT") == "\nNow complete the following.\nINPUT");
    // instruction precedes input
    const auto text = build_encoder_text("alpha", "omega");
    CHECK(text.find("alpha") < text.find("omega"));

    model::ByteTokenizer tok;
    CHECK(tok.decode(tok.encode(decoder_prefix())) == "[Output]:");
}

TEST_CASE("instruction variant names round trip") {
    for (auto v : {InstructionVariant::None, InstructionVariant::Desc,
                   InstructionVariant::PosEx, InstructionVariant::DescPosEx})
        CHECK(parse_instruction_variant(instruction_variant_name(v)) == v);
    CHECK_THROWS_AS(parse_instruction_variant("bogus"), ConfigError);
}

TEST_CASE("prefilter boundary and config independence") {
    model::ByteTokenizer tok;
    TaskSpec t = tiny_task();
    t.instances.clear();
    // craft an instance whose DescPosEx encoder text hits the limit exactly
    const std::string instr = compose_instruction(t, InstructionVariant::DescPosEx);
    const int64_t base = encoder_token_length(tok, build_encoder_text(instr, ""));
    const int64_t limit = base + 10;
    t.instances.push_back({std::string(10, 'a'), {"r"}});   // exactly at limit
    t.instances.push_back({std::string(11, 'a'), {"r"}});   // one over
    t.instances.push_back({"ok", {std::string(500, 'b')}});  // decoder too long

    FilterLimits limits{limit, 32};
    auto kept = prefilter_instances({t}, tok, limits);
    REQUIRE(kept.size() == 1);
    REQUIRE(kept[0].instances.size() == 1);
    CHECK(kept[0].instances[0].input == std::string(10, 'a'));

    // a task whose instances all fail is dropped
    TaskSpec gone = tiny_task();
    gone.id = "gone";
    gone.instances = {{std::string(600, 'z'), {"r"}}};
    auto kept2 = prefilter_instances({t, gone}, tok, limits);
    CHECK(kept2.size() == 1);
}

TEST_CASE("prefilter survival is identical across instruction configs") {
    model::ByteTokenizer tok;
    auto tasks = synth_suite(5, 8, 30);
    FilterLimits limits{200, 64};  // tight enough to drop some instances
    auto surviving = prefilter_instances(tasks, tok, limits);
    // the filter keys off DescPosEx only; shorter configs must still fit
    for (const auto& task : surviving) {
        for (const auto& variant : {InstructionVariant::None, InstructionVariant::Desc,
                                    InstructionVariant::PosEx, InstructionVariant::DescPosEx}) {
            const std::string instr = compose_instruction(task, variant);
            for (const auto& inst : task.instances) {
                CHECK(encoder_token_length(tok, build_encoder_text(instr, inst.input)) <=
                      limits.enc_limit);
            }
        }
    }
    // and a second pass with any other config keeps the same instance set
    auto again = prefilter_instances(surviving, tok, limits);
    REQUIRE(again.size() == surviving.size());
    for (size_t i = 0; i < again.size(); ++i)
        CHECK(again[i].instances.size() == surviving[i].instances.size());
}

TEST_CASE("make_splits partitions tasks and excludes strong categories") {
    auto tasks = synth_suite(9, 10, 12);
    SplitSpec spec;
    spec.seed = 3;
    spec.task_holdout_frac = 0.25;
    spec.strong_categories = synth_strong_categories();
    auto splits = make_splits(tasks, spec);

    std::set<std::string> all;
    for (const auto& id : splits.train_tasks) all.insert(id);
    for (const auto& id : splits.weak_eval_tasks) all.insert(id);
    for (const auto& id : splits.strong_eval_tasks) all.insert(id);
    CHECK(all.size() == tasks.size());
    CHECK(splits.train_tasks.size() + splits.weak_eval_tasks.size() +
              splits.strong_eval_tasks.size() ==
          tasks.size());

    // strong categories never appear in train or weak sets
    std::set<std::string> strong(spec.strong_categories.begin(), spec.strong_categories.end());
    auto categories_of = [&](const std::string& id) {
        for (const auto& t : tasks)
            if (t.id == id) return t.categories;
        return std::vector<std::string>{};
    };
    for (const auto& id : splits.train_tasks)
        for (const auto& c : categories_of(id)) CHECK_FALSE(strong.count(c));
    for (const auto& id : splits.weak_eval_tasks)
        for (const auto& c : categories_of(id)) CHECK_FALSE(strong.count(c));

    // determinism
    auto splits2 = make_splits(tasks, spec);
    CHECK(splits2.train_tasks == splits.train_tasks);
    CHECK(splits2.weak_eval_tasks == splits.weak_eval_tasks);
    CHECK(splits2.strong_eval_tasks == splits.strong_eval_tasks);
    for (const auto& [id, s] : splits.instance_splits) {
        CHECK(splits2.instance_splits.at(id).train == s.train);
        CHECK(splits2.instance_splits.at(id).eval == s.eval);
    }

    // instance split fractions: 12 instances -> 9/1/2
    const auto& is = splits.instance_splits.at(tasks[0].id);
    CHECK(is.train.size() == 9);
    CHECK(is.val.size() == 1);
    CHECK(is.eval.size() == 2);
    std::set<int> seen(is.train.begin(), is.train.end());
    seen.insert(is.val.begin(), is.val.end());
    seen.insert(is.eval.begin(), is.eval.end());
    CHECK(seen.size() == 12);
}

TEST_CASE("make_splits with everything excluded is a configuration error") {
    auto tasks = synth_suite(2, 2, 4);
    SplitSpec spec;
    spec.strong_categories = {"Reordering"};
    // both tasks are Reordering for n_tasks=2
    CHECK_THROWS_AS(make_splits(tasks, spec), ConfigError);
}

TEST_CASE("sample_train_instances caps and reproduces") {
    TaskSpec small = tiny_task();
    auto s = sample_train_instances(small, 100, 17);
    CHECK(s.size() == 2);

    TaskSpec big = tiny_task();
    big.instances.assign(500, {"x", {"y"}});
    auto b1 = sample_train_instances(big, 100, 17);
    auto b2 = sample_train_instances(big, 100, 17);
    CHECK(b1.size() == 100);
    CHECK(b1 == b2);
    std::set<int> uniq(b1.begin(), b1.end());
    CHECK(uniq.size() == 100);  // without replacement
    CHECK_THROWS_AS(sample_train_instances(big, 0, 17), ConfigError);
}

TEST_CASE("transform definitions") {
    CHECK(apply_transform(Transform::Reverse, "abcd") == "dcba");
    CHECK(apply_transform(Transform::RotateRight1, "abcd") == "dabc");
    CHECK(apply_transform(Transform::RotateRight2, "abcd") == "cdab");
    CHECK(apply_transform(Transform::Duplicate, "abcd") == "abcdabcd");
    CHECK(apply_transform(Transform::FirstHalf, "abcde") == "abc");
    CHECK(apply_transform(Transform::LastHalf, "abcde") == "de");
    CHECK(apply_transform(Transform::SwapCase, "aBcD") == "AbCd");
    CHECK(apply_transform(Transform::InterleaveMarker, "abc") == "a-b-c");
    CHECK(apply_transform(Transform::SortUnits, "dcba") == "abcd");
    CHECK(apply_transform(Transform::DropVowelStart, "abcde") == "bcd");

    // word mode: units are space-separated words
    CHECK(apply_transform(Transform::Reverse, "aa bb cc") == "cc bb aa");
    CHECK(apply_transform(Transform::RotateRight1, "aa bb cc") == "cc aa bb");
    CHECK(apply_transform(Transform::SortUnits, "cc aa bb") == "aa bb cc");
    CHECK(apply_transform(Transform::DropVowelStart, "ax bx ex cx") == "bx cx");
    CHECK(apply_transform(Transform::Duplicate, "aa bb") == "aa bb aa bb");
    CHECK(apply_transform(Transform::InterleaveMarker, "aa bb") == "aa - bb");
}

TEST_CASE("synth_suite determinism and structure") {
    auto a = synth_suite(11, 8, 20);
    auto b = synth_suite(11, 8, 20);
    REQUIRE(a.size() == 8);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(task_to_json(a[i]) == task_to_json(b[i]));
        CHECK(a[i].instances.size() == 20);
        CHECK(a[i].positive_examples.size() == 2);
        CHECK_FALSE(a[i].categories.empty());
        CHECK_FALSE(a[i].short_description.empty());
        CHECK_FALSE(a[i].long_description.empty());
    }
    // held-out families present among the 8 default tasks
    std::set<std::string> cats;
    for (const auto& t : a) cats.insert(t.categories[0]);
    for (const auto& c : synth_strong_categories()) CHECK(cats.count(c));

    CHECK_THROWS_AS(synth_suite(11, 100, 5), ConfigError);
    CHECK_THROWS_AS(synth_suite(11, 1, 5), ConfigError);
}

TEST_CASE("synthetic tasks share no input->output mapping across transforms") {
    auto tasks = synth_suite(13, 8, 25);
    for (size_t i = 0; i < tasks.size(); ++i) {
        std::set<std::pair<std::string, std::string>> mapping;
        for (const auto& inst : tasks[i].instances)
            mapping.emplace(inst.input, inst.references[0]);
        for (size_t j = 0; j < tasks.size(); ++j) {
            if (i == j) continue;
            for (const auto& inst : tasks[j].instances)
                CHECK_FALSE(mapping.count({inst.input, inst.references[0]}));
        }
    }
}

TEST_CASE("for any two transforms there is an input distinguishing them") {
    auto tasks = synth_suite(29, 8, 40);
    for (size_t i = 0; i < tasks.size(); ++i) {
        for (size_t j = i + 1; j < tasks.size(); ++j) {
            bool differ = false;
            for (const auto& inst : tasks[i].instances) {
                const auto oi = apply_transform(static_cast<Transform>(i), inst.input);
                const auto oj = apply_transform(static_cast<Transform>(j), inst.input);
                if (oi != oj) {
                    differ = true;
                    break;
                }
            }
            CHECK(differ);
        }
    }
}

TEST_CASE("synthetic tasks load through the task json path") {
    namespace fs = std::filesystem;
    auto tasks = synth_suite(31, 4, 6);
    const auto dir = fs::temp_directory_path() / "mtil_synth_test";
    fs::create_directories(dir);
    for (const auto& t : tasks) save_task_json(t, (dir / (t.id + ".json")).string());
    auto loaded = load_task_dir(dir.string());
    REQUIRE(loaded.size() == 4);
    for (size_t i = 0; i < 4; ++i) CHECK(task_to_json(loaded[i]) == task_to_json(tasks[i]));
    fs::remove_all(dir);
}
