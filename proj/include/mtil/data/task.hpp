#pragma once

#include <string>
#include <vector>

namespace mtil::data {

struct Example {
    std::string input;
    std::string output;
    std::string explanation;
};

struct Instance {
    std::string input;
    std::vector<std::string> references;  // non-empty
};

// One NIV2-style task: categories, descriptions, worked examples and the
// training/evaluation instances.
struct TaskSpec {
    std::string id;
    std::vector<std::string> categories;
    std::string short_description;
    std::string long_description;
    std::vector<Example> positive_examples;
    std::vector<Example> negative_examples;
    std::vector<Instance> instances;
    std::string language = "en";
};

// JSON task files use the NIV2 field names ("Definition", "Positive
// Examples", "Instances", ...). Loading validates the mandatory fields and
// the basic invariants (non-empty categories, at least one instance,
// non-empty reference lists).
TaskSpec load_task_json(const std::string& path);
TaskSpec parse_task_json(const std::string& text, const std::string& fallback_id);
std::string task_to_json(const TaskSpec& task);
void save_task_json(const TaskSpec& task, const std::string& path);

// Loads every *.json under a directory, sorted by filename.
std::vector<TaskSpec> load_task_dir(const std::string& dir);

}  // namespace mtil::data
