#include "mtil/data/task.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtil/error.hpp"

namespace mtil::data {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const json& require_field(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end())
        throw DataError(std::string("task json: missing mandatory field \"") + field + "\"");
    return *it;
}

std::vector<Example> parse_examples(const json& arr, const char* field) {
    if (!arr.is_array())
        throw DataError(std::string("task json: field \"") + field + "\" must be a list");
    std::vector<Example> out;
    for (const auto& e : arr) {
        Example ex;
        ex.input = e.value("input", "");
        ex.output = e.value("output", "");
        ex.explanation = e.value("explanation", "");
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace

TaskSpec parse_task_json(const std::string& text, const std::string& fallback_id) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("task json: parse failure: ") + e.what());
    }
    if (!j.is_object()) throw DataError("task json: top level must be an object");

    TaskSpec task;
    task.id = j.value("Id", fallback_id);
    task.language = j.value("Language", std::string("en"));
    task.short_description = j.value("Short Description", std::string());
    task.long_description = require_field(j, "Definition").get<std::string>();

    const json& cats = require_field(j, "Categories");
    if (!cats.is_array()) throw DataError("task json: field \"Categories\" must be a list");
    for (const auto& c : cats) task.categories.push_back(c.get<std::string>());
    if (task.categories.empty()) throw DataError("task json: \"Categories\" must be non-empty");

    task.positive_examples = parse_examples(require_field(j, "Positive Examples"),
                                            "Positive Examples");
    task.negative_examples = parse_examples(require_field(j, "Negative Examples"),
                                            "Negative Examples");

    const json& insts = require_field(j, "Instances");
    if (!insts.is_array()) throw DataError("task json: field \"Instances\" must be a list");
    for (const auto& inst : insts) {
        Instance in;
        in.input = require_field(inst, "input").get<std::string>();
        const json& out = require_field(inst, "output");
        if (out.is_string()) {
            in.references.push_back(out.get<std::string>());
        } else if (out.is_array()) {
            for (const auto& r : out) in.references.push_back(r.get<std::string>());
        } else {
            throw DataError("task json: instance \"output\" must be string or list");
        }
        if (in.references.empty())
            throw DataError("task json: instance has empty reference list in " + task.id);
        task.instances.push_back(std::move(in));
    }
    if (task.instances.empty())
        throw DataError("task json: task " + task.id + " has no instances");
    return task;
}

TaskSpec load_task_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("task json: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_task_json(ss.str(), fs::path(path).stem().string());
}

std::string task_to_json(const TaskSpec& task) {
    json j;
    j["Id"] = task.id;
    j["Language"] = task.language;
    j["Short Description"] = task.short_description;
    j["Definition"] = task.long_description;
    j["Categories"] = task.categories;
    auto dump_examples = [](const std::vector<Example>& exs) {
        json arr = json::array();
        for (const auto& e : exs)
            arr.push_back({{"input", e.input}, {"output", e.output},
                           {"explanation", e.explanation}});
        return arr;
    };
    j["Positive Examples"] = dump_examples(task.positive_examples);
    j["Negative Examples"] = dump_examples(task.negative_examples);
    json insts = json::array();
    for (const auto& in : task.instances)
        insts.push_back({{"input", in.input}, {"output", in.references}});
    j["Instances"] = insts;
    return j.dump(2) + "\n";
}

void save_task_json(const TaskSpec& task, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("task json: cannot write " + path);
    os << task_to_json(task);
    if (!os) throw IoError("task json: write failed for " + path);
}

std::vector<TaskSpec> load_task_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("task dir: not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json")
            files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    std::vector<TaskSpec> tasks;
    for (const auto& f : files) tasks.push_back(load_task_json(f));
    return tasks;
}

}  // namespace mtil::data
