#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mtil::evalkit {

struct TaskScore {
    std::string task_id;
    std::vector<std::string> categories;
    int n_instances = 0;
    double rouge2_f = 0.0;
    double rougeL_f = 0.0;
};

struct EvalReport {
    std::string instruction_variant;
    std::vector<TaskScore> tasks;

    double mean_rouge2_f() const;
    double mean_rougeL_f() const;
    const TaskScore* find(const std::string& task_id) const;
};

// Tab-separated, line-delimited report files with a '#' header recording
// the scoring tokenization and instruction variant.
void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

struct DifficultyBin {
    std::string label;  // "hard" | "medium" | "easy"
    std::vector<std::string> task_ids;
};

// Sorts by baseline ROUGE-2F ascending (ties by task id) and splits into
// thirds: hard first, then medium, then easy. Remainder tasks go to the
// earlier bins, so sizes differ by at most one.
std::vector<DifficultyBin> bin_by_difficulty(const EvalReport& baseline);

// 100 * (value - baseline) / baseline; nullopt when the baseline is not
// positive (rendered as "n/a", never silently 0).
std::optional<double> pct_change(double baseline, double value);

}  // namespace mtil::evalkit
