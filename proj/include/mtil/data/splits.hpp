#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtil/data/task.hpp"

namespace mtil::data {

struct SplitSpec {
    double train_frac = 0.80;
    double val_frac = 0.10;
    double eval_frac = 0.10;
    // Fraction of tasks held out as the weak generalization set.
    double task_holdout_frac = 0.10;
    // Tasks whose categories intersect this set form the strong
    // generalization set and are removed from every training pool.
    std::vector<std::string> strong_categories = {"Summarization", "Title Generation"};
    uint64_t seed = 0;
};

struct InstanceSplit {
    std::vector<int> train, val, eval;  // instance indices
};

struct SuiteSplits {
    std::vector<std::string> train_tasks;
    std::vector<std::string> weak_eval_tasks;
    std::vector<std::string> strong_eval_tasks;
    std::map<std::string, InstanceSplit> instance_splits;
};

// Task-level and instance-level splits, deterministic given the seed.
SuiteSplits make_splits(const std::vector<TaskSpec>& tasks, const SplitSpec& spec);

// Uniform sample without replacement of min(cap, available) instance
// indices out of `pool`, seeded.
std::vector<int> sample_instances(const std::vector<int>& pool, int cap, uint64_t seed);

// Convenience over a whole task (the training-time 100-instance cap).
std::vector<int> sample_train_instances(const TaskSpec& task, int cap, uint64_t seed);

// Split manifest: one line per task "<task_id>\t<split>\t<seed>".
void save_split_manifest(const SuiteSplits& splits, uint64_t seed, const std::string& path);

}  // namespace mtil::data
