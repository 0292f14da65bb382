#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mtil/data/instruction.hpp"
#include "mtil/data/splits.hpp"
#include "mtil/data/task.hpp"
#include "mtil/train/train_config.hpp"

namespace mtil::train {

// Training data pool: the train tasks, their capped per-task instance
// pools, and the pre-composed instruction text for the active variant.
struct TrainPool {
    struct TaskEntry {
        const data::TaskSpec* task = nullptr;
        std::string instruction;
        std::vector<int> instance_pool;  // indices into task->instances
    };
    std::vector<TaskEntry> tasks;

    int64_t total_instances() const {
        int64_t n = 0;
        for (const auto& t : tasks) n += static_cast<int64_t>(t.instance_pool.size());
        return n;
    }
};

// Builds the pool from the train split: per task, up to `instance_cap`
// training instances sampled without replacement (seeded).
TrainPool build_train_pool(const std::vector<data::TaskSpec>& tasks,
                           const data::SuiteSplits& splits, const TrainConfig& cfg);

// One mini-batch drawn from a single task.
struct TaskBatch {
    const data::TaskSpec* task = nullptr;
    std::string instruction;
    std::vector<const data::Instance*> instances;
};

// Support/target episode: 2K distinct tasks sampled uniformly without
// replacement, each contributing one same-task mini-batch.
struct EpisodeBatch {
    std::vector<TaskBatch> support;
    std::vector<TaskBatch> target;
};

TaskBatch sample_task_batch(const TrainPool::TaskEntry& entry, int batch_size,
                            std::mt19937_64& rng);

EpisodeBatch sample_episode(const TrainPool& pool, const TrainConfig& cfg,
                            std::mt19937_64& rng);

}  // namespace mtil::train
