#include "mtil/train/episode.hpp"

#include <algorithm>
#include <numeric>

#include "mtil/grad/rng.hpp"

namespace mtil::train {

namespace {

uint64_t hash_str(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

TrainPool build_train_pool(const std::vector<data::TaskSpec>& tasks,
                           const data::SuiteSplits& splits, const TrainConfig& cfg) {
    TrainPool pool;
    for (const auto& id : splits.train_tasks) {
        const data::TaskSpec* task = nullptr;
        for (const auto& t : tasks)
            if (t.id == id) task = &t;
        if (!task) throw DataError("train pool: split references unknown task " + id);
        TrainPool::TaskEntry entry;
        entry.task = task;
        entry.instruction = data::compose_instruction(*task, cfg.instruction);
        entry.instance_pool = data::sample_instances(splits.instance_splits.at(id).train,
                                                     cfg.instance_cap,
                                                     cfg.seed ^ hash_str(id));
        std::sort(entry.instance_pool.begin(), entry.instance_pool.end());
        if (!entry.instance_pool.empty()) pool.tasks.push_back(std::move(entry));
    }
    if (pool.tasks.empty()) throw DataError("train pool: no training instances available");
    return pool;
}

TaskBatch sample_task_batch(const TrainPool::TaskEntry& entry, int batch_size,
                            std::mt19937_64& rng) {
    TaskBatch batch;
    batch.task = entry.task;
    batch.instruction = entry.instruction;
    std::vector<int> idx = entry.instance_pool;
    std::shuffle(idx.begin(), idx.end(), rng);
    const int n = std::min<int>(batch_size, static_cast<int>(idx.size()));
    for (int i = 0; i < n; ++i)
        batch.instances.push_back(&entry.task->instances[static_cast<size_t>(idx[i])]);
    return batch;
}

EpisodeBatch sample_episode(const TrainPool& pool, const TrainConfig& cfg,
                            std::mt19937_64& rng) {
    const int k = cfg.tasks_per_meta_step;
    if (static_cast<int>(pool.tasks.size()) < 2 * k)
        throw ConfigError("sample_episode: need at least " + std::to_string(2 * k) +
                          " train tasks, have " + std::to_string(pool.tasks.size()));

    // uniform without replacement; support and target tasks stay disjoint
    std::vector<size_t> order(pool.tasks.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    EpisodeBatch ep;
    for (int i = 0; i < k; ++i)
        ep.support.push_back(sample_task_batch(pool.tasks[order[i]], cfg.inner_batch, rng));
    for (int i = k; i < 2 * k; ++i)
        ep.target.push_back(sample_task_batch(pool.tasks[order[i]], cfg.inner_batch, rng));
    return ep;
}

}  // namespace mtil::train
