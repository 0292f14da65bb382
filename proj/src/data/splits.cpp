#include "mtil/data/splits.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "mtil/error.hpp"
#include "mtil/grad/rng.hpp"

namespace mtil::data {

namespace {

uint64_t hash_str(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

SuiteSplits make_splits(const std::vector<TaskSpec>& tasks, const SplitSpec& spec) {
    if (std::abs(spec.train_frac + spec.val_frac + spec.eval_frac - 1.0) > 1e-9)
        throw ConfigError("make_splits: instance fractions must sum to 1");

    const std::set<std::string> strong_cats(spec.strong_categories.begin(),
                                            spec.strong_categories.end());
    SuiteSplits out;
    std::vector<std::string> remaining;
    for (const TaskSpec& t : tasks) {
        if (t.categories.empty()) throw ConfigError("make_splits: task without categories");
        bool strong = false;
        for (const auto& c : t.categories)
            if (strong_cats.count(c)) strong = true;
        if (strong)
            out.strong_eval_tasks.push_back(t.id);
        else
            remaining.push_back(t.id);
    }
    if (remaining.empty())
        throw ConfigError("make_splits: no tasks left after removing strong categories");

    std::sort(remaining.begin(), remaining.end());
    auto rng = grad::make_rng(spec.seed, 101);
    std::shuffle(remaining.begin(), remaining.end(), rng);
    const size_t n_weak =
        static_cast<size_t>(spec.task_holdout_frac * static_cast<double>(remaining.size()));
    out.weak_eval_tasks.assign(remaining.begin(), remaining.begin() + n_weak);
    out.train_tasks.assign(remaining.begin() + n_weak, remaining.end());
    std::sort(out.weak_eval_tasks.begin(), out.weak_eval_tasks.end());
    std::sort(out.train_tasks.begin(), out.train_tasks.end());
    std::sort(out.strong_eval_tasks.begin(), out.strong_eval_tasks.end());

    for (const TaskSpec& t : tasks) {
        const int n = static_cast<int>(t.instances.size());
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        auto irng = grad::make_rng(spec.seed, hash_str(t.id));
        std::shuffle(idx.begin(), idx.end(), irng);
        const int n_train = static_cast<int>(spec.train_frac * n);
        const int n_val = static_cast<int>(spec.val_frac * n);
        InstanceSplit split;
        split.train.assign(idx.begin(), idx.begin() + n_train);
        split.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
        split.eval.assign(idx.begin() + n_train + n_val, idx.end());
        out.instance_splits.emplace(t.id, std::move(split));
    }
    return out;
}

std::vector<int> sample_instances(const std::vector<int>& pool, int cap, uint64_t seed) {
    if (cap <= 0) throw ConfigError("sample_instances: cap must be positive");
    std::vector<int> idx = pool;
    auto rng = grad::make_rng(seed, 202);
    std::shuffle(idx.begin(), idx.end(), rng);
    if (static_cast<int>(idx.size()) > cap) idx.resize(cap);
    return idx;
}

std::vector<int> sample_train_instances(const TaskSpec& task, int cap, uint64_t seed) {
    std::vector<int> pool(task.instances.size());
    std::iota(pool.begin(), pool.end(), 0);
    return sample_instances(pool, cap, seed ^ hash_str(task.id));
}

void save_split_manifest(const SuiteSplits& splits, uint64_t seed, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("split manifest: cannot write " + path);
    auto emit = [&](const std::vector<std::string>& ids, const char* name) {
        for (const auto& id : ids) os << id << "\t" << name << "\t" << seed << "\n";
    };
    emit(splits.train_tasks, "train");
    emit(splits.weak_eval_tasks, "weak_eval");
    emit(splits.strong_eval_tasks, "strong_eval");
    if (!os) throw IoError("split manifest: write failed for " + path);
}

}  // namespace mtil::data
