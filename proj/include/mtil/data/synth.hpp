#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtil/data/task.hpp"

namespace mtil::data {

// String-transformation transforms for the synthetic suite. A transform
// acts on a sequence of units: space-separated words when the input
// contains spaces, individual characters otherwise.
enum class Transform {
    Reverse,
    RotateRight1,
    Duplicate,
    FirstHalf,
    SwapCase,
    InterleaveMarker,
    SortUnits,
    DropVowelStart,
    RotateRight2,
    RotateRight3,
    SortUnitsDesc,
    LastHalf,
};

constexpr int kTransformCount = 12;

std::string transform_name(Transform t);
std::string transform_category(Transform t);
std::string apply_transform(Transform t, const std::string& input);

// Synthetic task suite for desk-scale experiments. Every task draws inputs
// from the same distribution (sequences of random lowercase words), so the
// instruction is the only signal identifying the task. The first eight
// transforms cover six training families plus the Sorting and Filtering
// families intended as a held-out strong set.
std::vector<TaskSpec> synth_suite(uint64_t seed, int n_tasks, int instances_per_task);

// Category names for the synthetic held-out families.
std::vector<std::string> synth_strong_categories();

}  // namespace mtil::data
