#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mtil/data/instruction.hpp"
#include "mtil/data/task.hpp"
#include "mtil/evalkit/report.hpp"
#include "mtil/evalkit/rouge.hpp"
#include "mtil/train/steps.hpp"

namespace mtil::evalkit {

// One evaluation unit: a task plus the instance indices to score.
struct EvalItem {
    const data::TaskSpec* task = nullptr;
    std::vector<int> instance_indices;
};

// Builds items from a task list using the eval split (or every instance
// for tasks without a recorded split).
inline std::vector<EvalItem> make_eval_items(const std::vector<data::TaskSpec>& tasks,
                                             const std::vector<std::string>& task_ids,
                                             const data::SuiteSplits* splits) {
    std::vector<EvalItem> items;
    for (const auto& id : task_ids) {
        const data::TaskSpec* task = nullptr;
        for (const auto& t : tasks)
            if (t.id == id) task = &t;
        if (!task) throw DataError("evaluate: unknown task id " + id);
        EvalItem item;
        item.task = task;
        if (splits && splits->instance_splits.count(id)) {
            item.instance_indices = splits->instance_splits.at(id).eval;
        } else {
            item.instance_indices.resize(task->instances.size());
            for (size_t i = 0; i < task->instances.size(); ++i)
                item.instance_indices[i] = static_cast<int>(i);
        }
        items.push_back(std::move(item));
    }
    return items;
}

namespace detail {

inline std::string escape_field(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            case '\\': out += "\\\\"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace detail

// Core evaluation loop over an injectable decoder; the production decoder
// is supplied by evaluate() below. Per task: up to `cap` instances, score =
// mean over instances of the max-over-references score.
inline EvalReport evaluate_with(
    const std::function<std::string(const data::TaskSpec&, const std::string& instruction,
                                    const data::Instance&)>& decode_fn,
    const std::vector<EvalItem>& items, data::InstructionVariant variant, int cap = 100,
    std::ostream* dump = nullptr) {
    EvalReport report;
    report.instruction_variant = data::instruction_variant_name(variant);
    for (const auto& item : items) {
        const std::string instruction = data::compose_instruction(*item.task, variant);
        TaskScore score;
        score.task_id = item.task->id;
        score.categories = item.task->categories;
        double sum2 = 0, sumL = 0;
        int n = 0;
        for (int idx : item.instance_indices) {
            if (n >= cap) break;
            const data::Instance& inst = item.task->instances[static_cast<size_t>(idx)];
            const std::string pred = decode_fn(*item.task, instruction, inst);
            const double r2 = rouge_n_f(pred, inst.references, 2);
            const double rl = rouge_l(pred, inst.references);
            sum2 += r2;
            sumL += rl;
            ++n;
            if (dump) {
                // best reference under the bigram score
                size_t best = 0;
                double best_score = -1;
                for (size_t r = 0; r < inst.references.size(); ++r) {
                    const double s = rouge_n_f(pred, {inst.references[r]}, 2);
                    if (s > best_score) {
                        best_score = s;
                        best = r;
                    }
                }
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%016llx",
                              static_cast<unsigned long long>(detail::fnv1a(inst.input)));
                (*dump) << "inst\t" << item.task->id << "\t" << buf << "\t"
                        << detail::escape_field(pred) << "\t"
                        << detail::escape_field(inst.references[best]) << "\t" << r2 << "\t"
                        << rl << "\n";
            }
        }
        score.n_instances = n;
        score.rouge2_f = n ? sum2 / n : 0.0;
        score.rougeL_f = n ? sumL / n : 0.0;
        report.tasks.push_back(std::move(score));
    }
    return report;
}

// Zero-shot evaluation of a model bundle: hypernetwork bundles adapt once
// per task from the instruction, then every instance is decoded greedily
// with the output prefix. No parameter updates happen anywhere.
template <typename S>
EvalReport evaluate(const train::ModelBundle<S>& bundle, const std::vector<EvalItem>& items,
                    data::InstructionVariant variant, int cap = 100,
                    std::ostream* dump = nullptr) {
    grad::NoGradGuard ng;
    const auto prefix_ids = bundle.tok.encode(data::decoder_prefix());
    const int64_t max_len = bundle.cfg.max_decoder_positions - 1;

    // one adaptation per task, reused across its instances
    std::map<std::string, model::ParamView<S>> adapted;
    auto view_for = [&](const data::TaskSpec& task,
                        const std::string& instruction) -> const model::ParamView<S>& {
        auto it = adapted.find(task.id);
        if (it == adapted.end()) {
            auto view = bundle.has_hnet
                            ? hnet::task_adapt(bundle.h, bundle.reg, bundle.tok, instruction)
                            : bundle.view();
            it = adapted.emplace(task.id, std::move(view)).first;
        }
        return it->second;
    };

    auto decode_fn = [&](const data::TaskSpec& task, const std::string& instruction,
                         const data::Instance& inst) {
        const auto& view = view_for(task, instruction);
        const auto src = model::encode_encoder_text(
            bundle.tok, data::build_encoder_text(instruction, inst.input));
        auto ids = model::greedy_decode_ids(bundle.cfg, view, "main.", src, prefix_ids,
                                            max_len);
        return bundle.tok.decode(ids);
    };
    return evaluate_with(decode_fn, items, variant, cap, dump);
}

}  // namespace mtil::evalkit
