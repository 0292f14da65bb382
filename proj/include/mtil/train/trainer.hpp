#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "mtil/data/filter.hpp"
#include "mtil/grad/checkpoint.hpp"
#include "mtil/train/steps.hpp"

namespace mtil::train {

// Drives one training run: epoch loops for the four methods, per-step
// metric logging, per-epoch checkpoints and validation loss. Every random
// choice is drawn from per-epoch streams derived from (seed, epoch), so a
// run is reproducible and a resume from an epoch checkpoint continues the
// exact trajectory.
template <typename S>
class Trainer {
  public:
    struct Setup {
        TrainConfig tcfg;
        model::ModelConfig mcfg;
        hnet::HnetConfig hcfg;
        const std::vector<data::TaskSpec>* tasks = nullptr;  // prefiltered
        data::SuiteSplits splits;
        std::string metrics_path;  // empty: no metrics log
        std::string ckpt_root;     // empty: no checkpoints
    };

    explicit Trainer(Setup setup)
        : s_(std::move(setup)),
          bundle_(make_bundle<S>(s_.mcfg, method_uses_hnet(s_.tcfg.method), s_.hcfg,
                                 s_.tcfg.seed)),
          main_opt_(grad::Optimizer<S>::adam(S(s_.tcfg.outer_lr))),
          hnet_opt_(grad::Optimizer<S>::adam(S(s_.tcfg.outer_lr))) {
        s_.tcfg.validate();
        if (!s_.tasks) throw ContractError("Trainer: no tasks");
        main_opt_.set_prefix_filter("main.");
        hnet_opt_.set_prefix_filter("hnet");
        pool_ = build_train_pool(*s_.tasks, s_.splits, s_.tcfg);
    }

    ModelBundle<S>& bundle() { return bundle_; }
    const ModelBundle<S>& bundle() const { return bundle_; }
    int64_t global_update() const { return global_update_; }
    const TrainPool& pool() const { return pool_; }

    // Continues from the newest epoch checkpoint under ckpt_root, if any.
    // Returns the epoch training will resume at.
    int resume() {
        namespace fs = std::filesystem;
        int latest = -1;
        if (!s_.ckpt_root.empty() && fs::is_directory(s_.ckpt_root)) {
            for (const auto& e : fs::directory_iterator(s_.ckpt_root)) {
                const std::string name = e.path().filename().string();
                int epoch = -1;
                if (std::sscanf(name.c_str(), "epoch_%d", &epoch) == 1)
                    latest = std::max(latest, epoch);
            }
        }
        if (latest < 0) return 0;
        load_state(checkpoint_dir(latest));
        start_epoch_ = latest + 1;
        return start_epoch_;
    }

    void run() {
        if (!s_.metrics_path.empty())
            log_.open(s_.metrics_path, start_epoch_ == 0 ? std::ios::trunc : std::ios::app);
        if (log_ && start_epoch_ == 0) log_ << "# mtil-metrics v1\n";
        for (int epoch = start_epoch_; epoch < s_.tcfg.epochs; ++epoch) {
            run_epoch(epoch);
            const double val = validation_loss();
            if (log_) {
                char buf[128];
                std::snprintf(buf, sizeof(buf), "val\t%d\t%.6f\n", epoch, val);
                log_ << buf << std::flush;
            }
            if (!s_.ckpt_root.empty()) save_state(epoch);
        }
    }

    // Mean teacher-forced loss over the validation instances of the train
    // tasks (the hypernetwork methods adapt per task first).
    double validation_loss() {
        grad::NoGradGuard ng;
        double total = 0;
        int64_t count = 0;
        for (const auto& entry : pool_.tasks) {
            const auto& split = s_.splits.instance_splits.at(entry.task->id);
            if (split.val.empty()) continue;
            TaskBatch tb;
            tb.task = entry.task;
            tb.instruction = entry.instruction;
            for (int idx : split.val)
                tb.instances.push_back(&entry.task->instances[static_cast<size_t>(idx)]);
            const auto batch = build_batch(bundle_, tb);
            model::ParamView<S> view =
                bundle_.has_hnet
                    ? hnet::task_adapt(bundle_.h, bundle_.reg, bundle_.tok, tb.instruction)
                    : bundle_.view();
            total += double(model::seq2seq_loss(bundle_.cfg, view, "main.", batch).item()) *
                     double(tb.instances.size());
            count += static_cast<int64_t>(tb.instances.size());
        }
        return count ? total / double(count) : 0.0;
    }

    std::string checkpoint_dir(int epoch) const {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "epoch_%03d", epoch);
        return (std::filesystem::path(s_.ckpt_root) / buf).string();
    }

  private:
    void log_step(const char* phase, S loss, double lr, int denom) {
        if (!log_) return;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "step\t%lld\t%s\t%.6f\t%.6g\n",
                      static_cast<long long>(global_update_), phase,
                      double(loss) / std::max(denom, 1), lr);
        log_ << buf;
    }

    void run_epoch(int epoch) {
        auto rng = grad::make_rng(s_.tcfg.seed, 1000 + static_cast<uint64_t>(epoch));
        switch (s_.tcfg.method) {
            case Method::Standard: run_standard_epoch(rng); break;
            case Method::Maml: run_maml_epoch(rng); break;
            case Method::Hnet: run_hnet_epoch(rng); break;
            case Method::HnetMaml: run_hnet_maml_epoch(rng); break;
        }
        if (log_) log_.flush();
    }

    void run_standard_epoch(std::mt19937_64& rng) {
        // one pass over every pooled (task, instance) pair, tasks mixed freely
        struct Item {
            const TrainPool::TaskEntry* entry;
            int instance;
        };
        std::vector<Item> items;
        for (const auto& entry : pool_.tasks)
            for (int idx : entry.instance_pool) items.push_back({&entry, idx});
        std::shuffle(items.begin(), items.end(), rng);

        const int bs = s_.tcfg.inner_batch;
        const int accum = s_.tcfg.grad_accumulation_steps;
        size_t pos = 0;
        while (pos < items.size()) {
            std::vector<model::Batch> micro;
            for (int a = 0; a < accum && pos < items.size(); ++a) {
                std::vector<model::SeqExample> examples;
                for (int b = 0; b < bs && pos < items.size(); ++b, ++pos) {
                    const Item& it = items[pos];
                    const data::Instance& inst =
                        it.entry->task->instances[static_cast<size_t>(it.instance)];
                    model::SeqExample ex;
                    ex.src_ids = model::encode_encoder_text(
                        bundle_.tok,
                        data::build_encoder_text(it.entry->instruction, inst.input));
                    ex.tgt_ids = model::encode_decoder_target(
                        bundle_.tok, data::decoder_prefix(), inst.references.front());
                    examples.push_back(std::move(ex));
                }
                micro.push_back(model::make_batch(examples, bundle_.cfg));
            }
            const S loss = standard_step(bundle_, micro, main_opt_);
            ++global_update_;
            log_step("main", loss, s_.tcfg.outer_lr, static_cast<int>(micro.size()));
        }
    }

    void run_maml_epoch(std::mt19937_64& rng) {
        const int64_t per_iter = static_cast<int64_t>(2 * s_.tcfg.tasks_per_meta_step) *
                                 s_.tcfg.inner_batch * s_.tcfg.grad_accumulation_steps;
        const int64_t iters = std::max<int64_t>(1, pool_.total_instances() / per_iter);
        for (int64_t i = 0; i < iters; ++i) {
            std::vector<EpisodeBatch> episodes;
            for (int a = 0; a < s_.tcfg.grad_accumulation_steps; ++a)
                episodes.push_back(sample_episode(pool_, s_.tcfg, rng));
            const S loss = fomaml_step(bundle_, episodes, s_.tcfg, main_opt_);
            ++global_update_;
            log_step("main", loss, s_.tcfg.outer_lr,
                     static_cast<int>(episodes.size() * episodes[0].target.size()));
        }
    }

    void run_hnet_epoch(std::mt19937_64& rng) {
        const int64_t per_update =
            static_cast<int64_t>(s_.tcfg.inner_batch) * s_.tcfg.grad_accumulation_steps;
        const int64_t updates = std::max<int64_t>(1, pool_.total_instances() / per_update);
        std::uniform_int_distribution<size_t> pick(0, pool_.tasks.size() - 1);
        for (int64_t u = 0; u < updates; ++u) {
            const Phase phase = alternation_phase(global_update_, s_.tcfg.alternation_period);
            std::vector<TaskBatch> micro;
            for (int a = 0; a < s_.tcfg.grad_accumulation_steps; ++a)
                micro.push_back(
                    sample_task_batch(pool_.tasks[pick(rng)], s_.tcfg.inner_batch, rng));
            const S loss = hnet_step(bundle_, micro, phase, s_.tcfg.joint_mode, main_opt_,
                                     hnet_opt_);
            ++global_update_;
            log_step(s_.tcfg.joint_mode ? "joint" : phase_name(phase), loss,
                     s_.tcfg.outer_lr, static_cast<int>(micro.size()));
        }
    }

    void run_hnet_maml_epoch(std::mt19937_64& rng) {
        const int64_t per_iter = static_cast<int64_t>(2 * s_.tcfg.tasks_per_meta_step) *
                                 s_.tcfg.inner_batch * s_.tcfg.grad_accumulation_steps;
        const int64_t iters = std::max<int64_t>(1, pool_.total_instances() / per_iter);
        for (int64_t i = 0; i < iters; ++i) {
            // the phase stays fixed for the whole meta-iteration
            const Phase phase = alternation_phase(global_update_, s_.tcfg.alternation_period);
            std::vector<EpisodeBatch> episodes;
            for (int a = 0; a < s_.tcfg.grad_accumulation_steps; ++a)
                episodes.push_back(sample_episode(pool_, s_.tcfg, rng));
            const S loss =
                hnet_maml_step(bundle_, episodes, phase, s_.tcfg, main_opt_, hnet_opt_);
            ++global_update_;
            log_step(phase_name(phase), loss, s_.tcfg.outer_lr,
                     static_cast<int>(episodes.size() * episodes[0].target.size()));
        }
    }

    void save_state(int epoch) {
        namespace fs = std::filesystem;
        const fs::path dir = checkpoint_dir(epoch);
        fs::create_directories(dir);
        grad::save_checkpoint((dir / "params.bin").string(), bundle_.reg);

        std::map<std::string, std::pair<grad::Shape, std::vector<S>>> state;
        auto put = [&](const std::string& prefix,
                       const std::map<std::string, std::vector<S>>& m) {
            for (const auto& [name, buf] : m)
                state.emplace(prefix + name,
                              std::make_pair(grad::Shape{static_cast<int64_t>(buf.size())},
                                             buf));
        };
        put("opt.main.", main_opt_.export_state());
        put("opt.hnet.", hnet_opt_.export_state());
        state.emplace("trainer.global_update",
                      std::make_pair(grad::Shape{1},
                                     std::vector<S>{S(global_update_)}));
        grad::save_checkpoint((dir / "optim.bin").string(), state);
    }

    void load_state(const std::string& dir) {
        namespace fs = std::filesystem;
        grad::load_checkpoint_into((fs::path(dir) / "params.bin").string(), bundle_.reg);
        auto entries = grad::load_checkpoint((fs::path(dir) / "optim.bin").string());
        std::map<std::string, std::vector<S>> main_state, hnet_state;
        for (const auto& [name, e] : entries) {
            std::vector<S> buf(e.values.begin(), e.values.end());
            if (name.rfind("opt.main.", 0) == 0)
                main_state.emplace(name.substr(9), std::move(buf));
            else if (name.rfind("opt.hnet.", 0) == 0)
                hnet_state.emplace(name.substr(9), std::move(buf));
            else if (name == "trainer.global_update")
                global_update_ = static_cast<int64_t>(buf.at(0));
        }
        main_opt_.import_state(main_state);
        hnet_opt_.import_state(hnet_state);
    }

    Setup s_;
    ModelBundle<S> bundle_;
    grad::Optimizer<S> main_opt_, hnet_opt_;
    TrainPool pool_;
    std::ofstream log_;
    int64_t global_update_ = 0;
    int start_epoch_ = 0;
};

}  // namespace mtil::train
