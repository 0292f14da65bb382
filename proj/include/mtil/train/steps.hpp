#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtil/grad/optimizer.hpp"
#include "mtil/grad/registry.hpp"
#include "mtil/grad/rng.hpp"
#include "mtil/hnet/hypernet.hpp"
#include "mtil/model/model.hpp"
#include "mtil/train/episode.hpp"
#include "mtil/train/train_config.hpp"

namespace mtil::train {

// Model-plus-hypernetwork bundle over one shared registry. The "main."
// namespace holds the main LM; "hnet." and "hnetff." hold the hypernetwork
// group when present.
template <typename S>
struct ModelBundle {
    model::ModelConfig cfg;
    model::ByteTokenizer tok{0};
    grad::ParamRegistry<S> reg;
    bool has_hnet = false;
    hnet::Hypernet h;

    model::ParamView<S> view() const { return model::ParamView<S>(reg); }
};

template <typename S>
ModelBundle<S> make_bundle(model::ModelConfig cfg, bool with_hnet,
                           const hnet::HnetConfig& hcfg, uint64_t seed) {
    ModelBundle<S> b;
    b.has_hnet = with_hnet;
    if (with_hnet) {
        b.h = hnet::make_hypernet(cfg, hcfg);
        b.tok = model::ByteTokenizer(static_cast<int>(b.h.targets.size()));
    } else {
        b.tok = model::ByteTokenizer(0);
    }
    cfg.vocab_size = b.tok.vocab_size();
    b.cfg = cfg;
    b.h.lm_cfg = b.cfg;
    auto rng = grad::make_rng(seed, 0);
    model::init_seq2seq_params(b.reg, b.cfg, "main.", rng);
    if (with_hnet) hnet::init_hypernet_params(b.reg, b.h, b.cfg, rng);
    return b;
}

// Token batch for one task mini-batch: instruction + input on the encoder
// side, prefix + first reference on the decoder side.
template <typename S>
model::Batch build_batch(const ModelBundle<S>& bundle, const TaskBatch& tb) {
    if (tb.instances.empty()) throw ContractError("build_batch: empty task batch");
    const data::Instance* lo = tb.task->instances.data();
    const data::Instance* hi = lo + tb.task->instances.size();
    std::vector<model::SeqExample> examples;
    for (const data::Instance* inst : tb.instances) {
        if (inst < lo || inst >= hi)
            throw ContractError("build_batch: mixed-task batch (instance not from task " +
                                tb.task->id + ")");
        model::SeqExample ex;
        ex.src_ids = model::encode_encoder_text(
            bundle.tok, data::build_encoder_text(tb.instruction, inst->input));
        ex.tgt_ids = model::encode_decoder_target(bundle.tok, data::decoder_prefix(),
                                                  inst->references.front());
        examples.push_back(std::move(ex));
    }
    return model::make_batch(examples, bundle.cfg);
}

// ---------------------------------------------------------------------------
// alternating schedule
// ---------------------------------------------------------------------------

enum class Phase { HnetPhase, MainPhase };

inline const char* phase_name(Phase p) { return p == Phase::HnetPhase ? "hnet" : "main"; }

// Period-2k square wave over optimizer updates: updates 0..k-1 train the
// hypernetwork group (main frozen), k..2k-1 train the main LM, repeating.
inline Phase alternation_phase(int64_t global_update, int64_t k) {
    if (k < 1) throw ContractError("alternation_phase: k must be >= 1");
    return (global_update / k) % 2 == 0 ? Phase::HnetPhase : Phase::MainPhase;
}

// Trainable-flag management for the two parameter groups.
template <typename S>
void set_phase_flags(grad::ParamRegistry<S>& reg, Phase phase) {
    const bool hnet_on = phase == Phase::HnetPhase;
    reg.set_trainable_prefix("main.", !hnet_on);
    reg.set_trainable_prefix("hnet", hnet_on);  // covers hnet. and hnetff.
}

template <typename S>
void set_all_trainable(grad::ParamRegistry<S>& reg) {
    reg.set_trainable_prefix("main.", true);
    reg.set_trainable_prefix("hnet", true);
}

// ---------------------------------------------------------------------------
// training steps
// ---------------------------------------------------------------------------

namespace detail {

template <typename S>
void check_finite_loss(S loss) {
    if (!std::isfinite(double(loss)))
        throw NumericError("training: loss is not finite (NaN/Inf)");
}

// Accumulated gradients of the trainable parameters of a (cloned) registry,
// keyed by name.
template <typename S>
void collect_grads(const grad::ParamRegistry<S>& reg,
                   std::map<std::string, std::vector<S>>& acc) {
    for (const auto& [name, e] : reg) {
        if (!e.trainable || !e.tensor.has_grad()) continue;
        auto it = acc.find(name);
        if (it == acc.end()) {
            acc.emplace(name, e.tensor.grad());
        } else {
            const auto& g = e.tensor.grad();
            for (size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
        }
    }
}

template <typename S>
void write_grads(grad::ParamRegistry<S>& reg, const std::map<std::string, std::vector<S>>& acc,
                 S scale) {
    for (const auto& [name, g] : acc) {
        auto& t = reg.at(name);
        t.node()->ensure_grad();
        auto& dst = t.node()->grad;
        for (size_t i = 0; i < g.size(); ++i) dst[i] += scale * g[i];
    }
}

}  // namespace detail

// One teacher-forced gradient step; several batches accumulate their
// gradients into a single optimizer update. Returns the summed loss.
// Per-batch gradients are computed on cleared buffers and summed the same
// way the meta steps sum them, so a zero-inner-step MAML update reduces to
// this step bit for bit.
template <typename S>
S standard_step(ModelBundle<S>& bundle, const std::vector<model::Batch>& batches,
                grad::Optimizer<S>& opt) {
    std::map<std::string, std::vector<S>> acc;
    S total = S(0);
    for (const auto& batch : batches) {
        bundle.reg.zero_grads();
        auto loss = model::seq2seq_loss(bundle.cfg, bundle.view(), "main.", batch);
        grad::backward(loss);
        total += loss.item();
        detail::collect_grads(bundle.reg, acc);
    }
    detail::check_finite_loss(total);
    bundle.reg.zero_grads();
    detail::write_grads(bundle.reg, acc, S(1));
    opt.step(bundle.reg);
    return total;
}

template <typename S>
void reg_freeze_hnet(ModelBundle<S>& bundle) {
    bundle.reg.set_trainable_prefix("main.", true);
    bundle.reg.set_trainable_prefix("hnet", false);
}

// First-order MAML update of the main LM. Per support task the main
// parameters are cloned and adapted with `inner_steps` SGD steps; the
// gradient of the summed target-task losses, taken at the adapted
// parameters, is applied to the originals by the outer optimizer. The
// originals change only in that final update. Several episodes accumulate
// into one update (gradient accumulation).
template <typename S>
S fomaml_step(ModelBundle<S>& bundle, const std::vector<EpisodeBatch>& episodes,
              const TrainConfig& cfg, grad::Optimizer<S>& outer_opt) {
    if (bundle.has_hnet) reg_freeze_hnet(bundle);

    std::map<std::string, std::vector<S>> acc;
    S total = S(0);
    for (const EpisodeBatch& episode : episodes) {
        if (episode.support.size() != episode.target.size())
            throw ContractError("fomaml_step: support/target task counts differ");
        for (size_t k = 0; k < episode.support.size(); ++k) {
            auto clone = bundle.reg.clone();
            model::ParamView<S> clone_view(clone);
            const auto support = build_batch(bundle, episode.support[k]);
            for (int n = 0; n < cfg.inner_steps; ++n) {
                auto loss = model::seq2seq_loss(bundle.cfg, clone_view, "main.", support);
                grad::backward(loss);
                detail::check_finite_loss(loss.item());
                grad::sgd_step(clone, S(cfg.inner_lr));
            }
            clone.zero_grads();
            const auto target = build_batch(bundle, episode.target[k]);
            auto tloss = model::seq2seq_loss(bundle.cfg, clone_view, "main.", target);
            grad::backward(tloss);
            total += tloss.item();
            detail::collect_grads(clone, acc);
        }
    }
    detail::check_finite_loss(total);
    const S scale =
        cfg.mean_meta_loss ? S(1) / S(episodes.front().support.size()) : S(1);
    detail::write_grads(bundle.reg, acc, scale);
    outer_opt.step(bundle.reg);
    return total;
}

template <typename S>
S fomaml_step(ModelBundle<S>& bundle, const EpisodeBatch& episode, const TrainConfig& cfg,
              grad::Optimizer<S>& outer_opt) {
    return fomaml_step(bundle, std::vector<EpisodeBatch>{episode}, cfg, outer_opt);
}

// One adapted gradient step of the hypernetwork pipeline. Each micro batch
// is a same-task mini-batch: adapt from its instruction, compute the loss
// under the adapted view, backprop. Only the current phase's group updates
// (both groups in joint mode).
template <typename S>
S hnet_step(ModelBundle<S>& bundle, const std::vector<TaskBatch>& micro_batches, Phase phase,
            bool joint_mode, grad::Optimizer<S>& main_opt, grad::Optimizer<S>& hnet_opt) {
    if (!bundle.has_hnet) throw ContractError("hnet_step: bundle has no hypernetwork");
    if (joint_mode)
        set_all_trainable(bundle.reg);
    else
        set_phase_flags(bundle.reg, phase);

    S total = S(0);
    for (const auto& tb : micro_batches) {
        auto view = hnet::task_adapt(bundle.h, bundle.reg, bundle.tok, tb.instruction);
        const auto batch = build_batch(bundle, tb);
        auto loss = model::seq2seq_loss(bundle.cfg, view, "main.", batch);
        grad::backward(loss);
        total += loss.item();
    }
    detail::check_finite_loss(total);
    if (joint_mode || phase == Phase::MainPhase) main_opt.step(bundle.reg);
    if (joint_mode || phase == Phase::HnetPhase) hnet_opt.step(bundle.reg);
    return total;
}

// First-order MAML over the hypernetwork pipeline. The phase is fixed for
// the entire meta-iteration, so the inner SGD steps and the outer update
// touch the same single parameter group while the other stays frozen.
template <typename S>
S hnet_maml_step(ModelBundle<S>& bundle, const std::vector<EpisodeBatch>& episodes,
                 Phase phase, const TrainConfig& cfg, grad::Optimizer<S>& main_opt,
                 grad::Optimizer<S>& hnet_opt) {
    if (!bundle.has_hnet) throw ContractError("hnet_maml_step: bundle has no hypernetwork");
    set_phase_flags(bundle.reg, phase);

    std::map<std::string, std::vector<S>> acc;
    S total = S(0);
    for (const EpisodeBatch& episode : episodes) {
        if (episode.support.size() != episode.target.size())
            throw ContractError("hnet_maml_step: support/target task counts differ");
        for (size_t k = 0; k < episode.support.size(); ++k) {
            auto clone = bundle.reg.clone();
            const auto support = build_batch(bundle, episode.support[k]);
            for (int n = 0; n < cfg.inner_steps; ++n) {
                auto view = hnet::task_adapt(bundle.h, clone, bundle.tok,
                                             episode.support[k].instruction);
                auto loss = model::seq2seq_loss(bundle.cfg, view, "main.", support);
                grad::backward(loss);
                detail::check_finite_loss(loss.item());
                grad::sgd_step(clone, S(cfg.inner_lr));
            }
            clone.zero_grads();
            const auto target = build_batch(bundle, episode.target[k]);
            auto tview = hnet::task_adapt(bundle.h, clone, bundle.tok,
                                          episode.target[k].instruction);
            auto tloss = model::seq2seq_loss(bundle.cfg, tview, "main.", target);
            grad::backward(tloss);
            total += tloss.item();
            detail::collect_grads(clone, acc);
        }
    }
    detail::check_finite_loss(total);
    const S scale =
        cfg.mean_meta_loss ? S(1) / S(episodes.front().support.size()) : S(1);
    detail::write_grads(bundle.reg, acc, scale);
    if (phase == Phase::MainPhase)
        main_opt.step(bundle.reg);
    else
        hnet_opt.step(bundle.reg);
    return total;
}

template <typename S>
S hnet_maml_step(ModelBundle<S>& bundle, const EpisodeBatch& episode, Phase phase,
                 const TrainConfig& cfg, grad::Optimizer<S>& main_opt,
                 grad::Optimizer<S>& hnet_opt) {
    return hnet_maml_step(bundle, std::vector<EpisodeBatch>{episode}, phase, cfg, main_opt,
                          hnet_opt);
}

}  // namespace mtil::train
