#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mtil/grad/registry.hpp"

namespace mtil::grad {

enum class OptKind { SGD, Adam };

// SGD / Adam over a registry. Only trainable parameters are touched, a
// missing grad counts as zero, and grads of visited parameters are cleared
// after the update. An optional name-prefix filter restricts the optimizer
// to one parameter group (used by the alternating training schedule).
template <typename S>
class Optimizer {
  public:
    Optimizer(OptKind kind, S lr) : kind_(kind), lr_(lr) {}

    static Optimizer sgd(S lr) { return Optimizer(OptKind::SGD, lr); }
    static Optimizer adam(S lr, S beta1 = S(0.9), S beta2 = S(0.999), S eps = S(1e-8)) {
        Optimizer o(OptKind::Adam, lr);
        o.beta1_ = beta1;
        o.beta2_ = beta2;
        o.eps_ = eps;
        return o;
    }

    void set_prefix_filter(std::string prefix) { prefix_ = std::move(prefix); }
    const std::string& prefix_filter() const { return prefix_; }

    S learning_rate() const { return lr_; }
    void set_learning_rate(S lr) { lr_ = lr; }
    int64_t step_count() const { return step_count_; }

    void step(ParamRegistry<S>& params) {
        if (kind_ == OptKind::Adam) ++step_count_;
        for (auto& [name, entry] : params) {
            if (!entry.trainable) continue;
            if (!prefix_.empty() && name.rfind(prefix_, 0) != 0) continue;
            apply(name, entry.tensor);
            entry.tensor.zero_grad();
        }
    }

    // Serialization of Adam state as flat named buffers (checkpointing).
    std::map<std::string, std::vector<S>> export_state() const {
        std::map<std::string, std::vector<S>> out;
        for (const auto& [name, buf] : m_) out["adam.m." + name] = buf;
        for (const auto& [name, buf] : v_) out["adam.v." + name] = buf;
        out["adam.step"] = {static_cast<S>(step_count_)};
        return out;
    }

    void import_state(const std::map<std::string, std::vector<S>>& state) {
        m_.clear();
        v_.clear();
        step_count_ = 0;
        for (const auto& [name, buf] : state) {
            if (name == "adam.step")
                step_count_ = static_cast<int64_t>(buf.at(0));
            else if (name.rfind("adam.m.", 0) == 0)
                m_[name.substr(7)] = buf;
            else if (name.rfind("adam.v.", 0) == 0)
                v_[name.substr(7)] = buf;
        }
    }

  private:
    void apply(const std::string& name, Tensor<S>& p) {
        const bool has_grad = p.has_grad();
        auto& value = p.data();
        if (kind_ == OptKind::SGD) {
            if (!has_grad) return;  // zero grad, zero step
            const auto& g = p.grad();
            for (size_t i = 0; i < value.size(); ++i) value[i] -= lr_ * g[i];
            return;
        }
        auto& m = m_[name];
        auto& v = v_[name];
        if (m.size() != value.size()) m.assign(value.size(), S(0));
        if (v.size() != value.size()) v.assign(value.size(), S(0));
        const S bc1 = S(1) - S(std::pow(double(beta1_), double(step_count_)));
        const S bc2 = S(1) - S(std::pow(double(beta2_), double(step_count_)));
        for (size_t i = 0; i < value.size(); ++i) {
            const S g = has_grad ? p.grad()[i] : S(0);
            m[i] = beta1_ * m[i] + (S(1) - beta1_) * g;
            v[i] = beta2_ * v[i] + (S(1) - beta2_) * g * g;
            const S mhat = m[i] / bc1;
            const S vhat = v[i] / bc2;
            value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }

    OptKind kind_;
    S lr_;
    S beta1_ = S(0.9), beta2_ = S(0.999), eps_ = S(1e-8);
    int64_t step_count_ = 0;
    std::string prefix_;
    std::map<std::string, std::vector<S>> m_, v_;
};

// Plain SGD over every trainable parameter; used by the MAML inner loop on
// cloned registries where no optimizer state should persist.
template <typename S>
void sgd_step(ParamRegistry<S>& params, S lr) {
    for (auto& [name, entry] : params) {
        if (!entry.trainable || !entry.tensor.has_grad()) continue;
        auto& value = entry.tensor.data();
        const auto& g = entry.tensor.grad();
        for (size_t i = 0; i < value.size(); ++i) value[i] -= lr * g[i];
        entry.tensor.zero_grad();
    }
}

}  // namespace mtil::grad
