#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mtil/grad/tensor.hpp"

namespace mtil::grad {

// Named model parameters with per-entry trainable flags. Names are
// hierarchical ("main.decoder.layer0.self_attn.q_proj.w") so whole groups
// can be frozen or cloned by prefix. Iteration order is the sorted name
// order, which keeps everything downstream deterministic.
template <typename S>
class ParamRegistry {
  public:
    struct Entry {
        Tensor<S> tensor;
        bool trainable = true;
    };

    Tensor<S>& add(const std::string& name, Tensor<S> t, bool trainable = true) {
        auto [it, inserted] = entries_.emplace(name, Entry{std::move(t), trainable});
        if (!inserted) throw ContractError("ParamRegistry: duplicate name " + name);
        it->second.tensor.set_requires_grad(trainable);
        return it->second.tensor;
    }

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    Tensor<S>& at(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ContractError("ParamRegistry: unknown name " + name);
        return it->second.tensor;
    }
    const Tensor<S>& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ContractError("ParamRegistry: unknown name " + name);
        return it->second.tensor;
    }

    bool trainable(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ContractError("ParamRegistry: unknown name " + name);
        return it->second.trainable;
    }

    void set_trainable(const std::string& name, bool flag) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ContractError("ParamRegistry: unknown name " + name);
        it->second.trainable = flag;
        it->second.tensor.set_requires_grad(flag);
    }

    void set_trainable_prefix(std::string_view prefix, bool flag) {
        for (auto& [name, e] : entries_) {
            if (name.rfind(prefix, 0) == 0) {
                e.trainable = flag;
                e.tensor.set_requires_grad(flag);
            }
        }
    }

    void zero_grads() {
        for (auto& [name, e] : entries_) e.tensor.zero_grad();
    }

    // Deep copy: fresh leaf tensors with the same values and flags.
    ParamRegistry clone() const {
        ParamRegistry out;
        for (const auto& [name, e] : entries_) {
            Tensor<S> t = e.tensor.detach_copy();
            t.set_requires_grad(e.trainable);
            out.entries_.emplace(name, Entry{std::move(t), e.trainable});
        }
        return out;
    }

    void copy_values_from(const ParamRegistry& other) {
        for (auto& [name, e] : entries_) e.tensor.data() = other.at(name).data();
    }

    size_t size() const { return entries_.size(); }
    int64_t total_values() const {
        int64_t n = 0;
        for (const auto& [name, e] : entries_) n += e.tensor.size();
        return n;
    }

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    std::vector<std::string> names_with_prefix(std::string_view prefix) const {
        std::vector<std::string> out;
        for (const auto& [name, e] : entries_)
            if (name.rfind(prefix, 0) == 0) out.push_back(name);
        return out;
    }

  private:
    std::map<std::string, Entry> entries_;
};

}  // namespace mtil::grad
