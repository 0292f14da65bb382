#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mtil/error.hpp"

namespace mtil::grad {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

// Thread-local autograd mode. Inside a NoGradGuard scope ops compute values
// only and record nothing on the tape (used for decoding / evaluation).
inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

inline bool grad_enabled() { return grad_mode_flag(); }

class NoGradGuard {
  public:
    NoGradGuard() : prev_(grad_mode_flag()) { grad_mode_flag() = false; }
    ~NoGradGuard() { grad_mode_flag() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

template <typename S>
class Tensor;

// One node of the dynamic tape. Leaves (no parents) are parameters or
// constants; their grad buffers persist and accumulate across backward()
// calls until cleared. Interior nodes get their grads re-zeroed at the
// start of every backward pass.
template <typename S>
struct TensorNode {
    Shape shape;
    std::vector<S> value;
    std::vector<S> grad;  // empty until first use
    bool requires_grad = false;
    std::vector<Tensor<S>> parents;
    std::function<void(TensorNode<S>&)> backprop;

    bool is_leaf() const { return parents.empty(); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), S(0));
    }
};

template <typename S>
class Tensor {
  public:
    using Scalar = S;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return from_data(std::move(shape), {}, requires_grad);
    }

    static Tensor full(Shape shape, S fill, bool requires_grad = false) {
        auto t = from_data(std::move(shape), {}, requires_grad);
        std::fill(t.data().begin(), t.data().end(), fill);
        return t;
    }

    static Tensor scalar(S v, bool requires_grad = false) {
        return from_data({1}, {v}, requires_grad);
    }

    // data may be empty (zero fill) or must match product(shape).
    static Tensor from_data(Shape shape, std::vector<S> data, bool requires_grad = false) {
        const int64_t n = shape_numel(shape);
        if (data.empty()) data.assign(static_cast<size_t>(n), S(0));
        if (static_cast<int64_t>(data.size()) != n)
            throw ShapeError("Tensor: data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        auto node = std::make_shared<TensorNode<S>>();
        node->shape = std::move(shape);
        node->value = std::move(data);
        node->requires_grad = requires_grad;
        Tensor t;
        t.node_ = std::move(node);
        return t;
    }

    static Tensor randn(Shape shape, std::mt19937_64& rng, double stddev,
                        bool requires_grad = false) {
        auto t = zeros(std::move(shape), requires_grad);
        std::normal_distribution<double> dist(0.0, stddev);
        for (auto& v : t.data()) v = static_cast<S>(dist(rng));
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int64_t dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    int64_t size() const { return static_cast<int64_t>(node_->value.size()); }

    std::vector<S>& data() { return node_->value; }
    const std::vector<S>& data() const { return node_->value; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b) { node_->requires_grad = b; }

    bool has_grad() const { return node_->grad.size() == node_->value.size(); }
    std::vector<S>& grad() {
        if (!has_grad()) throw ContractError("Tensor: grad not populated");
        return node_->grad;
    }
    const std::vector<S>& grad() const {
        if (!has_grad()) throw ContractError("Tensor: grad not populated");
        return node_->grad;
    }
    void zero_grad() { node_->grad.clear(); }

    S item() const {
        if (size() != 1) throw ShapeError("Tensor: item() on non-scalar " + shape_str(shape()));
        return node_->value[0];
    }

    // Deep copy of values only; the copy is a fresh leaf with no history
    // and no grad.
    Tensor detach_copy() const {
        auto t = from_data(node_->shape, node_->value, node_->requires_grad);
        return t;
    }

    TensorNode<S>* node() const { return node_.get(); }
    bool same_node(const Tensor& other) const { return node_ == other.node_; }

  private:
    std::shared_ptr<TensorNode<S>> node_;
};

// Builds an op result. Parents and the backprop closure are only attached
// when grad mode is on and at least one parent participates in the tape.
template <typename S>
Tensor<S> make_op(Shape shape, std::vector<S> value, std::vector<Tensor<S>> parents,
                  std::function<void(TensorNode<S>&)> backprop) {
    auto out = Tensor<S>::from_data(std::move(shape), std::move(value));
    if (grad_enabled()) {
        bool need = false;
        for (const auto& p : parents)
            if (p.requires_grad()) need = true;
        if (need) {
            out.node()->requires_grad = true;
            out.node()->parents = std::move(parents);
            out.node()->backprop = std::move(backprop);
        }
    }
    return out;
}

// Reverse pass from a scalar loss. Interior grads are zeroed per call;
// leaf grads (parameters) accumulate additively across calls until the
// caller clears them.
template <typename S>
void backward(const Tensor<S>& loss) {
    if (loss.size() != 1)
        throw ContractError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    if (!loss.requires_grad()) return;

    // Post-order DFS over grad-requiring parents: parents precede children.
    std::vector<TensorNode<S>*> order;
    std::unordered_set<TensorNode<S>*> seen;
    struct Frame {
        TensorNode<S>* n;
        size_t next;
    };
    std::vector<Frame> stack;
    stack.push_back({loss.node(), 0});
    seen.insert(loss.node());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.n->parents.size()) {
            TensorNode<S>* p = f.n->parents[f.next++].node();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }

    for (TensorNode<S>* n : order) {
        if (!n->is_leaf()) n->grad.assign(n->value.size(), S(0));
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] += S(1);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode<S>* n = *it;
        if (n->backprop) n->backprop(*n);
    }
}

}  // namespace mtil::grad
