#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "mtil/grad/tensor.hpp"

namespace mtil::grad {

// Gradient verification against central finite differences. The function is
// re-evaluated from scratch for every probe, so it must be deterministic.
// Returns max over components of |analytic - numeric| / (|numeric| + 1e-12).
template <typename S>
S finite_difference_check(const std::function<Tensor<S>(const Tensor<S>&)>& f, Tensor<S> x,
                          S eps) {
    x.set_requires_grad(true);
    x.zero_grad();
    Tensor<S> loss = f(x);
    if (loss.size() != 1) throw ContractError("finite_difference_check: f must be scalar-valued");
    backward(loss);
    std::vector<S> analytic = x.has_grad() ? x.grad() : std::vector<S>(x.data().size(), S(0));

    S max_rel = S(0);
    NoGradGuard ng;  // probes need values only
    for (size_t i = 0; i < x.data().size(); ++i) {
        const S orig = x.data()[i];
        x.data()[i] = orig + eps;
        const S up = f(x).item();
        x.data()[i] = orig - eps;
        const S dn = f(x).item();
        x.data()[i] = orig;
        const S numeric = (up - dn) / (S(2) * eps);
        const S rel = std::abs(analytic[i] - numeric) / (std::abs(numeric) + S(1e-12));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

// Same check for a loss that closes over several parameter tensors, probing
// only the listed (tensor, flat index) coordinates. Used for pipelines where
// probing every coordinate would be too slow.
template <typename S>
S finite_difference_check_coords(
    const std::function<Tensor<S>()>& loss_fn, const std::vector<Tensor<S>>& params,
    const std::vector<std::pair<size_t, size_t>>& coords, S eps) {
    for (auto p : params) p.zero_grad();
    Tensor<S> loss = loss_fn();
    if (loss.size() != 1)
        throw ContractError("finite_difference_check_coords: loss must be scalar");
    backward(loss);

    S max_rel = S(0);
    NoGradGuard ng;
    for (auto [ti, ci] : coords) {
        Tensor<S> p = params.at(ti);
        const S analytic = p.has_grad() ? p.grad()[ci] : S(0);
        const S orig = p.data()[ci];
        p.data()[ci] = orig + eps;
        const S up = loss_fn().item();
        p.data()[ci] = orig - eps;
        const S dn = loss_fn().item();
        p.data()[ci] = orig;
        const S numeric = (up - dn) / (S(2) * eps);
        const S rel = std::abs(analytic - numeric) / (std::abs(numeric) + S(1e-12));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace mtil::grad
