#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mtil/grad/fastmath.hpp"
#include "mtil/grad/ops.hpp"
#include "mtil/grad/registry.hpp"
#include "mtil/model/addresses.hpp"
#include "mtil/model/config.hpp"
#include "mtil/model/tokenizer.hpp"

namespace mtil::model {

using grad::Tensor;

// ---------------------------------------------------------------------------
// parameters
// ---------------------------------------------------------------------------

// Read view over a registry with an optional overlay of adapted tensors.
// Overlay entries are graph expressions (base + delta), so a forward pass
// through the view stays differentiable into both the base parameters and
// the deltas. The base registry itself is never written.
template <typename S>
struct ParamView {
    const grad::ParamRegistry<S>* base = nullptr;
    std::map<std::string, Tensor<S>> overlay;

    explicit ParamView(const grad::ParamRegistry<S>& reg) : base(&reg) {}

    Tensor<S> get(const std::string& name) const {
        auto it = overlay.find(name);
        if (it != overlay.end()) return it->second;
        return base->at(name);
    }
};

// Per-layer additive weight updates keyed by layer address.
template <typename S>
struct DeltaParams {
    std::vector<std::pair<LayerAddress, Tensor<S>>> entries;
};

template <typename S>
ParamView<S> apply_delta(const grad::ParamRegistry<S>& base, const DeltaParams<S>& delta,
                         const std::string& ns = "main.") {
    ParamView<S> view(base);
    for (const auto& [addr, dw] : delta.entries) {
        const std::string name = addr.param_name(ns);
        const Tensor<S>& w = base.at(name);
        if (dw.shape() != w.shape())
            throw ShapeError("apply_delta: shape mismatch for " + name + ": " +
                             grad::shape_str(dw.shape()) + " vs " + grad::shape_str(w.shape()));
        view.overlay.emplace(name, grad::add(w, dw));
    }
    return view;
}

// Stacks further deltas on top of an already-adapted view.
template <typename S>
ParamView<S> apply_delta(const ParamView<S>& base_view, const DeltaParams<S>& delta,
                         const std::string& ns = "main.") {
    ParamView<S> view = base_view;
    for (const auto& [addr, dw] : delta.entries) {
        const std::string name = addr.param_name(ns);
        Tensor<S> w = base_view.get(name);
        if (dw.shape() != w.shape())
            throw ShapeError("apply_delta: shape mismatch for " + name);
        view.overlay[name] = grad::add(w, dw);
    }
    return view;
}

// Registers all parameters of one encoder-decoder LM under a namespace
// prefix. The output projection is tied to the token embedding.
template <typename S>
void init_seq2seq_params(grad::ParamRegistry<S>& reg, const ModelConfig& cfg,
                         const std::string& ns, std::mt19937_64& rng) {
    cfg.validate();
    auto w = [&](const std::string& name, grad::Shape shape) {
        reg.add(ns + name, Tensor<S>::randn(std::move(shape), rng, cfg.init_std));
    };
    auto zeros = [&](const std::string& name, grad::Shape shape) {
        reg.add(ns + name, Tensor<S>::zeros(std::move(shape)));
    };
    auto ones = [&](const std::string& name, grad::Shape shape) {
        reg.add(ns + name, Tensor<S>::full(std::move(shape), S(1)));
    };

    w("embed.tokens.w", {cfg.vocab_size, cfg.d_model});
    w("embed.enc_pos.w", {cfg.max_encoder_positions, cfg.d_model});
    w("embed.dec_pos.w", {cfg.max_decoder_positions, cfg.d_model});

    auto attn = [&](const std::string& prefix) {
        for (const char* p : {"q_proj", "k_proj", "v_proj", "out_proj"}) {
            w(prefix + std::string(p) + ".w", {cfg.d_model, cfg.d_model});
            zeros(prefix + std::string(p) + ".b", {cfg.d_model});
        }
    };
    auto ff = [&](const std::string& prefix) {
        w(prefix + "ff.w1.w", {cfg.d_model, cfg.ff_dim});
        zeros(prefix + "ff.w1.b", {cfg.ff_dim});
        w(prefix + "ff.w2.w", {cfg.ff_dim, cfg.d_model});
        zeros(prefix + "ff.w2.b", {cfg.d_model});
    };
    auto ln = [&](const std::string& prefix) {
        ones(prefix + ".g", {cfg.d_model});
        zeros(prefix + ".b", {cfg.d_model});
    };

    for (int i = 0; i < cfg.n_encoder_layers; ++i) {
        const std::string p = "encoder.layer" + std::to_string(i) + ".";
        attn(p + "self_attn.");
        ff(p);
        ln(p + "ln1");
        ln(p + "ln2");
    }
    ln("encoder.final_ln");

    for (int i = 0; i < cfg.n_decoder_layers; ++i) {
        const std::string p = "decoder.layer" + std::to_string(i) + ".";
        attn(p + "self_attn.");
        attn(p + "cross_attn.");
        ff(p);
        ln(p + "ln1");
        ln(p + "ln2");
        ln(p + "ln3");
    }
    ln("decoder.final_ln");
}

// ---------------------------------------------------------------------------
// batches
// ---------------------------------------------------------------------------

// A padded token batch. Decoder input is BOS + target[:-1]; labels are the
// full target with PAD at padded positions (ignored by the loss).
struct Batch {
    int64_t batch_size = 0;
    int64_t enc_len = 0;
    int64_t dec_len = 0;
    std::vector<int32_t> src;       // [B * enc_len]
    std::vector<int32_t> dec_in;    // [B * dec_len]
    std::vector<int32_t> labels;    // [B * dec_len]
    std::vector<int64_t> src_valid; // unpadded source length per row
};

struct SeqExample {
    std::vector<int32_t> src_ids;  // BOS + text + EOS
    std::vector<int32_t> tgt_ids;  // prefix + output + EOS (no BOS)
};

inline std::vector<int32_t> encode_encoder_text(const ByteTokenizer& tok,
                                                const std::string& text) {
    std::vector<int32_t> ids;
    ids.push_back(ByteTokenizer::kBos);
    for (int32_t id : tok.encode(text)) ids.push_back(id);
    ids.push_back(ByteTokenizer::kEos);
    return ids;
}

inline std::vector<int32_t> encode_decoder_target(const ByteTokenizer& tok,
                                                  const std::string& prefix,
                                                  const std::string& target) {
    std::vector<int32_t> ids;
    for (int32_t id : tok.encode(prefix)) ids.push_back(id);
    for (int32_t id : tok.encode(target)) ids.push_back(id);
    ids.push_back(ByteTokenizer::kEos);
    return ids;
}

inline Batch make_batch(const std::vector<SeqExample>& examples, const ModelConfig& cfg) {
    if (examples.empty()) throw ContractError("make_batch: empty example list");
    Batch b;
    b.batch_size = static_cast<int64_t>(examples.size());
    for (const auto& ex : examples) {
        b.enc_len = std::max(b.enc_len, static_cast<int64_t>(ex.src_ids.size()));
        b.dec_len = std::max(b.dec_len, static_cast<int64_t>(ex.tgt_ids.size()));
    }
    if (b.enc_len > cfg.max_encoder_positions || b.dec_len > cfg.max_decoder_positions)
        throw ContractError("make_batch: sequence exceeds position limits (" +
                            std::to_string(b.enc_len) + "/" + std::to_string(b.dec_len) +
                            "); inputs must be pre-filtered");
    b.src.assign(static_cast<size_t>(b.batch_size * b.enc_len), ByteTokenizer::kPad);
    b.dec_in.assign(static_cast<size_t>(b.batch_size * b.dec_len), ByteTokenizer::kPad);
    b.labels.assign(static_cast<size_t>(b.batch_size * b.dec_len), ByteTokenizer::kPad);
    for (int64_t i = 0; i < b.batch_size; ++i) {
        const auto& ex = examples[static_cast<size_t>(i)];
        for (size_t t = 0; t < ex.src_ids.size(); ++t)
            b.src[i * b.enc_len + static_cast<int64_t>(t)] = ex.src_ids[t];
        b.src_valid.push_back(static_cast<int64_t>(ex.src_ids.size()));
        b.dec_in[i * b.dec_len] = ByteTokenizer::kBos;
        for (size_t t = 0; t < ex.tgt_ids.size(); ++t) {
            b.labels[i * b.dec_len + static_cast<int64_t>(t)] = ex.tgt_ids[t];
            if (t + 1 < ex.tgt_ids.size())
                b.dec_in[i * b.dec_len + static_cast<int64_t>(t) + 1] = ex.tgt_ids[t];
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

namespace detail {

// Fused scaled-dot-product multi-head attention over projected rows:
// q [B*Tq, D] attends k/v [B*Tk, D], heads are D/H-wide column slices.
// Each query row normalizes only its valid key window (source padding and
// causal masking restrict it), and padded query rows come out exactly
// zero, so batched results match unpadded single-sequence runs bit for
// bit. The attention weights are kept for the backward pass; scores never
// materialize on the tape.
template <typename S>
Tensor<S> fused_attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                          int64_t b, int64_t tq, int64_t tk, int64_t h,
                          const std::vector<int64_t>& key_valid,
                          const std::vector<int64_t>& q_valid, bool causal, S scale) {
    const int64_t d = q.dim(1), dh = d / h;
    auto window_end = [&](int64_t batch, int64_t qi) -> int64_t {
        if (!q_valid.empty() && qi >= q_valid[static_cast<size_t>(batch)]) return 0;
        const int64_t valid = key_valid.empty() ? tk : key_valid[static_cast<size_t>(batch)];
        return std::min(valid, causal ? std::min(qi + 1, tk) : tk);
    };

    auto probs = std::make_shared<std::vector<S>>(static_cast<size_t>(b * h * tq * tk), S(0));
    std::vector<S> out(static_cast<size_t>(b * tq * d), S(0));
    {
        const S* qp = q.data().data();
        const S* kp = k.data().data();
        const S* vp = v.data().data();
        S* pp = probs->data();
        S* op = out.data();
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < b * tq; ++r) {
            const int64_t batch = r / tq;
            const int64_t end = window_end(batch, r % tq);
            if (end == 0) continue;
            const S* kbase = kp + batch * tk * d;
            const S* vbase = vp + batch * tk * d;
            for (int64_t hh = 0; hh < h; ++hh) {
                const S* qrow = qp + r * d + hh * dh;
                S* prow = pp + ((batch * h + hh) * tq + (r % tq)) * tk;
                S mx = std::numeric_limits<S>::lowest();
                for (int64_t ki = 0; ki < end; ++ki) {
                    const S* krow = kbase + ki * d + hh * dh;
                    S acc = S(0);
                    for (int64_t l = 0; l < dh; ++l) acc += qrow[l] * krow[l];
                    prow[ki] = acc * scale;
                    mx = std::max(mx, prow[ki]);
                }
                S denom = S(0);
                for (int64_t ki = 0; ki < end; ++ki) {
                    const S e = grad::softmax_exp(prow[ki] - mx);
                    prow[ki] = e;
                    denom += e;
                }
                const S inv = S(1) / denom;
                S* orow = op + r * d + hh * dh;
                for (int64_t ki = 0; ki < end; ++ki) {
                    const S w = prow[ki] * inv;
                    prow[ki] = w;
                    const S* vrow = vbase + ki * d + hh * dh;
                    for (int64_t l = 0; l < dh; ++l) orow[l] += w * vrow[l];
                }
            }
        }
    }
    return grad::make_op<S>(
        {b * tq, d}, std::move(out), {q, k, v},
        [q, k, v, probs, b, tq, tk, h, d, dh, causal, scale, key_valid,
         q_valid](grad::TensorNode<S>& node) {
            auto window_end = [&](int64_t batch, int64_t qi) -> int64_t {
                if (!q_valid.empty() && qi >= q_valid[static_cast<size_t>(batch)]) return 0;
                const int64_t valid =
                    key_valid.empty() ? tk : key_valid[static_cast<size_t>(batch)];
                return std::min(valid, causal ? std::min(qi + 1, tk) : tk);
            };
            const bool need_q = q.requires_grad();
            const bool need_k = k.requires_grad();
            const bool need_v = v.requires_grad();
            if (need_q) q.node()->ensure_grad();
            if (need_k) k.node()->ensure_grad();
            if (need_v) v.node()->ensure_grad();
            const S* qp = q.data().data();
            const S* kp = k.data().data();
            const S* vp = v.data().data();
            const S* pp = probs->data();
            const S* gop = node.grad.data();
            S* gq = need_q ? q.node()->grad.data() : nullptr;
            S* gk = need_k ? k.node()->grad.data() : nullptr;
            S* gv = need_v ? v.node()->grad.data() : nullptr;
            // each (batch, head) unit owns disjoint row/column slices of
            // the gradients, so the loop is race-free
#pragma omp parallel for schedule(static)
            for (int64_t u = 0; u < b * h; ++u) {
                const int64_t batch = u / h;
                const int64_t hh = u % h;
                std::vector<S> dw(static_cast<size_t>(tk));
                for (int64_t qi = 0; qi < tq; ++qi) {
                    const int64_t end = window_end(batch, qi);
                    if (end == 0) continue;
                    const int64_t r = batch * tq + qi;
                    const S* gorow = gop + r * d + hh * dh;
                    const S* prow = pp + ((batch * h + hh) * tq + qi) * tk;
                    // dL/dw and attention-weighted value gradient
                    S dot = S(0);
                    for (int64_t ki = 0; ki < end; ++ki) {
                        const S* vrow = vp + (batch * tk + ki) * d + hh * dh;
                        S acc = S(0);
                        for (int64_t l = 0; l < dh; ++l) acc += gorow[l] * vrow[l];
                        dw[static_cast<size_t>(ki)] = acc;
                        dot += acc * prow[ki];
                    }
                    for (int64_t ki = 0; ki < end; ++ki) {
                        const S w = prow[ki];
                        const S ds = scale * w * (dw[static_cast<size_t>(ki)] - dot);
                        const S* krow = kp + (batch * tk + ki) * d + hh * dh;
                        const S* qrow = qp + r * d + hh * dh;
                        if (need_q) {
                            S* gqrow = gq + r * d + hh * dh;
                            for (int64_t l = 0; l < dh; ++l) gqrow[l] += ds * krow[l];
                        }
                        if (need_k) {
                            S* gkrow = gk + (batch * tk + ki) * d + hh * dh;
                            for (int64_t l = 0; l < dh; ++l) gkrow[l] += ds * qrow[l];
                        }
                        if (need_v) {
                            S* gvrow = gv + (batch * tk + ki) * d + hh * dh;
                            for (int64_t l = 0; l < dh; ++l) gvrow[l] += w * gorow[l];
                        }
                    }
                }
            }
        });
}

template <typename S>
Tensor<S> linear(const ParamView<S>& params, const std::string& name, const Tensor<S>& x2d) {
    return grad::add_bias(grad::matmul(x2d, params.get(name + ".w")), params.get(name + ".b"));
}

template <typename S>
Tensor<S> layer_norm_p(const ParamView<S>& params, const std::string& name,
                       const Tensor<S>& x) {
    return grad::layer_norm(x, params.get(name + ".g"), params.get(name + ".b"));
}

// q_in [B,Tq,D] attends over kv_in [B,Tk,D].
template <typename S>
Tensor<S> multi_head_attention(const ModelConfig& cfg, const ParamView<S>& params,
                               const std::string& prefix, const Tensor<S>& q_in,
                               const Tensor<S>& kv_in, const std::vector<int64_t>& key_valid,
                               const std::vector<int64_t>& q_valid, bool causal) {
    const int64_t b = q_in.dim(0), tq = q_in.dim(1), d = cfg.d_model;
    const int64_t tk = kv_in.dim(1);
    const int64_t h = cfg.n_heads, dh = d / h;

    auto q2 = linear(params, prefix + "q_proj", grad::reshape(q_in, {b * tq, d}));
    auto kv2 = grad::reshape(kv_in, {b * tk, d});
    auto k2 = linear(params, prefix + "k_proj", kv2);
    auto v2 = linear(params, prefix + "v_proj", kv2);

    auto ctx = fused_attention(q2, k2, v2, b, tq, tk, h, key_valid, q_valid, causal,
                               S(1.0 / std::sqrt(double(dh))));
    auto out = linear(params, prefix + "out_proj", ctx);
    return grad::reshape(std::move(out), {b, tq, d});
}

template <typename S>
Tensor<S> feed_forward(const ParamView<S>& params, const std::string& prefix,
                       const Tensor<S>& x, int64_t b, int64_t t, int64_t d) {
    auto x2 = grad::reshape(x, {b * t, d});
    auto h = grad::gelu(linear(params, prefix + "ff.w1", x2));
    auto out = linear(params, prefix + "ff.w2", h);
    return grad::reshape(std::move(out), {b, t, d});
}

template <typename S>
Tensor<S> embed_sequence(const ParamView<S>& params, const std::string& ns,
                         const std::string& pos_table, const std::vector<int32_t>& ids,
                         int64_t b, int64_t t, int64_t d) {
    auto tok_emb = grad::embedding(params.get(ns + "embed.tokens.w"), ids);
    std::vector<int32_t> pos_ids(static_cast<size_t>(b * t));
    for (int64_t i = 0; i < b; ++i)
        for (int64_t j = 0; j < t; ++j) pos_ids[static_cast<size_t>(i * t + j)] = int32_t(j);
    auto pos_emb = grad::embedding(params.get(ns + pos_table), pos_ids);
    return grad::reshape(grad::add(tok_emb, pos_emb), {b, t, d});
}

}  // namespace detail

template <typename S>
struct EncoderOut {
    Tensor<S> hidden;               // [B, Tenc, D]
    std::vector<int64_t> src_valid; // per-row valid key length
};

template <typename S>
EncoderOut<S> encode(const ModelConfig& cfg, const ParamView<S>& params, const std::string& ns,
                     const Batch& batch) {
    const int64_t b = batch.batch_size, t = batch.enc_len, d = cfg.d_model;
    auto x = detail::embed_sequence(params, ns, "embed.enc_pos.w", batch.src, b, t, d);
    for (int i = 0; i < cfg.n_encoder_layers; ++i) {
        const std::string p = ns + "encoder.layer" + std::to_string(i) + ".";
        auto a = detail::multi_head_attention(cfg, params, p + "self_attn.",
                                              detail::layer_norm_p(params, p + "ln1", x), x,
                                              batch.src_valid, batch.src_valid,
                                              /*causal=*/false);
        // pre-LN residual blocks
        x = grad::add(x, a);
        auto f = detail::feed_forward(params, p, detail::layer_norm_p(params, p + "ln2", x), b,
                                      t, d);
        x = grad::add(x, f);
    }
    EncoderOut<S> out;
    out.hidden = detail::layer_norm_p(params, ns + "encoder.final_ln", x);
    out.src_valid = batch.src_valid;
    return out;
}

// Decoder hidden states [B, Tdec, D] for given decoder input ids.
template <typename S>
Tensor<S> decode_hidden(const ModelConfig& cfg, const ParamView<S>& params,
                        const std::string& ns, const EncoderOut<S>& enc,
                        const std::vector<int32_t>& dec_in, int64_t b, int64_t t) {
    const int64_t d = cfg.d_model;
    auto x = detail::embed_sequence(params, ns, "embed.dec_pos.w", dec_in, b, t, d);
    for (int i = 0; i < cfg.n_decoder_layers; ++i) {
        const std::string p = ns + "decoder.layer" + std::to_string(i) + ".";
        auto a = detail::multi_head_attention(cfg, params, p + "self_attn.",
                                              detail::layer_norm_p(params, p + "ln1", x), x, {},
                                              {}, /*causal=*/true);
        x = grad::add(x, a);
        auto c = detail::multi_head_attention(cfg, params, p + "cross_attn.",
                                              detail::layer_norm_p(params, p + "ln2", x),
                                              enc.hidden, enc.src_valid, {},
                                              /*causal=*/false);
        x = grad::add(x, c);
        auto f = detail::feed_forward(params, p, detail::layer_norm_p(params, p + "ln3", x), b,
                                      t, d);
        x = grad::add(x, f);
    }
    return detail::layer_norm_p(params, ns + "decoder.final_ln", x);
}

// Output logits use the tied token embedding.
template <typename S>
Tensor<S> project_logits(const ParamView<S>& params, const std::string& ns,
                         const Tensor<S>& hidden2d) {
    return grad::matmul_nt(hidden2d, params.get(ns + "embed.tokens.w"));
}

// Teacher-forced forward pass: logits [B, Tdec, V].
template <typename S>
Tensor<S> forward(const ModelConfig& cfg, const ParamView<S>& params, const std::string& ns,
                  const Batch& batch) {
    auto enc = encode(cfg, params, ns, batch);
    auto hidden = decode_hidden(cfg, params, ns, enc, batch.dec_in, batch.batch_size,
                                batch.dec_len);
    auto logits2d = project_logits(
        params, ns, grad::reshape(hidden, {batch.batch_size * batch.dec_len, cfg.d_model}));
    return grad::reshape(std::move(logits2d),
                         {batch.batch_size, batch.dec_len, cfg.vocab_size});
}

// Mean cross entropy over non-padding label positions.
template <typename S>
Tensor<S> seq2seq_loss(const ModelConfig& cfg, const ParamView<S>& params, const std::string& ns,
                       const Batch& batch) {
    auto logits = forward(cfg, params, ns, batch);
    return grad::cross_entropy(
        grad::reshape(std::move(logits), {batch.batch_size * batch.dec_len, cfg.vocab_size}),
        batch.labels, ByteTokenizer::kPad);
}

// ---------------------------------------------------------------------------
// decoding
// ---------------------------------------------------------------------------

// Greedy argmax decoding. The returned ids exclude the prefix and any EOS;
// max_len caps prefix length plus generated tokens. Pure function of its
// inputs; records nothing on the tape.
template <typename S>
std::vector<int32_t> greedy_decode_ids(const ModelConfig& cfg, const ParamView<S>& params,
                                       const std::string& ns,
                                       const std::vector<int32_t>& src_ids,
                                       const std::vector<int32_t>& prefix_ids,
                                       int64_t max_len) {
    if (static_cast<int64_t>(prefix_ids.size()) >= max_len)
        throw ContractError("greedy_decode: prefix must be shorter than max_len");
    grad::NoGradGuard ng;

    std::vector<SeqExample> ex(1);
    ex[0].src_ids = src_ids;
    ex[0].tgt_ids = {ByteTokenizer::kEos};  // placeholder target
    Batch probe = make_batch(ex, cfg);
    auto enc = encode(cfg, params, ns, probe);

    std::vector<int32_t> dec;
    dec.push_back(ByteTokenizer::kBos);
    dec.insert(dec.end(), prefix_ids.begin(), prefix_ids.end());

    std::vector<int32_t> out;
    const int64_t budget =
        std::min<int64_t>(max_len, cfg.max_decoder_positions - 1);  // BOS occupies a slot
    while (static_cast<int64_t>(prefix_ids.size() + out.size()) < budget) {
        const int64_t t = static_cast<int64_t>(dec.size());
        auto hidden = decode_hidden(cfg, params, ns, enc, dec, 1, t);
        auto last = grad::slice_rows(grad::reshape(hidden, {t, cfg.d_model}), t - 1, 1);
        auto logits = project_logits(params, ns, last);
        const auto& row = logits.data();
        int32_t best = 0;
        for (int64_t j = 1; j < cfg.vocab_size; ++j)
            if (row[static_cast<size_t>(j)] > row[static_cast<size_t>(best)])
                best = static_cast<int32_t>(j);
        if (best == ByteTokenizer::kEos) break;
        out.push_back(best);
        dec.push_back(best);
    }
    return out;
}

}  // namespace mtil::model
