#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "streamkv/errors.hpp"
#include "streamkv/math.hpp"
#include "streamkv/prng.hpp"
#include "streamkv/rope.hpp"

namespace streamkv {

struct ModelConfig {
    int num_layers = 2;
    int num_heads = 2;
    int head_dim = 8;  // must be even (rotary pairs)
    int vocab_size = 64;
    int ffn_dim = 32;
    std::uint64_t seed = 0;

    int hidden_dim() const { return num_heads * head_dim; }

    void validate() const {
        if (num_layers <= 0 || num_heads <= 0 || head_dim <= 0 || vocab_size <= 0 ||
            ffn_dim <= 0) {
            throw ConfigError("model: all dimensions must be positive");
        }
        if (head_dim % 2 != 0) throw ConfigError("model: head_dim must be even");
    }
};

struct LayerWeights {
    Vec wq, wk, wv, wo;  // [hidden x hidden]
    Vec w1;              // [ffn x hidden]
    Vec w2;              // [hidden x ffn]
};

// A minimal float32 decoder stack. Keys and values at every layer are
// projected from the token's embedded representation rather than from the
// evolving residual stream; queries do follow the residual stream. Cached
// K/V therefore stay exact under any eviction schedule: recomputing a
// retained subset from its embeddings reproduces the cached states
// bit-for-bit, which is what the streaming-vs-recompute checks rely on.
struct Model {
    ModelConfig config;
    Vec embedding;  // [vocab x hidden]
    std::vector<LayerWeights> layers;
    Vec unembed;  // [vocab x hidden]
};

// Weights are uniform in [-0.02, 0.02] from one splitmix64 stream, drawn in
// a fixed order: embedding, then per layer wq, wk, wv, wo, w1, w2, then the
// output head. Same (config, seed) gives bit-identical weights everywhere.
inline Model init_model(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.config = cfg;
    Rng rng(cfg.seed);
    auto draw = [&rng](Vec& v, std::size_t n) {
        v.resize(n);
        for (auto& x : v) x = rng.uniform(-0.02f, 0.02f);
    };
    const std::size_t hidden = static_cast<std::size_t>(cfg.hidden_dim());
    draw(m.embedding, static_cast<std::size_t>(cfg.vocab_size) * hidden);
    m.layers.resize(static_cast<std::size_t>(cfg.num_layers));
    for (auto& layer : m.layers) {
        draw(layer.wq, hidden * hidden);
        draw(layer.wk, hidden * hidden);
        draw(layer.wv, hidden * hidden);
        draw(layer.wo, hidden * hidden);
        draw(layer.w1, static_cast<std::size_t>(cfg.ffn_dim) * hidden);
        draw(layer.w2, hidden * static_cast<std::size_t>(cfg.ffn_dim));
    }
    draw(m.unembed, static_cast<std::size_t>(cfg.vocab_size) * hidden);
    return m;
}

inline Vec token_embedding(const Model& m, int token_id) {
    if (token_id < 0 || token_id >= m.config.vocab_size) {
        throw ShapeError("token_embedding: token id " + std::to_string(token_id) +
                         " outside vocab");
    }
    const std::size_t hidden = static_cast<std::size_t>(m.config.hidden_dim());
    const float* row = m.embedding.data() + static_cast<std::size_t>(token_id) * hidden;
    return Vec(row, row + hidden);
}

// Synthetic vision patch: a seeded vector in the same range as learned
// embeddings, keyed by (frame seed, row, col). No video decoding anywhere.
inline Vec vision_patch_embedding(const ModelConfig& cfg, std::uint64_t frame_seed, int row,
                                  int col) {
    Rng rng(mix64(frame_seed, static_cast<std::uint64_t>(row), static_cast<std::uint64_t>(col)));
    Vec v(static_cast<std::size_t>(cfg.hidden_dim()));
    for (auto& x : v) x = rng.uniform(-0.02f, 0.02f);
    return v;
}

// Per-layer unrotated K/V for one token, flattened [layers x hidden].
struct EntryKV {
    Vec keys;
    Vec values;
};

inline EntryKV project_entry_kv(const Model& m, std::span<const float> embedding) {
    const std::size_t hidden = static_cast<std::size_t>(m.config.hidden_dim());
    if (embedding.size() != hidden) throw ShapeError("project_entry_kv: embedding size mismatch");
    const Vec x = rmsnormed(embedding);
    EntryKV kv;
    kv.keys.resize(m.layers.size() * hidden);
    kv.values.resize(m.layers.size() * hidden);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        matvec(m.layers[l].wk, hidden, hidden, x,
               std::span<float>(kv.keys.data() + l * hidden, hidden));
        matvec(m.layers[l].wv, hidden, hidden, x,
               std::span<float>(kv.values.data() + l * hidden, hidden));
    }
    return kv;
}

// One attention context item: per-layer unrotated K/V plus the rotary index
// to apply at attention time. The query's own entry must be the last item.
struct ContextItem {
    std::span<const float> keys;    // [layers x hidden]
    std::span<const float> values;  // [layers x hidden]
    rope::Pos3 pos;
};

struct ForwardScratch {
    Vec hidden, normed, q, k_rot, ff1, head_out, attn_out;
    std::vector<float> scores;
    std::vector<std::span<const float>> trig_rows;
};

// Forward one query token over an explicit KV context and return its logits.
// Context order is attention order; score and value sums run sequentially
// over the context index so results are reproducible.
inline Vec forward_logits(const Model& m, std::span<const float> query_embedding,
                          const rope::Pos3& query_pos, std::span<const ContextItem> context,
                          rope::TrigTable& trig, ForwardScratch* scratch = nullptr) {
    const std::size_t hidden = static_cast<std::size_t>(m.config.hidden_dim());
    const std::size_t hd = static_cast<std::size_t>(m.config.head_dim);
    const std::size_t heads = static_cast<std::size_t>(m.config.num_heads);
    const std::size_t ffn = static_cast<std::size_t>(m.config.ffn_dim);
    if (query_embedding.size() != hidden) throw ShapeError("forward_logits: query size mismatch");
    for (const auto& c : context) {
        if (c.keys.size() != m.layers.size() * hidden || c.values.size() != c.keys.size()) {
            throw ShapeError("forward_logits: context K/V size mismatch");
        }
    }

    ForwardScratch local;
    ForwardScratch& ws = scratch ? *scratch : local;
    ws.hidden.assign(query_embedding.begin(), query_embedding.end());
    ws.normed.resize(hidden);
    ws.q.resize(hidden);
    ws.k_rot.resize(hd);
    ws.attn_out.resize(hidden);
    ws.ff1.resize(ffn);
    ws.scores.resize(context.size());
    ws.trig_rows.resize(context.size());

    for (std::size_t j = 0; j < context.size(); ++j) {
        ws.trig_rows[j] = trig.row(context[j].pos);
    }
    const auto q_trig = trig.row(query_pos);
    const float inv_sqrt_hd = 1.0f / std::sqrt(static_cast<float>(hd));

    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto& layer = m.layers[l];
        rmsnorm(ws.hidden, ws.normed);
        matvec(layer.wq, hidden, hidden, ws.normed, ws.q);
        std::fill(ws.attn_out.begin(), ws.attn_out.end(), 0.0f);
        for (std::size_t h = 0; h < heads; ++h) {
            std::span<float> qh(ws.q.data() + h * hd, hd);
            rope::rotate_with_row(qh, q_trig);
            for (std::size_t j = 0; j < context.size(); ++j) {
                const float* ksrc = context[j].keys.data() + l * hidden + h * hd;
                std::copy(ksrc, ksrc + hd, ws.k_rot.begin());
                rope::rotate_with_row(ws.k_rot, ws.trig_rows[j]);
                ws.scores[j] = dot(qh, ws.k_rot) * inv_sqrt_hd;
            }
            softmax_inplace(ws.scores);
            std::span<float> out_h(ws.attn_out.data() + h * hd, hd);
            for (std::size_t j = 0; j < context.size(); ++j) {
                const float* vsrc = context[j].values.data() + l * hidden + h * hd;
                const float p = ws.scores[j];
                for (std::size_t d = 0; d < hd; ++d) out_h[d] += p * vsrc[d];
            }
        }
        // residual: h += Wo * attn  (ws.q doubles as the projection buffer)
        matvec(layer.wo, hidden, hidden, ws.attn_out, ws.q);
        for (std::size_t d = 0; d < hidden; ++d) ws.hidden[d] += ws.q[d];
        // residual: h += W2 * silu(W1 * rmsnorm(h))
        rmsnorm(ws.hidden, ws.normed);
        matvec(layer.w1, ffn, hidden, ws.normed, ws.ff1);
        for (auto& v : ws.ff1) v = silu(v);
        matvec(layer.w2, hidden, ffn, ws.ff1, ws.q);
        for (std::size_t d = 0; d < hidden; ++d) ws.hidden[d] += ws.q[d];
    }

    rmsnorm(ws.hidden, ws.normed);
    Vec logits(static_cast<std::size_t>(m.config.vocab_size));
    matvec(m.unembed, logits.size(), hidden, ws.normed, logits);
    return logits;
}

// Degenerate case: a single token attending only to itself.
inline Vec self_attend_logits(const Model& m, std::span<const float> embedding,
                              const rope::Pos3& pos, rope::TrigTable& trig) {
    const EntryKV kv = project_entry_kv(m, embedding);
    const ContextItem self{kv.keys, kv.values, pos};
    return forward_logits(m, embedding, pos, std::span<const ContextItem>(&self, 1), trig);
}

inline int argmax_token(std::span<const float> logits) {
    int best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) best = static_cast<int>(i);
    }
    return best;
}

}  // namespace streamkv
