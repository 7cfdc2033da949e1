#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamkv/cache.hpp"
#include "streamkv/errors.hpp"
#include "streamkv/model.hpp"
#include "streamkv/prng.hpp"
#include "streamkv/rope.hpp"

namespace streamkv {

struct FrameDesc {
    std::uint64_t seed = 0;
    int rows = 1;
    int cols = 1;
};

// One second of input. narration semantics:
//   nullopt    -> the engine decodes greedily for this second
//   empty list -> teacher-forced silence; a "..." placeholder fills the slot
//   token list -> teacher-forced narration
struct StreamEvent {
    std::int64_t second = 0;
    std::vector<FrameDesc> frames;
    std::optional<std::vector<int>> narration;
};

struct StepStats {
    std::int64_t second = 0;
    std::int64_t latency_us = 0;
    std::size_t cache_len = 0;           // retained entries after budget enforcement
    std::int64_t max_pos = 0;            // largest rotary index assigned this step
    std::size_t context_len = 0;         // context size of this step's last forward
    std::size_t peak_cache_entries = 0;  // largest cache size during the step
    std::size_t text_tokens = 0;
};

struct StepResult {
    std::vector<int> tokens;
    StepStats stats;
};

struct EngineMode {
    enum class Kind { StreamingReuse, FullAttention, SlidingNoOverlap, SlidingOverlap };

    Kind kind = Kind::StreamingReuse;
    std::int64_t chunk_len_s = 0;  // SlidingNoOverlap reset period

    static EngineMode reuse() { return {Kind::StreamingReuse, 0}; }
    static EngineMode full() { return {Kind::FullAttention, 0}; }
    static EngineMode no_overlap(std::int64_t chunk) { return {Kind::SlidingNoOverlap, chunk}; }
    static EngineMode overlap() { return {Kind::SlidingOverlap, 0}; }

    const char* name() const {
        switch (kind) {
            case Kind::StreamingReuse: return "reuse";
            case Kind::FullAttention: return "full";
            case Kind::SlidingNoOverlap: return "noverlap";
            default: return "overlap";
        }
    }

    void validate() const {
        if (kind == Kind::SlidingNoOverlap && chunk_len_s <= 0) {
            throw ConfigError("engine mode: noverlap needs a positive chunk length");
        }
    }
};

// Metadata snapshot of one context slot; enough to rebuild its embedding.
struct EntryRef {
    EntryKind kind = EntryKind::Text;
    int token_id = -1;
    std::uint64_t frame_seed = 0;
    int frame = -1, row = -1, col = -1;
    std::int64_t second = 0;
    std::uint64_t logical = 0;
    rope::Pos3 pos;
};

// One query forward, replayable from scratch: the context (query last) and
// the logits the engine produced.
struct QueryTrace {
    std::vector<EntryRef> context;
    Vec logits;
};

struct StepTrace {
    std::int64_t second = 0;
    std::vector<QueryTrace> queries;
};

// The streaming decode loop: per second, embed and append the vision tokens,
// then fill the text slot (greedy argmax decoding, or teacher forcing when
// the event carries narration), enforcing cache budgets at the second
// boundary. FullAttention and SlidingNoOverlap run on unbounded budgets
// (the latter clearing at chunk boundaries); SlidingOverlap keeps the same
// retained set as StreamingReuse but recomputes every forward from the
// entries' embeddings instead of reusing cached K/V.
class Engine {
public:
    Engine(StreamConfig cfg, EngineMode mode)
        : cfg_(validated(std::move(cfg), mode)),
          mode_(mode),
          model_(init_model(cfg_.model)),
          cache_(make_cache(cfg_, mode)),
          trig_(cfg_.model.head_dim, cfg_.sections(), cfg_.rope_base) {}

    StepResult step(const StreamEvent& event) {
        if (event.second < 0) throw ContractError("engine: seconds must be non-negative");
        if (last_second_ && event.second <= *last_second_) {
            throw ContractError("engine: events must arrive in increasing second order");
        }
        last_second_ = event.second;
        if (mode_.kind == EngineMode::Kind::SlidingNoOverlap) {
            const std::int64_t epoch = event.second / mode_.chunk_len_s;
            if (!epoch_ || epoch != *epoch_) cache_.clear();
            epoch_ = epoch;
        }
        if (trace_enabled_) last_trace_ = StepTrace{event.second, {}};

        StepResult result;
        result.stats.second = event.second;
        std::int64_t max_pos = 0;
        std::size_t last_ctx = 0;

        const auto t0 = std::chrono::steady_clock::now();

        // Vision tokens of this second, grid order (frame, row, col).
        std::vector<CacheEntry> incoming;
        for (std::size_t f = 0; f < event.frames.size(); ++f) {
            const FrameDesc& frame = event.frames[f];
            if (frame.rows <= 0 || frame.cols <= 0) {
                throw ContractError("engine: frame grid must be positive");
            }
            for (int r = 0; r < frame.rows; ++r) {
                for (int c = 0; c < frame.cols; ++c) {
                    CacheEntry e = make_vision_entry(next_logical_++, event.second, frame.seed,
                                                     static_cast<int>(f), r, c);
                    const Vec emb = vision_patch_embedding(cfg_.model, frame.seed, r, c);
                    EntryKV kv = project_entry_kv(model_, emb);
                    e.keys = std::move(kv.keys);
                    e.values = std::move(kv.values);
                    incoming.push_back(std::move(e));
                }
            }
        }
        cache_.append(std::move(incoming));

        // Text slot.
        const std::size_t budget = static_cast<std::size_t>(cfg_.text_budget_per_second);
        if (event.narration) {
            std::vector<int> forced = *event.narration;
            bool placeholder = false;
            if (forced.empty()) {
                forced.push_back(cfg_.placeholder_token);
                placeholder = true;
            }
            if (forced.size() > budget) forced.resize(budget);
            for (int tok : forced) {
                if (cache_.size() > 0) {
                    (void)forward_last(max_pos, last_ctx);  // prediction logits, traced
                }
                append_text(tok, event.second, placeholder);
                result.tokens.push_back(tok);
            }
        } else {
            while (result.tokens.size() < budget) {
                if (cache_.size() == 0) break;
                const Vec logits = forward_last(max_pos, last_ctx);
                const int tok = argmax_token(logits);
                if (tok == cfg_.eos_token) break;
                append_text(tok, event.second, false);
                result.tokens.push_back(tok);
            }
        }

        result.stats.peak_cache_entries = cache_.size();
        {
            // Positions the incoming tokens were assigned, whether or not a
            // forward consumed them.
            const auto view = cache_.retained_view();
            for (const auto& p : view.positions) max_pos = std::max(max_pos, p.max_component());
            if (last_ctx == 0) last_ctx = view.entries.size();
        }
        const auto evicted = cache_.enforce_budgets();
        (void)evicted;

        const auto t1 = std::chrono::steady_clock::now();
        result.stats.latency_us =
            std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count();
        result.stats.cache_len = cache_.size();
        result.stats.max_pos = max_pos;
        result.stats.context_len = last_ctx;
        result.stats.text_tokens = result.tokens.size();
        return result;
    }

    std::vector<StepResult> run(std::span<const StreamEvent> events) {
        std::vector<StepResult> out;
        out.reserve(events.size());
        for (const auto& e : events) out.push_back(step(e));
        return out;
    }

    const Model& model() const { return model_; }
    const StreamConfig& config() const { return cfg_; }
    const EngineMode& mode() const { return mode_; }
    const StreamingCache& cache() const { return cache_; }
    StreamingCache& cache() { return cache_; }

    void set_trace(bool on) { trace_enabled_ = on; }
    // Trace of the most recent step only; heavy, so consume it per step.
    const std::optional<StepTrace>& last_trace() const { return last_trace_; }

    // After loading a cache snapshot, continue logical positions past it.
    void resume_after_restore() {
        if (const auto last = cache_.max_logical()) next_logical_ = *last + 1;
    }

private:
    static StreamConfig validated(StreamConfig cfg, const EngineMode& mode) {
        cfg.validate();
        mode.validate();
        return cfg;
    }

    static StreamingCache make_cache(const StreamConfig& cfg, const EngineMode& mode) {
        if (mode.kind == EngineMode::Kind::FullAttention ||
            mode.kind == EngineMode::Kind::SlidingNoOverlap) {
            return StreamingCache(kUnbounded, kUnbounded, kUnbounded, cfg.rope_mode);
        }
        return StreamingCache(cfg);
    }

    Vec embedding_of(const CacheEntry& e) const {
        if (e.is_vision()) {
            return vision_patch_embedding(cfg_.model, e.frame_seed, e.row, e.col);
        }
        return token_embedding(model_, e.token_id);
    }

    void append_text(int token, std::int64_t second, bool placeholder) {
        CacheEntry e = make_text_entry(next_logical_++, second, token, placeholder);
        const Vec emb = token_embedding(model_, token);
        EntryKV kv = project_entry_kv(model_, emb);
        e.keys = std::move(kv.keys);
        e.values = std::move(kv.values);
        std::vector<CacheEntry> one;
        one.push_back(std::move(e));
        cache_.append(std::move(one));
    }

    // Forward the newest cached entry over the full retained view (itself
    // included, last). SlidingOverlap rebuilds every K/V from embeddings.
    Vec forward_last(std::int64_t& max_pos, std::size_t& last_ctx) {
        const auto view = cache_.retained_view();
        const CacheEntry& query = *view.entries.back();
        const rope::Pos3 qpos = view.positions.back();
        const Vec qemb = embedding_of(query);

        std::vector<ContextItem> ctx(view.entries.size());
        std::vector<EntryKV> fresh;  // overlap mode storage
        if (mode_.kind == EngineMode::Kind::SlidingOverlap) {
            fresh.reserve(view.entries.size());
            for (std::size_t i = 0; i < view.entries.size(); ++i) {
                fresh.push_back(project_entry_kv(model_, embedding_of(*view.entries[i])));
                ctx[i] = ContextItem{fresh[i].keys, fresh[i].values, view.positions[i]};
            }
        } else {
            for (std::size_t i = 0; i < view.entries.size(); ++i) {
                ctx[i] = ContextItem{view.entries[i]->keys, view.entries[i]->values,
                                     view.positions[i]};
            }
        }
        for (const auto& p : view.positions) max_pos = std::max(max_pos, p.max_component());
        last_ctx = view.entries.size();

        Vec logits = forward_logits(model_, qemb, qpos, ctx, trig_, &scratch_);
        if (trace_enabled_ && last_trace_) {
            QueryTrace qt;
            qt.context.reserve(view.entries.size());
            for (std::size_t i = 0; i < view.entries.size(); ++i) {
                const CacheEntry& e = *view.entries[i];
                qt.context.push_back(EntryRef{e.kind, e.token_id, e.frame_seed, e.frame, e.row,
                                              e.col, e.second, e.logical_position,
                                              view.positions[i]});
            }
            qt.logits = logits;
            last_trace_->queries.push_back(std::move(qt));
        }
        return logits;
    }

    StreamConfig cfg_;
    EngineMode mode_;
    Model model_;
    StreamingCache cache_;
    rope::TrigTable trig_;
    ForwardScratch scratch_;
    std::uint64_t next_logical_ = 0;
    std::optional<std::int64_t> last_second_;
    std::optional<std::int64_t> epoch_;
    bool trace_enabled_ = false;
    std::optional<StepTrace> last_trace_;
};

inline std::vector<StepResult> run_baseline(const EngineMode& mode,
                                            std::span<const StreamEvent> events,
                                            const StreamConfig& cfg) {
    Engine engine(cfg, mode);
    return engine.run(events);
}

struct SynthOptions {
    double narration_density = 1.0;  // P(a second carries narration) under forcing
    int min_words = 1;
    int max_words = 4;
    bool teacher_forced = true;  // false: narration absent everywhere (greedy decode)
    std::int64_t start_second = 0;
};

// Deterministic synthetic event stream. Each second derives its own RNG so
// streams are prefix-stable under extension.
inline std::vector<StreamEvent> synth_stream(std::uint64_t seed, std::int64_t seconds,
                                             const StreamConfig& cfg,
                                             const SynthOptions& opt = {}) {
    std::vector<StreamEvent> events;
    events.reserve(static_cast<std::size_t>(seconds));
    for (std::int64_t s = opt.start_second; s < opt.start_second + seconds; ++s) {
        StreamEvent ev;
        ev.second = s;
        for (int f = 0; f < cfg.fps; ++f) {
            ev.frames.push_back(FrameDesc{
                mix64(seed, 0x66726d65ULL, static_cast<std::uint64_t>(s),
                      static_cast<std::uint64_t>(f)),
                cfg.frame_rows, cfg.frame_cols});
        }
        if (opt.teacher_forced) {
            Rng rng(mix64(seed, 0x6e617272ULL, static_cast<std::uint64_t>(s)));
            std::vector<int> words;
            if (rng.chance(opt.narration_density)) {
                const int lo = 2;  // keep clear of placeholder/eos ids
                const int n = static_cast<int>(rng.range(opt.min_words, opt.max_words));
                for (int i = 0; i < n; ++i) {
                    words.push_back(
                        lo + static_cast<int>(rng.below(
                                 static_cast<std::uint64_t>(cfg.model.vocab_size - lo))));
                }
            }
            ev.narration = std::move(words);
        }
        events.push_back(std::move(ev));
    }
    return events;
}

}  // namespace streamkv
