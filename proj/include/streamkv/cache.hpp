#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamkv/errors.hpp"
#include "streamkv/model.hpp"
#include "streamkv/rope.hpp"

namespace streamkv {

inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

// Everything a streaming session needs: model dims, cache budgets and
// per-second scheduling rates. Budgets may be kUnbounded (no eviction).
struct StreamConfig {
    ModelConfig model;

    std::size_t t_sink = 512;            // sink text tokens, never evicted once filled
    std::size_t t_window = 512;          // recent text tokens kept after the sink
    std::size_t v_window_seconds = 16;   // recent vision kept, in whole seconds

    int fps = 1;         // frames per second
    int frame_rows = 1;  // patch grid rows per frame
    int frame_cols = 1;  // patch grid cols per frame

    int text_budget_per_second = 8;
    int placeholder_token = 0;  // "..." slot filler for silent seconds
    int eos_token = 1;          // end-of-second sentinel for greedy decoding

    rope::Mode rope_mode = rope::Mode::OneD;
    double rope_base = 10000.0;
    // Explicit section split; pairs summing to head_dim/2. Unset -> 1D puts
    // all pairs on t, 3D uses the 2:1:1 default.
    std::optional<rope::Sections> rope_sections;

    std::size_t vision_tokens_per_second() const {
        return static_cast<std::size_t>(fps) * frame_rows * frame_cols;
    }

    std::size_t v_window_tokens() const {
        if (v_window_seconds == kUnbounded) return kUnbounded;
        return v_window_seconds * vision_tokens_per_second();
    }

    rope::Sections sections() const {
        if (rope_sections) return *rope_sections;
        return rope_mode == rope::Mode::OneD ? rope::Sections::one_d(model.head_dim)
                                             : rope::Sections::split_3d(model.head_dim);
    }

    void validate() const {
        model.validate();
        if (fps <= 0 || frame_rows <= 0 || frame_cols <= 0) {
            throw ConfigError("stream config: fps and frame grid must be positive");
        }
        if (text_budget_per_second < 0) {
            throw ConfigError("stream config: text budget must be >= 0");
        }
        if (placeholder_token < 0 || placeholder_token >= model.vocab_size ||
            eos_token < 0 || eos_token >= model.vocab_size) {
            throw ConfigError("stream config: reserved token ids outside vocab");
        }
        sections().validate(model.head_dim);
        if (rope_base <= 0.0) throw ConfigError("stream config: rope base must be positive");
    }
};

enum class EntryKind { Text, Placeholder, Vision };

inline bool is_text_kind(EntryKind k) { return k != EntryKind::Vision; }

inline const char* kind_name(EntryKind k) {
    switch (k) {
        case EntryKind::Text: return "text";
        case EntryKind::Placeholder: return "placeholder";
        default: return "vision";
    }
}

// One cached token. Keys/values are unrotated, flattened [layers x hidden];
// rotation happens at attention time under the current contiguous indices.
// They may be empty for metadata-only uses (retention fuzzing, goldens).
struct CacheEntry {
    EntryKind kind = EntryKind::Text;
    std::uint64_t logical_position = 0;
    std::int64_t second = 0;
    int token_id = -1;               // text / placeholder
    std::uint64_t frame_seed = 0;    // vision
    int frame = -1;                  // vision: frame ordinal within the second
    int row = -1;                    // vision: patch grid row
    int col = -1;                    // vision: patch grid col
    Vec keys;
    Vec values;

    bool is_vision() const { return kind == EntryKind::Vision; }

    rope::Item remap_item() const {
        return rope::Item{logical_position, is_vision(), second,
                          frame < 0 ? 0 : frame, row < 0 ? 0 : row, col < 0 ? 0 : col};
    }
};

inline CacheEntry make_text_entry(std::uint64_t logical, std::int64_t second, int token_id,
                                  bool placeholder = false) {
    CacheEntry e;
    e.kind = placeholder ? EntryKind::Placeholder : EntryKind::Text;
    e.logical_position = logical;
    e.second = second;
    e.token_id = token_id;
    return e;
}

inline CacheEntry make_vision_entry(std::uint64_t logical, std::int64_t second,
                                    std::uint64_t frame_seed, int frame, int row, int col) {
    CacheEntry e;
    e.kind = EntryKind::Vision;
    e.logical_position = logical;
    e.second = second;
    e.frame_seed = frame_seed;
    e.frame = frame;
    e.row = row;
    e.col = col;
    return e;
}

// Three-tier streaming KV store: a sink of the earliest text tokens (filled
// once, never evicted), a ring of recent text, and a ring of recent vision
// grouped by second. Vision is evicted first, in whole-second groups; text
// only when its own budget is exceeded.
class StreamingCache {
public:
    explicit StreamingCache(const StreamConfig& cfg)
        : t_sink_(cfg.t_sink),
          t_window_(cfg.t_window),
          v_window_tokens_(cfg.v_window_tokens()),
          rope_mode_(cfg.rope_mode) {}

    StreamingCache(std::size_t t_sink, std::size_t t_window, std::size_t v_window_tokens,
                   rope::Mode mode = rope::Mode::OneD)
        : t_sink_(t_sink),
          t_window_(t_window),
          v_window_tokens_(v_window_tokens),
          rope_mode_(mode) {}

    // Entries must arrive in strictly increasing logical position. Text fills
    // the sink until it holds t_sink tokens, then routes to the text ring;
    // vision always routes to the vision ring. Budgets are not enforced here.
    void append(std::vector<CacheEntry> entries) {
        for (auto& e : entries) {
            if (last_logical_ && e.logical_position <= *last_logical_) {
                throw ContractError("cache append: logical positions must be increasing");
            }
            if (e.is_vision() && (e.row < 0 || e.col < 0 || e.frame < 0)) {
                throw ContractError("cache append: vision entries must carry a grid");
            }
            if (!e.is_vision() && (e.row >= 0 || e.col >= 0)) {
                throw ContractError("cache append: text entries must not carry a grid");
            }
            last_logical_ = e.logical_position;
            if (e.is_vision()) {
                vision_.push_back(std::move(e));
            } else if (sink_.size() < t_sink_) {
                sink_.push_back(std::move(e));
            } else {
                text_.push_back(std::move(e));
            }
        }
    }

    // Evict oldest vision (whole-second groups) until the vision ring fits,
    // then oldest text until the text ring fits. The sink is untouched.
    // Returns evicted entries oldest first, vision before text.
    std::vector<CacheEntry> enforce_budgets() {
        std::vector<CacheEntry> evicted;
        if (v_window_tokens_ != kUnbounded) {
            while (vision_.size() > v_window_tokens_) {
                const std::int64_t sec = vision_.front().second;
                while (!vision_.empty() && vision_.front().second == sec) {
                    evicted.push_back(std::move(vision_.front()));
                    vision_.pop_front();
                }
            }
        }
        if (t_window_ != kUnbounded) {
            while (text_.size() > t_window_) {
                evicted.push_back(std::move(text_.front()));
                text_.pop_front();
            }
        }
        return evicted;
    }

    struct Retained {
        std::vector<const CacheEntry*> entries;  // all tiers merged by logical position
        std::vector<rope::Pos3> positions;       // contiguous rotary assignment
        std::int64_t next_time = 0;
    };

    // Ordered snapshot with the current contiguous rotary assignment. Tiers
    // are merged by logical position, which keeps the view strictly
    // stream-ordered even in the transient phase where sink text postdates
    // the earliest vision; once that vision ages out, the view is exactly
    // sink followed by the interleaved windows.
    Retained retained_view() const {
        Retained view;
        view.entries.reserve(size());
        std::size_t si = 0, ti = 0, vi = 0;
        auto pos_of = [](const CacheEntry& e) { return e.logical_position; };
        while (si < sink_.size() || ti < text_.size() || vi < vision_.size()) {
            const CacheEntry* best = nullptr;
            if (si < sink_.size()) best = &sink_[si];
            if (ti < text_.size() && (!best || pos_of(text_[ti]) < pos_of(*best))) {
                best = &text_[ti];
            }
            if (vi < vision_.size() && (!best || pos_of(vision_[vi]) < pos_of(*best))) {
                best = &vision_[vi];
            }
            if (best == (si < sink_.size() ? &sink_[si] : nullptr)) {
                ++si;
            } else if (ti < text_.size() && best == &text_[ti]) {
                ++ti;
            } else {
                ++vi;
            }
            view.entries.push_back(best);
        }
        std::vector<rope::Item> items;
        items.reserve(view.entries.size());
        for (const CacheEntry* e : view.entries) items.push_back(e->remap_item());
        auto remap = rope::contiguous_remap(items, rope_mode_);
        view.positions = std::move(remap.positions);
        view.next_time = remap.next_time;
        return view;
    }

    std::optional<std::uint64_t> max_logical() const { return last_logical_; }

    std::size_t size() const { return sink_.size() + text_.size() + vision_.size(); }
    std::size_t sink_size() const { return sink_.size(); }
    std::size_t text_size() const { return text_.size(); }
    std::size_t vision_size() const { return vision_.size(); }

    std::size_t sink_budget() const { return t_sink_; }
    std::size_t text_budget() const { return t_window_; }
    std::size_t vision_token_budget() const { return v_window_tokens_; }
    rope::Mode mode() const { return rope_mode_; }

    const std::vector<CacheEntry>& sink_tier() const { return sink_; }
    const std::deque<CacheEntry>& text_tier() const { return text_; }
    const std::deque<CacheEntry>& vision_tier() const { return vision_; }

    void clear() {
        sink_.clear();
        text_.clear();
        vision_.clear();
        // logical positions stay globally monotone across resets
    }

    // Restore a dumped state verbatim. Tier contents must individually be in
    // increasing logical order; used by the JSON snapshot loader.
    void restore_tiers(std::vector<CacheEntry> sink, std::deque<CacheEntry> text,
                       std::deque<CacheEntry> vision) {
        auto check_sorted = [](const auto& tier, const char* name) {
            for (std::size_t i = 1; i < tier.size(); ++i) {
                if (tier[i].logical_position <= tier[i - 1].logical_position) {
                    throw ContractError(std::string("cache restore: ") + name +
                                        " tier out of order");
                }
            }
        };
        check_sorted(sink, "sink");
        check_sorted(text, "text");
        check_sorted(vision, "vision");
        if (sink.size() > t_sink_ && t_sink_ != kUnbounded) {
            throw ContractError("cache restore: sink exceeds budget");
        }
        sink_ = std::move(sink);
        text_ = std::move(text);
        vision_ = std::move(vision);
        last_logical_.reset();
        for (const auto* tier : {&text_, &vision_}) {
            if (!tier->empty()) {
                const std::uint64_t back = tier->back().logical_position;
                if (!last_logical_ || back > *last_logical_) last_logical_ = back;
            }
        }
        if (!sink_.empty()) {
            const std::uint64_t back = sink_.back().logical_position;
            if (!last_logical_ || back > *last_logical_) last_logical_ = back;
        }
    }

private:
    std::size_t t_sink_;
    std::size_t t_window_;
    std::size_t v_window_tokens_;
    rope::Mode rope_mode_;
    std::vector<CacheEntry> sink_;
    std::deque<CacheEntry> text_;
    std::deque<CacheEntry> vision_;
    std::optional<std::uint64_t> last_logical_;
};

}  // namespace streamkv
