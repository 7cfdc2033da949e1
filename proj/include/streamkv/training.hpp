#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "streamkv/cache.hpp"
#include "streamkv/datapipe.hpp"
#include "streamkv/errors.hpp"
#include "streamkv/prng.hpp"

namespace streamkv {

// One slot of an assembled training sample.
struct SamplePosition {
    EntryKind kind = EntryKind::Text;
    std::int64_t second = 0;
    int token_id = -1;
    std::string word;                   // narration text, empty otherwise
    std::uint64_t frame_seed = 0;       // vision
    int frame = -1, row = -1, col = -1;  // vision
    bool prefix = false;                // true for sink/window prefix slots
};

// A full-attention training instance for one chunk: the prefix text carried
// over from before the chunk, then the chunk's seconds interleaved as
// vision-then-text, with loss computed only on the chunk's text slots
// (narration and placeholders).
struct TrainingSample {
    datapipe::ChunkSpec chunk;
    std::vector<datapipe::TimedWord> sink_prefix;    // first t_sink words of prior text
    std::vector<datapipe::TimedWord> window_prefix;  // last t_window words of the rest
    std::vector<SamplePosition> positions;
    std::vector<bool> loss_mask;  // aligned with positions
};

// Stable word -> token id mapping; ids 0 and 1 stay reserved for the
// placeholder and end-of-second sentinels.
inline int word_token_id(const std::string& word, int vocab_size) {
    const int reserved = 2;
    if (vocab_size <= reserved) throw ConfigError("word_token_id: vocab too small");
    return reserved + static_cast<int>(fnv1a64(word) %
                                       static_cast<std::uint64_t>(vocab_size - reserved));
}

// Assemble one training sample from a cleaned word timeline. Seconds run on
// the 1 s grid: a word belongs to floor(start); a second with no words gets
// exactly one "..." placeholder in its text slot, and that slot is
// supervised. The prefix applies the cache routing rule to the text before
// the chunk: the first t_sink words fill the sink prefix, the last t_window
// of the remainder fill the window prefix.
inline TrainingSample build_training_sample(std::span<const datapipe::TimedWord> timeline,
                                            const datapipe::ChunkSpec& chunk,
                                            const StreamConfig& cfg) {
    chunk.validate();
    cfg.validate();
    const double duration = datapipe::timeline_end(timeline);
    if (chunk.start >= duration && !timeline.empty()) {
        throw ValidationError("training sample: chunk starts beyond the transcript");
    }
    const std::int64_t first_second = static_cast<std::int64_t>(std::llround(chunk.start));
    const std::int64_t end_second = static_cast<std::int64_t>(std::llround(chunk.end));
    if (std::abs(chunk.start - static_cast<double>(first_second)) > 1e-9 ||
        std::abs(chunk.end - static_cast<double>(end_second)) > 1e-9) {
        throw ValidationError("training sample: chunk bounds must sit on the 1 s grid");
    }

    TrainingSample sample;
    sample.chunk = chunk;

    std::vector<datapipe::TimedWord> previous;
    for (const auto& w : timeline) {
        if (w.start < chunk.start) previous.push_back(w);
    }
    const std::size_t sink_n = std::min<std::size_t>(cfg.t_sink, previous.size());
    sample.sink_prefix.assign(previous.begin(), previous.begin() + sink_n);
    const std::size_t rest = previous.size() - sink_n;
    const std::size_t window_n = std::min<std::size_t>(cfg.t_window, rest);
    sample.window_prefix.assign(previous.end() - window_n, previous.end());

    auto push = [&sample](SamplePosition pos, bool loss) {
        sample.positions.push_back(std::move(pos));
        sample.loss_mask.push_back(loss);
    };

    for (const auto* prefix : {&sample.sink_prefix, &sample.window_prefix}) {
        for (const auto& w : *prefix) {
            SamplePosition p;
            p.kind = EntryKind::Text;
            p.second = static_cast<std::int64_t>(std::floor(w.start));
            p.token_id = word_token_id(w.text, cfg.model.vocab_size);
            p.word = w.text;
            p.prefix = true;
            push(std::move(p), false);
        }
    }

    for (std::int64_t s = first_second; s < end_second; ++s) {
        for (int f = 0; f < cfg.fps; ++f) {
            const std::uint64_t frame_seed = mix64(cfg.model.seed, 0x66726d65ULL,
                                                   static_cast<std::uint64_t>(s),
                                                   static_cast<std::uint64_t>(f));
            for (int r = 0; r < cfg.frame_rows; ++r) {
                for (int c = 0; c < cfg.frame_cols; ++c) {
                    SamplePosition p;
                    p.kind = EntryKind::Vision;
                    p.second = s;
                    p.frame_seed = frame_seed;
                    p.frame = f;
                    p.row = r;
                    p.col = c;
                    push(std::move(p), false);
                }
            }
        }
        bool spoke = false;
        for (const auto& w : timeline) {
            if (static_cast<std::int64_t>(std::floor(w.start)) != s) continue;
            SamplePosition p;
            p.kind = EntryKind::Text;
            p.second = s;
            p.token_id = word_token_id(w.text, cfg.model.vocab_size);
            p.word = w.text;
            push(std::move(p), true);
            spoke = true;
        }
        if (!spoke) {
            SamplePosition p;
            p.kind = EntryKind::Placeholder;
            p.second = s;
            p.token_id = cfg.placeholder_token;
            push(std::move(p), true);
        }
    }
    return sample;
}

}  // namespace streamkv
