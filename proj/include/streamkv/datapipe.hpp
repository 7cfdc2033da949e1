#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "streamkv/errors.hpp"

namespace streamkv::datapipe {

struct TimedWord {
    std::string text;
    double start = 0.0;
    double end = 0.0;
    bool realtime = true;  // external commentary-quality judgment, carried as input
};

enum class Decision { Keep, Edit, Delete };

inline const char* decision_name(Decision d) {
    switch (d) {
        case Decision::Keep: return "keep";
        case Decision::Edit: return "edit";
        default: return "delete";
    }
}

struct TranscriptSentence {
    double start = 0.0;
    double end = 0.0;
    std::vector<TimedWord> words;          // original ASR words with timings
    Decision decision = Decision::Keep;
    std::vector<std::string> edit_words;   // replacement text when decision == Edit
    bool realtime = true;
};

// Evenly split [start, end] over the words: word i of n spans
// [start + i*(end-start)/n, start + (i+1)*(end-start)/n]. The spans
// partition the interval exactly.
inline std::vector<TimedWord> redistribute_timestamps(double start, double end,
                                                      std::span<const std::string> words) {
    if (!(end > start)) throw ValidationError("redistribute: interval must have end > start");
    if (words.empty()) throw ValidationError("redistribute: word list must be non-empty");
    const double n = static_cast<double>(words.size());
    const double span = end - start;
    std::vector<TimedWord> out;
    out.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        TimedWord w;
        w.text = words[i];
        w.start = start + static_cast<double>(i) * span / n;
        w.end = start + static_cast<double>(i + 1) * span / n;
        out.push_back(std::move(w));
    }
    out.front().start = start;  // exact endpoints regardless of rounding
    out.back().end = end;
    return out;
}

// Apply keep/edit/delete decisions and flatten to a word-level timeline.
// Kept sentences keep their ASR timings; edited ones get the sentence span
// evenly redistributed over the replacement words; deleted ones vanish.
inline std::vector<TimedWord> apply_decisions(std::span<const TranscriptSentence> sentences) {
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        const auto& s = sentences[i];
        if (!(s.start < s.end)) {
            throw ValidationError("apply_decisions: sentence must have start < end");
        }
        if (i > 0 && s.start < sentences[i - 1].end) {
            throw ValidationError("apply_decisions: sentences overlap");
        }
        if (s.decision != Decision::Delete && s.words.empty()) {
            throw ValidationError("apply_decisions: non-deleted sentence has no words");
        }
    }
    std::vector<TimedWord> timeline;
    for (const auto& s : sentences) {
        switch (s.decision) {
            case Decision::Keep:
                for (const auto& w : s.words) {
                    timeline.push_back(w);
                    timeline.back().realtime = s.realtime;
                }
                break;
            case Decision::Edit: {
                if (s.edit_words.empty()) {
                    throw ValidationError("apply_decisions: edit without replacement words");
                }
                auto words = redistribute_timestamps(s.start, s.end, s.edit_words);
                for (auto& w : words) w.realtime = s.realtime;
                timeline.insert(timeline.end(), words.begin(), words.end());
                break;
            }
            case Decision::Delete:
                break;
        }
    }
    return timeline;
}

struct DecisionStats {
    std::size_t kept = 0;
    std::size_t edited = 0;
    std::size_t deleted = 0;

    std::size_t total() const { return kept + edited + deleted; }
    double kept_fraction() const { return total() ? double(kept) / double(total()) : 0.0; }
    double edited_fraction() const { return total() ? double(edited) / double(total()) : 0.0; }
    double deleted_fraction() const { return total() ? double(deleted) / double(total()) : 0.0; }
};

inline DecisionStats decision_stats(std::span<const TranscriptSentence> sentences) {
    DecisionStats st;
    for (const auto& s : sentences) {
        switch (s.decision) {
            case Decision::Keep: ++st.kept; break;
            case Decision::Edit: ++st.edited; break;
            case Decision::Delete: ++st.deleted; break;
        }
    }
    return st;
}

// A length-W window with overlap O against its successor.
struct ChunkSpec {
    double start = 0.0;
    double end = 0.0;
    double window = 0.0;   // W
    double overlap = 0.0;  // O

    void validate() const {
        if (!(overlap > 0.0) || !(overlap < window)) {
            throw ValidationError("chunk: overlap must satisfy 0 < O < W");
        }
        if (std::abs((end - start) - window) > 1e-9) {
            throw ValidationError("chunk: end - start must equal W");
        }
        if (start < 0.0) throw ValidationError("chunk: start must be non-negative");
    }
};

struct ChunkSample {
    ChunkSpec chunk;
    std::vector<TimedWord> words;          // words starting inside the chunk
    std::vector<TimedWord> previous_text;  // every word strictly before the chunk
};

inline double timeline_end(std::span<const TimedWord> timeline) {
    double end = 0.0;
    for (const auto& w : timeline) end = std::max(end, w.end);
    return end;
}

// Overlapped segmentation: candidate chunks start at multiples of W - O while
// they fit inside the timeline; candidates with fewer than min_words words
// are dropped. A word belongs to the chunk whose span contains its start.
inline std::vector<ChunkSample> chunk_transcript(std::span<const TimedWord> timeline,
                                                 double window, double overlap,
                                                 std::size_t min_words) {
    if (!(overlap > 0.0) || !(overlap < window)) {
        throw ValidationError("chunk_transcript: overlap must satisfy 0 < O < W");
    }
    const double duration = timeline_end(timeline);
    const double stride = window - overlap;
    std::vector<ChunkSample> out;
    for (std::size_t k = 0;; ++k) {
        const double start = static_cast<double>(k) * stride;
        if (start + window > duration + 1e-9) break;
        ChunkSample sample;
        sample.chunk = ChunkSpec{start, start + window, window, overlap};
        for (const auto& w : timeline) {
            if (w.start < start) {
                sample.previous_text.push_back(w);
            } else if (w.start < start + window) {
                sample.words.push_back(w);
            }
        }
        if (sample.words.size() >= min_words) out.push_back(std::move(sample));
    }
    return out;
}

struct AnnealingClip {
    double start = 0.0;
    double end = 0.0;
    std::size_t word_count = 0;
    double max_internal_silence = 0.0;
    double realtime_fraction = 1.0;
    std::vector<TimedWord> words;

    double duration() const { return end - start; }
};

struct AnnealingFilters {
    double min_duration = 16.0;
    double max_duration = 64.0;
    double max_silence = 3.0;
    double words_per_second = 2.0;   // word_count >= words_per_second * duration
    double realtime_min = 0.8;       // fraction of realtime-judged words required
};

// Non-overlapping greedy slicing. The timeline splits into speech runs at
// silences longer than max_silence (boundaries sit at those gaps); each run
// is cut earliest-first into word-aligned pieces of at most max_duration.
// Pieces failing the duration, word-density or realtime filters are
// discarded, not re-cut.
inline std::vector<AnnealingClip> select_annealing_clips(std::span<const TimedWord> timeline,
                                                         const AnnealingFilters& f = {}) {
    std::vector<AnnealingClip> out;
    std::size_t run_begin = 0;
    while (run_begin < timeline.size()) {
        std::size_t run_end = run_begin + 1;  // exclusive
        while (run_end < timeline.size() &&
               timeline[run_end].start - timeline[run_end - 1].end <= f.max_silence) {
            ++run_end;
        }
        std::size_t cursor = run_begin;
        while (cursor < run_end) {
            const double clip_start = timeline[cursor].start;
            std::size_t last = cursor;
            while (last + 1 < run_end && timeline[last + 1].end - clip_start <= f.max_duration) {
                ++last;
            }
            AnnealingClip clip;
            clip.start = clip_start;
            clip.end = timeline[last].end;
            clip.word_count = last - cursor + 1;
            std::size_t realtime = 0;
            for (std::size_t i = cursor; i <= last; ++i) {
                clip.words.push_back(timeline[i]);
                if (timeline[i].realtime) ++realtime;
                if (i > cursor) {
                    clip.max_internal_silence = std::max(
                        clip.max_internal_silence, timeline[i].start - timeline[i - 1].end);
                }
            }
            clip.realtime_fraction =
                clip.word_count ? double(realtime) / double(clip.word_count) : 0.0;
            const double d = clip.duration();
            const bool pass = d >= f.min_duration && d <= f.max_duration &&
                              clip.max_internal_silence <= f.max_silence &&
                              static_cast<double>(clip.word_count) >= f.words_per_second * d &&
                              clip.realtime_fraction >= f.realtime_min;
            if (pass) out.push_back(std::move(clip));
            cursor = last + 1;
        }
        run_begin = run_end;
    }
    return out;
}

struct EvalSegment {
    double start = 0.0;
    double end = 0.0;
    std::size_t word_count = 0;
    std::vector<TimedWord> words;
};

// Non-overlapping fixed-length segments from t = 0; only full segments are
// candidates and only those with at least min_words words survive.
inline std::vector<EvalSegment> extract_eval_segments(std::span<const TimedWord> timeline,
                                                      double game_length,
                                                      double segment_len = 100.0,
                                                      std::size_t min_words = 200) {
    std::vector<EvalSegment> out;
    if (segment_len <= 0.0) throw ValidationError("eval segments: segment length must be > 0");
    const std::size_t candidates =
        game_length > 0.0 ? static_cast<std::size_t>(game_length / segment_len) : 0;
    for (std::size_t k = 0; k < candidates; ++k) {
        EvalSegment seg;
        seg.start = static_cast<double>(k) * segment_len;
        seg.end = seg.start + segment_len;
        for (const auto& w : timeline) {
            if (w.start >= seg.start && w.start < seg.end) {
                seg.words.push_back(w);
            }
        }
        seg.word_count = seg.words.size();
        if (seg.word_count >= min_words) out.push_back(std::move(seg));
    }
    return out;
}

}  // namespace streamkv::datapipe
