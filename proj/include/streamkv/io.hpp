#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "streamkv/cache.hpp"
#include "streamkv/datapipe.hpp"
#include "streamkv/engine.hpp"
#include "streamkv/errors.hpp"
#include "streamkv/training.hpp"

namespace streamkv::io {

using json = nlohmann::json;

// ---- base64 -----------------------------------------------------------

inline std::string base64_encode(const std::uint8_t* data, std::size_t len) {
    static constexpr char table[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        std::uint32_t v = static_cast<std::uint32_t>(data[i]) << 16;
        if (i + 1 < len) v |= static_cast<std::uint32_t>(data[i + 1]) << 8;
        if (i + 2 < len) v |= static_cast<std::uint32_t>(data[i + 2]);
        out.push_back(table[(v >> 18) & 0x3f]);
        out.push_back(table[(v >> 12) & 0x3f]);
        out.push_back(i + 1 < len ? table[(v >> 6) & 0x3f] : '=');
        out.push_back(i + 2 < len ? table[v & 0x3f] : '=');
    }
    return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& s) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        if (c == '=') return -1;
        throw IoError("base64: invalid character");
    };
    if (s.size() % 4 != 0) throw IoError("base64: truncated input");
    std::vector<std::uint8_t> out;
    out.reserve(s.size() / 4 * 3);
    for (std::size_t i = 0; i < s.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            vals[k] = value_of(s[i + k]);
            if (vals[k] < 0) {
                ++pad;
                vals[k] = 0;
            }
        }
        const std::uint32_t v = (std::uint32_t(vals[0]) << 18) | (std::uint32_t(vals[1]) << 12) |
                                (std::uint32_t(vals[2]) << 6) | std::uint32_t(vals[3]);
        out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
    return out;
}

// Little-endian float32 blob <-> base64 text.
inline std::string floats_to_base64(const Vec& v) {
    std::vector<std::uint8_t> bytes(v.size() * sizeof(float));
    if (!v.empty()) std::memcpy(bytes.data(), v.data(), bytes.size());
    return base64_encode(bytes.data(), bytes.size());
}

inline Vec base64_to_floats(const std::string& s) {
    const auto bytes = base64_decode(s);
    if (bytes.size() % sizeof(float) != 0) throw IoError("base64: not a float32 blob");
    Vec v(bytes.size() / sizeof(float));
    if (!v.empty()) std::memcpy(v.data(), bytes.data(), bytes.size());
    return v;
}

// ---- files ------------------------------------------------------------

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    if (!out) throw IoError("write failed for " + path);
}

inline json parse_json(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValidationError("malformed JSON in " + what);
    return j;
}

// ---- stream events and step outputs ------------------------------------

inline json event_to_json(const StreamEvent& ev) {
    json frames = json::array();
    for (const auto& f : ev.frames) {
        frames.push_back({{"seed", f.seed}, {"rows", f.rows}, {"cols", f.cols}});
    }
    json j{{"second", ev.second}, {"frames", frames}};
    if (ev.narration) {
        j["narration"] = *ev.narration;
    } else {
        j["narration"] = nullptr;
    }
    return j;
}

inline StreamEvent event_from_json(const json& j) {
    StreamEvent ev;
    try {
        ev.second = j.at("second").get<std::int64_t>();
        for (const auto& f : j.at("frames")) {
            ev.frames.push_back(FrameDesc{f.at("seed").get<std::uint64_t>(),
                                          f.at("rows").get<int>(), f.at("cols").get<int>()});
        }
        if (j.contains("narration") && !j.at("narration").is_null()) {
            ev.narration = j.at("narration").get<std::vector<int>>();
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed stream event: ") + e.what());
    }
    return ev;
}

inline std::vector<StreamEvent> load_events_jsonl(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<StreamEvent> events;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        events.push_back(
            event_from_json(parse_json(line, path + ":" + std::to_string(lineno))));
    }
    return events;
}

inline json step_to_json(const StepResult& r) {
    return json{{"second", r.stats.second},
                {"tokens", r.tokens},
                {"latency_us", r.stats.latency_us},
                {"cache_len", r.stats.cache_len},
                {"max_pos", r.stats.max_pos}};
}

// ---- cache snapshots ----------------------------------------------------

inline json cache_entry_to_json(const CacheEntry& e) {
    json j{{"kind", kind_name(e.kind)},
           {"logical_position", e.logical_position},
           {"second", e.second},
           {"keys", floats_to_base64(e.keys)},
           {"values", floats_to_base64(e.values)}};
    if (e.is_vision()) {
        j["frame_seed"] = e.frame_seed;
        j["frame"] = e.frame;
        j["grid"] = {e.row, e.col};
    } else {
        j["token_id"] = e.token_id;
    }
    return j;
}

inline CacheEntry cache_entry_from_json(const json& j) {
    CacheEntry e;
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "vision") {
            e.kind = EntryKind::Vision;
        } else if (kind == "placeholder") {
            e.kind = EntryKind::Placeholder;
        } else if (kind == "text") {
            e.kind = EntryKind::Text;
        } else {
            throw ValidationError("cache entry: unknown kind " + kind);
        }
        e.logical_position = j.at("logical_position").get<std::uint64_t>();
        e.second = j.at("second").get<std::int64_t>();
        e.keys = base64_to_floats(j.at("keys").get<std::string>());
        e.values = base64_to_floats(j.at("values").get<std::string>());
        if (e.kind == EntryKind::Vision) {
            e.frame_seed = j.at("frame_seed").get<std::uint64_t>();
            e.frame = j.at("frame").get<int>();
            e.row = j.at("grid").at(0).get<int>();
            e.col = j.at("grid").at(1).get<int>();
        } else {
            e.token_id = j.at("token_id").get<int>();
        }
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("malformed cache entry: ") + ex.what());
    }
    return e;
}

// Full snapshot of a cache: per-tier entry lists with metadata and base64
// float32 tensors. Suitable for fixtures and bench warm starts.
inline json cache_to_json(const StreamingCache& cache) {
    json sink = json::array(), text = json::array(), vision = json::array();
    for (const auto& e : cache.sink_tier()) sink.push_back(cache_entry_to_json(e));
    for (const auto& e : cache.text_tier()) text.push_back(cache_entry_to_json(e));
    for (const auto& e : cache.vision_tier()) vision.push_back(cache_entry_to_json(e));
    return json{{"schema_version", 1},
                {"sink", sink},
                {"text_window", text},
                {"vision_window", vision}};
}

inline void cache_from_json(const json& j, StreamingCache& cache) {
    try {
        if (j.at("schema_version").get<int>() != 1) {
            throw ValidationError("cache snapshot: unsupported schema version");
        }
        std::vector<CacheEntry> sink;
        std::deque<CacheEntry> text, vision;
        for (const auto& e : j.at("sink")) sink.push_back(cache_entry_from_json(e));
        for (const auto& e : j.at("text_window")) text.push_back(cache_entry_from_json(e));
        for (const auto& e : j.at("vision_window")) vision.push_back(cache_entry_from_json(e));
        cache.restore_tiers(std::move(sink), std::move(text), std::move(vision));
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("malformed cache snapshot: ") + ex.what());
    }
}

// ---- transcripts ---------------------------------------------------------

inline datapipe::TimedWord word_from_json(const json& j) {
    datapipe::TimedWord w;
    w.text = j.at("text").get<std::string>();
    w.start = j.at("start").get<double>();
    w.end = j.at("end").get<double>();
    if (j.contains("realtime")) w.realtime = j.at("realtime").get<bool>();
    return w;
}

inline json word_to_json(const datapipe::TimedWord& w) {
    return json{{"text", w.text}, {"start", w.start}, {"end", w.end}, {"realtime", w.realtime}};
}

// Transcript file: {"sentences": [{"start", "end", "words": [...],
// "decision": "keep" | "delete" | {"edit": ["w", ...]}, "realtime"?}]}
inline std::vector<datapipe::TranscriptSentence> transcript_from_json(const json& j) {
    std::vector<datapipe::TranscriptSentence> sentences;
    try {
        for (const auto& js : j.at("sentences")) {
            datapipe::TranscriptSentence s;
            s.start = js.at("start").get<double>();
            s.end = js.at("end").get<double>();
            if (js.contains("realtime")) s.realtime = js.at("realtime").get<bool>();
            for (const auto& jw : js.at("words")) s.words.push_back(word_from_json(jw));
            const auto& dec = js.at("decision");
            if (dec.is_string()) {
                const std::string d = dec.get<std::string>();
                if (d == "keep") {
                    s.decision = datapipe::Decision::Keep;
                } else if (d == "delete") {
                    s.decision = datapipe::Decision::Delete;
                } else {
                    throw ValidationError("transcript: unknown decision " + d);
                }
            } else {
                s.decision = datapipe::Decision::Edit;
                s.edit_words = dec.at("edit").get<std::vector<std::string>>();
            }
            sentences.push_back(std::move(s));
        }
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("malformed transcript: ") + ex.what());
    }
    return sentences;
}

inline std::vector<datapipe::TranscriptSentence> load_transcript(const std::string& path) {
    return transcript_from_json(parse_json(read_file(path), path));
}

// ---- datapipe outputs (one JSON object per line) --------------------------

inline json chunk_to_json(const datapipe::ChunkSample& c, std::size_t min_words) {
    json words = json::array();
    for (const auto& w : c.words) words.push_back(word_to_json(w));
    return json{{"start", c.chunk.start},
                {"end", c.chunk.end},
                {"w", c.chunk.window},
                {"o", c.chunk.overlap},
                {"word_count", c.words.size()},
                {"min_words", min_words},
                {"previous_text_words", c.previous_text.size()},
                {"words", words}};
}

inline json clip_to_json(const datapipe::AnnealingClip& c, const datapipe::AnnealingFilters& f) {
    return json{{"start", c.start},
                {"end", c.end},
                {"duration", c.duration()},
                {"word_count", c.word_count},
                {"max_internal_silence", c.max_internal_silence},
                {"realtime_fraction", c.realtime_fraction},
                {"filters",
                 json{{"min_duration", f.min_duration},
                      {"max_duration", f.max_duration},
                      {"max_silence", f.max_silence},
                      {"min_words", f.words_per_second * c.duration()},
                      {"realtime_min", f.realtime_min}}}};
}

inline json segment_to_json(const datapipe::EvalSegment& s, std::size_t min_words) {
    return json{{"start", s.start},
                {"end", s.end},
                {"word_count", s.word_count},
                {"min_words", min_words}};
}

// ---- training samples ------------------------------------------------------

inline json sample_to_json(const TrainingSample& sample) {
    json positions = json::array();
    for (std::size_t i = 0; i < sample.positions.size(); ++i) {
        const auto& p = sample.positions[i];
        json jp{{"kind", kind_name(p.kind)},
                {"second", p.second},
                {"loss", static_cast<bool>(sample.loss_mask[i])},
                {"prefix", p.prefix}};
        if (p.kind == EntryKind::Vision) {
            jp["frame_seed"] = p.frame_seed;
            jp["frame"] = p.frame;
            jp["grid"] = {p.row, p.col};
        } else {
            jp["token_id"] = p.token_id;
            if (!p.word.empty()) jp["word"] = p.word;
        }
        positions.push_back(std::move(jp));
    }
    auto words_json = [](const std::vector<datapipe::TimedWord>& ws) {
        json arr = json::array();
        for (const auto& w : ws) arr.push_back(word_to_json(w));
        return arr;
    };
    return json{{"chunk",
                 json{{"start", sample.chunk.start},
                      {"end", sample.chunk.end},
                      {"w", sample.chunk.window},
                      {"o", sample.chunk.overlap}}},
                {"sink_prefix", words_json(sample.sink_prefix)},
                {"window_prefix", words_json(sample.window_prefix)},
                {"positions", positions}};
}

}  // namespace streamkv::io
