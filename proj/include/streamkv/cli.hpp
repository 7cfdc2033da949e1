#pragma once

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "streamkv/bench.hpp"
#include "streamkv/cache.hpp"
#include "streamkv/datapipe.hpp"
#include "streamkv/engine.hpp"
#include "streamkv/io.hpp"
#include "streamkv/training.hpp"
#include "streamkv/verify.hpp"

namespace streamkv::cli {

// Exit codes: 0 ok, 1 usage/malformed input, 2 verification failure, 3 I/O.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitVerify = 2;
inline constexpr int kExitIo = 3;

namespace detail {

struct StreamFlags {
    StreamConfig cfg;
    std::uint64_t vision_tps = 0;  // 0: keep fps/rows/cols as given
    bool infinite_cache = false;
    std::string rope_mode = "1d";

    // Attach the shared cache/model/scheduling flags to a subcommand.
    void attach(CLI::App* app) {
        app->add_option("--t-sink", cfg.t_sink, "Sink text budget (tokens)");
        app->add_option("--t-window", cfg.t_window, "Recent text budget (tokens)");
        app->add_option("--v-window-s", cfg.v_window_seconds, "Vision window (seconds)");
        app->add_option("--fps", cfg.fps, "Frames per second");
        app->add_option("--vision-tps", vision_tps,
                        "Vision tokens per second (fps x rows x cols)");
        app->add_option("--frame-rows", cfg.frame_rows, "Patch grid rows per frame");
        app->add_option("--frame-cols", cfg.frame_cols, "Patch grid cols per frame");
        app->add_option("--text-budget", cfg.text_budget_per_second,
                        "Max text tokens per second");
        app->add_option("--seed", cfg.model.seed, "Model/stream seed");
        app->add_option("--rope-mode", rope_mode, "Rotary index mode: 1d or 3d")
            ->check(CLI::IsMember({"1d", "3d"}));
        app->add_option("--rope-base", cfg.rope_base, "Rotary base frequency");
        app->add_option("--layers", cfg.model.num_layers, "Decoder layers");
        app->add_option("--heads", cfg.model.num_heads, "Attention heads");
        app->add_option("--head-dim", cfg.model.head_dim, "Per-head dimension (even)");
        app->add_option("--vocab", cfg.model.vocab_size, "Vocabulary size");
        app->add_option("--ffn", cfg.model.ffn_dim, "Feed-forward dimension");
        app->add_flag("--infinite-cache", infinite_cache,
                      "Disable eviction entirely (unbounded budgets)");
    }

    StreamConfig resolve() const {
        StreamConfig out = cfg;
        out.rope_mode = rope_mode == "3d" ? rope::Mode::ThreeD : rope::Mode::OneD;
        if (vision_tps > 0) {
            if (out.fps <= 0 || vision_tps % static_cast<std::uint64_t>(out.fps) != 0) {
                throw ValidationError("--vision-tps must be a multiple of --fps");
            }
            const std::uint64_t per_frame = vision_tps / static_cast<std::uint64_t>(out.fps);
            out.frame_rows = static_cast<int>(per_frame);
            out.frame_cols = 1;
        }
        if (infinite_cache) {
            out.t_sink = kUnbounded;
            out.t_window = kUnbounded;
            out.v_window_seconds = kUnbounded;
        }
        out.validate();
        return out;
    }
};

inline void write_or_print(const std::string& out_path, const std::string& content,
                           std::ostream& fallback) {
    if (out_path.empty()) {
        fallback << content;
    } else {
        io::write_file(out_path, content);
    }
}

}  // namespace detail

// `streamkv stream`: run one engine mode over a JSONL event file and emit one
// JSON line per second: {"second", "tokens", "latency_us", "cache_len",
// "max_pos"}.
inline int cmd_stream(const std::string& events_path, const std::string& mode_name,
                      std::int64_t chunk_len, const StreamConfig& cfg,
                      const std::string& out_path, const std::string& dump_cache_path,
                      const std::string& load_cache_path, std::ostream& os) {
    const auto events = io::load_events_jsonl(events_path);
    Engine engine(cfg, bench::parse_mode(mode_name, chunk_len));
    if (!load_cache_path.empty()) {
        const auto snapshot = io::parse_json(io::read_file(load_cache_path), load_cache_path);
        io::cache_from_json(snapshot, engine.cache());
        engine.resume_after_restore();
    }
    std::string out;
    for (const auto& ev : events) {
        const StepResult res = engine.step(ev);
        out += io::step_to_json(res).dump();
        out += '\n';
    }
    detail::write_or_print(out_path, out, os);
    if (!dump_cache_path.empty()) {
        io::write_file(dump_cache_path, io::cache_to_json(engine.cache()).dump(2) + "\n");
    }
    return kExitOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& os = std::cout,
                   std::ostream& err = std::cerr) {
    CLI::App app{"Streaming vision-language KV cache engine and data tools"};
    app.require_subcommand(1);

    // --- stream ---
    auto* stream_cmd = app.add_subcommand("stream", "Run an engine over a JSONL event file");
    detail::StreamFlags stream_flags;
    stream_flags.attach(stream_cmd);
    std::string events_path, stream_out, stream_mode = "reuse";
    std::string dump_cache_path, load_cache_path;
    std::int64_t stream_chunk = 100;
    stream_cmd->add_option("--events", events_path, "JSONL event file")->required();
    stream_cmd->add_option("--mode", stream_mode, "reuse | full | noverlap | overlap")
        ->check(CLI::IsMember({"reuse", "full", "noverlap", "overlap"}));
    stream_cmd->add_option("--chunk", stream_chunk, "noverlap reset period (seconds)");
    stream_cmd->add_option("--out", stream_out, "Output JSONL path (default stdout)");
    stream_cmd->add_option("--dump-cache", dump_cache_path, "Write cache snapshot JSON");
    stream_cmd->add_option("--load-cache", load_cache_path, "Warm-start cache snapshot JSON");

    // --- bench ---
    auto* bench_cmd = app.add_subcommand("bench", "Latency/memory benchmark across modes");
    detail::StreamFlags bench_flags;
    bench_flags.cfg.t_sink = 64;
    bench_flags.cfg.t_window = 64;
    bench_flags.cfg.v_window_seconds = 4;
    bench_flags.cfg.fps = 2;
    bench_flags.cfg.frame_rows = 2;
    bench_flags.cfg.frame_cols = 2;
    bench_flags.cfg.text_budget_per_second = 4;
    bench_flags.attach(bench_cmd);
    std::string bench_modes = "reuse,full,noverlap";
    std::string bench_out;
    bench::BenchOptions bench_opt;
    bench_cmd->add_option("--modes", bench_modes, "Comma-separated engine modes");
    bench_cmd->add_option("--seconds", bench_opt.seconds, "Simulated seconds (with warmup)");
    bench_cmd->add_option("--warmup", bench_opt.warmup_seconds, "Warmup seconds to discard");
    bench_cmd->add_option("--reps", bench_opt.reps, "Repetitions per mode");
    bench_cmd->add_option("--chunk", bench_opt.chunk_len_s, "noverlap reset period (seconds)");
    bench_cmd->add_option("--narration", bench_opt.narration_tokens,
                          "Forced narration tokens per second");
    bench_cmd->add_option("--ceiling", bench_opt.context_ceiling,
                          "FullAttention context ceiling");
    bench_cmd->add_flag("--parallel", bench_opt.parallel,
                        "Run modes concurrently (correctness only; timings interfere)");
    bench_cmd->add_option("--out", bench_out, "Output prefix for .json and .csv");

    // --- verify ---
    auto* verify_cmd =
        app.add_subcommand("verify", "Streaming-vs-recompute oracle suite (exit 2 on failure)");
    verify::VerifyOptions verify_opt;
    verify_cmd->add_option("--seed", verify_opt.seed, "Base seed");
    verify_cmd->add_option("--seconds", verify_opt.seconds, "Stream length per case");
    verify_cmd->add_option("--streams", verify_opt.streams, "Randomized cases to run");

    // --- datapipe commands ---
    std::string transcript_path, data_out;
    double chunk_w = 24.0, chunk_o = 12.0;
    std::int64_t min_words_flag = -1;

    auto* chunk_cmd = app.add_subcommand("chunk", "Overlapped SFT segmentation of a transcript");
    chunk_cmd->add_option("--transcript", transcript_path, "Transcript JSON")->required();
    chunk_cmd->add_option("--w", chunk_w, "Chunk length W (seconds)");
    chunk_cmd->add_option("--o", chunk_o, "Chunk overlap O (seconds)");
    chunk_cmd->add_option("--min-words", min_words_flag, "Min words per chunk (default 2W)");
    chunk_cmd->add_option("--out", data_out, "Output JSONL path (default stdout)");

    auto* anneal_cmd = app.add_subcommand("anneal", "Select high-density annealing clips");
    datapipe::AnnealingFilters anneal_filters;
    anneal_cmd->add_option("--transcript", transcript_path, "Transcript JSON")->required();
    anneal_cmd->add_option("--min-duration", anneal_filters.min_duration, "Min clip seconds");
    anneal_cmd->add_option("--max-duration", anneal_filters.max_duration, "Max clip seconds");
    anneal_cmd->add_option("--max-silence", anneal_filters.max_silence,
                           "Max internal silence (seconds)");
    anneal_cmd->add_option("--words-per-second", anneal_filters.words_per_second,
                           "Required words per second of duration");
    anneal_cmd->add_option("--realtime-min", anneal_filters.realtime_min,
                           "Required realtime-word fraction");
    anneal_cmd->add_option("--out", data_out, "Output JSONL path (default stdout)");

    auto* evalseg_cmd = app.add_subcommand("evalseg", "Fixed-length evaluation segments");
    double game_length = -1.0, seg_len = 100.0;
    std::int64_t seg_min_words = 200;
    evalseg_cmd->add_option("--transcript", transcript_path, "Transcript JSON")->required();
    evalseg_cmd->add_option("--game-length", game_length,
                            "Game length in seconds (default: transcript end)");
    evalseg_cmd->add_option("--seg-len", seg_len, "Segment length (seconds)");
    evalseg_cmd->add_option("--min-words", seg_min_words, "Min words per segment");
    evalseg_cmd->add_option("--out", data_out, "Output JSONL path (default stdout)");

    auto* mksample_cmd =
        app.add_subcommand("mksample", "Assemble one interleaved training sample");
    detail::StreamFlags sample_flags;
    double sample_start = 0.0;
    mksample_cmd->add_option("--transcript", transcript_path, "Transcript JSON")->required();
    mksample_cmd->add_option("--chunk-start", sample_start, "Chunk start (seconds)");
    mksample_cmd->add_option("--w", chunk_w, "Chunk length W (seconds)");
    mksample_cmd->add_option("--o", chunk_o, "Chunk overlap O (seconds)");
    sample_flags.attach(mksample_cmd);
    mksample_cmd->add_option("--out", data_out, "Output JSON path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        os << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        os << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*stream_cmd) {
            return cmd_stream(events_path, stream_mode, stream_chunk, stream_flags.resolve(),
                              stream_out, dump_cache_path, load_cache_path, os);
        }
        if (*bench_cmd) {
            const StreamConfig cfg = bench_flags.resolve();
            bench_opt.seed = cfg.model.seed;  // one --seed drives model and stream
            std::vector<EngineMode> modes;
            std::stringstream ss(bench_modes);
            std::string name;
            while (std::getline(ss, name, ',')) {
                if (!name.empty()) modes.push_back(bench::parse_mode(name, bench_opt.chunk_len_s));
            }
            if (modes.empty()) throw ValidationError("bench: no modes given");
            const auto report = bench::run_bench(modes, bench_opt, cfg);
            const std::string json_text = bench::report_to_json(report).dump(2) + "\n";
            const std::string csv_text = bench::report_to_csv(report);
            if (bench_out.empty()) {
                os << json_text;
            } else {
                io::write_file(bench_out + ".json", json_text);
                io::write_file(bench_out + ".csv", csv_text);
            }
            return kExitOk;
        }
        if (*verify_cmd) {
            return verify::run_verify(verify_opt, os) ? kExitOk : kExitVerify;
        }
        if (*chunk_cmd) {
            const auto sentences = io::load_transcript(transcript_path);
            const auto timeline = datapipe::apply_decisions(sentences);
            const std::size_t min_words = min_words_flag >= 0
                                              ? static_cast<std::size_t>(min_words_flag)
                                              : static_cast<std::size_t>(2.0 * chunk_w);
            const auto chunks = datapipe::chunk_transcript(timeline, chunk_w, chunk_o, min_words);
            std::string out;
            for (const auto& c : chunks) {
                out += io::chunk_to_json(c, min_words).dump();
                out += '\n';
            }
            detail::write_or_print(data_out, out, os);
            return kExitOk;
        }
        if (*anneal_cmd) {
            const auto sentences = io::load_transcript(transcript_path);
            const auto timeline = datapipe::apply_decisions(sentences);
            const auto clips = datapipe::select_annealing_clips(timeline, anneal_filters);
            std::string out;
            for (const auto& c : clips) {
                out += io::clip_to_json(c, anneal_filters).dump();
                out += '\n';
            }
            detail::write_or_print(data_out, out, os);
            return kExitOk;
        }
        if (*evalseg_cmd) {
            const auto sentences = io::load_transcript(transcript_path);
            const auto timeline = datapipe::apply_decisions(sentences);
            const double length = game_length >= 0.0 ? game_length
                                                     : datapipe::timeline_end(timeline);
            const auto segments = datapipe::extract_eval_segments(
                timeline, length, seg_len, static_cast<std::size_t>(seg_min_words));
            std::string out;
            for (const auto& s : segments) {
                out += io::segment_to_json(s, static_cast<std::size_t>(seg_min_words)).dump();
                out += '\n';
            }
            detail::write_or_print(data_out, out, os);
            return kExitOk;
        }
        if (*mksample_cmd) {
            const auto sentences = io::load_transcript(transcript_path);
            const auto timeline = datapipe::apply_decisions(sentences);
            const datapipe::ChunkSpec spec{sample_start, sample_start + chunk_w, chunk_w,
                                           chunk_o};
            const auto sample =
                build_training_sample(timeline, spec, sample_flags.resolve());
            detail::write_or_print(data_out, io::sample_to_json(sample).dump(2) + "\n", os);
            return kExitOk;
        }
    } catch (const IoError& e) {
        err << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& os = std::cout,
                   std::ostream& err = std::cerr) {
    std::vector<std::string> full;
    full.push_back("streamkv");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const auto& a : full) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), os, err);
}

}  // namespace streamkv::cli
