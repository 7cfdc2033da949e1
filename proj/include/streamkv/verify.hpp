#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "streamkv/engine.hpp"
#include "streamkv/prng.hpp"

namespace streamkv::verify {

struct VerifyOptions {
    std::uint64_t seed = 7;
    std::int64_t seconds = 30;
    int streams = 20;
};

// max |a - b| over the vector, scaled by the larger infinity norm.
inline double rel_logit_gap(const Vec& a, const Vec& b) {
    double max_abs = 0.0, max_diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        max_abs = std::max({max_abs, std::abs(double(a[i])), std::abs(double(b[i]))});
        max_diff = std::max(max_diff, std::abs(double(a[i]) - double(b[i])));
    }
    return max_abs > 0.0 ? max_diff / max_abs : max_diff;
}

// Case 0 is the running toy example (sink 1 / text 3 / vision 4 s); case 1 is
// the full-scale default preset; the rest draw small random budgets, grids
// and rotary modes.
inline StreamConfig verify_config(int case_idx, std::uint64_t seed) {
    StreamConfig cfg;
    cfg.model = ModelConfig{2, 2, 8, 32, 16, mix64(seed, static_cast<std::uint64_t>(case_idx))};
    cfg.text_budget_per_second = 4;
    if (case_idx == 0) {
        cfg.t_sink = 1;
        cfg.t_window = 3;
        cfg.v_window_seconds = 1;
        cfg.fps = 1;
        cfg.frame_rows = 2;
        cfg.frame_cols = 2;  // one 4-token second in the vision window
        return cfg;
    }
    if (case_idx == 1) {
        cfg.t_sink = 512;
        cfg.t_window = 512;
        cfg.v_window_seconds = 16;
        cfg.fps = 2;
        cfg.frame_rows = 2;
        cfg.frame_cols = 2;
        cfg.rope_mode = rope::Mode::ThreeD;
        return cfg;
    }
    Rng rng(mix64(seed, 0x76666721ULL, static_cast<std::uint64_t>(case_idx)));
    cfg.t_sink = static_cast<std::size_t>(rng.range(0, 6));
    cfg.t_window = static_cast<std::size_t>(rng.range(0, 10));
    cfg.v_window_seconds = static_cast<std::size_t>(rng.range(0, 3));
    cfg.fps = static_cast<int>(rng.range(1, 2));
    cfg.frame_rows = static_cast<int>(rng.range(1, 2));
    cfg.frame_cols = static_cast<int>(rng.range(1, 2));
    cfg.rope_mode = rng.chance(0.5) ? rope::Mode::ThreeD : rope::Mode::OneD;
    cfg.model.num_layers = static_cast<int>(rng.range(1, 2));
    return cfg;
}

// Run StreamingReuse and SlidingOverlap over the same stream and demand:
// per-query logits agree within 1e-5, retained sets match exactly, tier
// budgets hold after every step, and rotary indices stay bounded by the
// retained size plus the step's additions.
inline bool verify_stream(const StreamConfig& cfg, std::uint64_t stream_seed,
                          std::int64_t seconds, std::string& failure) {
    SynthOptions synth;
    synth.teacher_forced = true;
    synth.narration_density = 0.8;
    synth.max_words = std::min(3, cfg.text_budget_per_second);
    synth.min_words = 1;
    const auto events = synth_stream(stream_seed, seconds, cfg, synth);

    Engine reuse(cfg, EngineMode::reuse());
    Engine recompute(cfg, EngineMode::overlap());
    reuse.set_trace(true);
    recompute.set_trace(true);

    std::size_t prev_cache_len = 0;
    for (const auto& ev : events) {
        const StepResult a = reuse.step(ev);
        const StepResult b = recompute.step(ev);

        const auto& ta = reuse.last_trace();
        const auto& tb = recompute.last_trace();
        if (!ta || !tb || ta->queries.size() != tb->queries.size()) {
            failure = "query count mismatch at second " + std::to_string(ev.second);
            return false;
        }
        for (std::size_t q = 0; q < ta->queries.size(); ++q) {
            const double gap = rel_logit_gap(ta->queries[q].logits, tb->queries[q].logits);
            if (!(gap <= 1e-5)) {
                failure = "logit gap " + std::to_string(gap) + " at second " +
                          std::to_string(ev.second);
                return false;
            }
            const auto& ca = ta->queries[q].context;
            const auto& cb = tb->queries[q].context;
            if (ca.size() != cb.size()) {
                failure = "retained size mismatch at second " + std::to_string(ev.second);
                return false;
            }
            for (std::size_t i = 0; i < ca.size(); ++i) {
                if (ca[i].logical != cb[i].logical || !(ca[i].pos == cb[i].pos)) {
                    failure = "retained set mismatch at second " + std::to_string(ev.second);
                    return false;
                }
            }
        }

        const auto& cache = reuse.cache();
        if (cache.sink_size() > cfg.t_sink || cache.text_size() > cfg.t_window ||
            cache.vision_size() > cfg.v_window_tokens()) {
            failure = "tier budget violated at second " + std::to_string(ev.second);
            return false;
        }
        const std::int64_t additions =
            static_cast<std::int64_t>(cfg.vision_tokens_per_second() + a.stats.text_tokens) +
            std::max(cfg.frame_rows, cfg.frame_cols);
        if (a.stats.max_pos > static_cast<std::int64_t>(prev_cache_len) + additions) {
            failure = "rotary index " + std::to_string(a.stats.max_pos) +
                      " exceeds bound at second " + std::to_string(ev.second);
            return false;
        }
        prev_cache_len = a.stats.cache_len;

        // contiguity under 1D remapping
        if (cfg.rope_mode == rope::Mode::OneD) {
            const auto view = cache.retained_view();
            for (std::size_t i = 0; i < view.positions.size(); ++i) {
                if (view.positions[i].t != static_cast<std::int64_t>(i)) {
                    failure = "non-contiguous index at second " + std::to_string(ev.second);
                    return false;
                }
            }
        }
        if (b.stats.cache_len != a.stats.cache_len) {
            failure = "cache size diverged at second " + std::to_string(ev.second);
            return false;
        }
    }
    return true;
}

inline bool run_verify(const VerifyOptions& opt, std::ostream& os) {
    bool all_ok = true;
    for (int i = 0; i < opt.streams; ++i) {
        const StreamConfig cfg = verify_config(i, opt.seed);
        std::string failure;
        const bool ok =
            verify_stream(cfg, mix64(opt.seed, 0x73ULL, static_cast<std::uint64_t>(i)),
                          opt.seconds, failure);
        os << (ok ? "[ok]   " : "[FAIL] ") << "case " << i << " (sink " << cfg.t_sink
           << ", text " << cfg.t_window << ", vision " << cfg.v_window_seconds << " s, "
           << rope::mode_name(cfg.rope_mode) << ")";
        if (!ok) os << ": " << failure;
        os << "\n";
        all_ok = all_ok && ok;
    }
    os << (all_ok ? "verification passed" : "verification FAILED") << "\n";
    return all_ok;
}

}  // namespace streamkv::verify
