#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "streamkv/engine.hpp"
#include "support/reference.hpp"

using namespace streamkv;

namespace {

StreamConfig toy_config(std::uint64_t seed = 7) {
    StreamConfig cfg;
    cfg.model = ModelConfig{2, 2, 8, 32, 16, seed};
    cfg.t_sink = 1;
    cfg.t_window = 3;
    cfg.v_window_seconds = 1;
    cfg.fps = 1;
    cfg.frame_rows = 2;
    cfg.frame_cols = 2;  // V_window = 4 tokens
    cfg.text_budget_per_second = 2;
    return cfg;
}

// Replay every traced query against the double-precision reference forward.
void check_step_against_reference(const Engine& engine, double tol = 1e-5) {
    const auto& trace = engine.last_trace();
    REQUIRE(trace.has_value());
    const auto sec = engine.config().sections();
    for (const auto& q : trace->queries) {
        const auto expected =
            refmodel::forward(engine.model(), q.context, sec, engine.config().rope_base);
        REQUIRE(refmodel::rel_gap(q.logits, expected) <= tol);
    }
}

}  // namespace

TEST_CASE("first second equals full attention on the same prefix") {
    const StreamConfig cfg = toy_config();
    const auto events = synth_stream(5, 1, cfg);
    Engine streaming(cfg, EngineMode::reuse());
    Engine full(cfg, EngineMode::full());
    const auto a = streaming.step(events[0]);
    const auto b = full.step(events[0]);
    REQUIRE(a.tokens == b.tokens);
    REQUIRE(a.stats.context_len == b.stats.context_len);
}

TEST_CASE("12-second toy stream matches the recompute oracle") {
    const StreamConfig cfg = toy_config();
    SynthOptions synth;
    synth.narration_density = 0.8;
    synth.max_words = 2;
    const auto events = synth_stream(31, 12, cfg, synth);
    Engine engine(cfg, EngineMode::reuse());
    engine.set_trace(true);
    for (const auto& ev : events) {
        engine.step(ev);
        check_step_against_reference(engine);
    }
}

TEST_CASE("greedy decoding also matches the oracle") {
    StreamConfig cfg = toy_config(11);
    SynthOptions synth;
    synth.teacher_forced = false;
    const auto events = synth_stream(32, 8, cfg, synth);
    Engine engine(cfg, EngineMode::reuse());
    engine.set_trace(true);
    std::size_t total_tokens = 0;
    for (const auto& ev : events) {
        const auto res = engine.step(ev);
        total_tokens += res.tokens.size();
        check_step_against_reference(engine);
        REQUIRE(res.tokens.size() <=
                static_cast<std::size_t>(cfg.text_budget_per_second));
    }
    (void)total_tokens;
}

TEST_CASE("3D rotary mode matches the oracle through evictions") {
    StreamConfig cfg = toy_config(13);
    cfg.rope_mode = rope::Mode::ThreeD;
    cfg.fps = 2;  // two frames per second exercises per-frame time steps
    SynthOptions synth;
    synth.narration_density = 0.7;
    const auto events = synth_stream(33, 10, cfg, synth);
    Engine engine(cfg, EngineMode::reuse());
    engine.set_trace(true);
    for (const auto& ev : events) {
        engine.step(ev);
        check_step_against_reference(engine);
    }
}

TEST_CASE("overlap recompute and streaming reuse agree over 50 seconds") {
    const StreamConfig cfg = toy_config(17);
    SynthOptions synth;
    synth.narration_density = 0.75;
    const auto events = synth_stream(50, 50, cfg, synth);
    Engine reuse(cfg, EngineMode::reuse());
    Engine overlap(cfg, EngineMode::overlap());
    reuse.set_trace(true);
    overlap.set_trace(true);
    for (const auto& ev : events) {
        reuse.step(ev);
        overlap.step(ev);
        const auto& ta = reuse.last_trace();
        const auto& tb = overlap.last_trace();
        REQUIRE(ta->queries.size() == tb->queries.size());
        for (std::size_t q = 0; q < ta->queries.size(); ++q) {
            // identical retained sets and positions
            const auto& ca = ta->queries[q].context;
            const auto& cb = tb->queries[q].context;
            REQUIRE(ca.size() == cb.size());
            for (std::size_t i = 0; i < ca.size(); ++i) {
                REQUIRE(ca[i].logical == cb[i].logical);
                REQUIRE(ca[i].pos == cb[i].pos);
            }
            REQUIRE(refmodel::rel_gap(ta->queries[q].logits, tb->queries[q].logits) <= 1e-5);
        }
    }
}

TEST_CASE("all four modes coincide while nothing evicts or resets") {
    StreamConfig cfg = toy_config(19);
    cfg.t_sink = 64;
    cfg.t_window = 64;
    cfg.v_window_seconds = 64;
    const auto events = synth_stream(21, 5, cfg);  // far below every window
    std::vector<std::vector<int>> outputs;
    for (const auto mode : {EngineMode::reuse(), EngineMode::full(),
                            EngineMode::no_overlap(100), EngineMode::overlap()}) {
        std::vector<int> all;
        for (const auto& r : run_baseline(mode, events, cfg)) {
            all.insert(all.end(), r.tokens.begin(), r.tokens.end());
        }
        outputs.push_back(std::move(all));
    }
    REQUIRE(outputs[0] == outputs[1]);
    REQUIRE(outputs[0] == outputs[2]);
    REQUIRE(outputs[0] == outputs[3]);
}

TEST_CASE("noverlap resets kill all dependence on pre-reset events") {
    StreamConfig cfg = toy_config(23);
    SynthOptions synth;
    synth.teacher_forced = false;  // outputs must come from the model itself
    auto events = synth_stream(41, 9, cfg, synth);

    const auto base = run_baseline(EngineMode::no_overlap(3), events, cfg);

    // mutate everything before the reset at t = 3
    auto mutated = events;
    for (int s = 0; s < 3; ++s) {
        mutated[static_cast<std::size_t>(s)].frames[0].seed ^= 0xdeadbeefULL;
        mutated[static_cast<std::size_t>(s)].narration = std::vector<int>{9, 9};
    }
    const auto perturbed = run_baseline(EngineMode::no_overlap(3), mutated, cfg);

    bool diverged_before = false;
    for (std::size_t i = 0; i < 3; ++i) {
        if (base[i].tokens != perturbed[i].tokens) diverged_before = true;
    }
    REQUIRE(diverged_before);  // the mutation is actually visible pre-reset
    for (std::size_t i = 3; i < base.size(); ++i) {
        REQUIRE(base[i].tokens == perturbed[i].tokens);
    }
}

TEST_CASE("causality: future events never change past outputs") {
    const StreamConfig cfg = toy_config(29);
    SynthOptions synth;
    synth.teacher_forced = false;
    auto events = synth_stream(51, 6, cfg, synth);

    Engine a(cfg, EngineMode::reuse());
    std::vector<std::vector<int>> first;
    for (const auto& ev : events) first.push_back(a.step(ev).tokens);

    auto mutated = events;
    mutated[5].frames[0].seed ^= 0x1234ULL;
    Engine b(cfg, EngineMode::reuse());
    std::vector<std::vector<int>> second;
    for (const auto& ev : mutated) second.push_back(b.step(ev).tokens);

    for (std::size_t i = 0; i < 5; ++i) REQUIRE(first[i] == second[i]);
}

TEST_CASE("identical streams give identical outputs") {
    const StreamConfig cfg = toy_config(31);
    const auto events = synth_stream(61, 10, cfg);
    const auto a = run_baseline(EngineMode::reuse(), events, cfg);
    const auto b = run_baseline(EngineMode::reuse(), events, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].tokens == b[i].tokens);
        REQUIRE(a[i].stats.cache_len == b[i].stats.cache_len);
        REQUIRE(a[i].stats.max_pos == b[i].stats.max_pos);
    }
}

TEST_CASE("within a second all vision positions precede all text positions") {
    const StreamConfig cfg = toy_config(37);
    const auto events = synth_stream(71, 6, cfg);
    Engine engine(cfg, EngineMode::reuse());
    for (const auto& ev : events) {
        engine.step(ev);
        const auto view = engine.cache().retained_view();
        for (std::size_t i = 1; i < view.entries.size(); ++i) {
            const auto& prev = *view.entries[i - 1];
            const auto& cur = *view.entries[i];
            if (prev.second == cur.second && prev.second == ev.second) {
                // text never precedes vision inside the same second
                const bool text_then_vision =
                    prev.kind != EntryKind::Vision && cur.kind == EntryKind::Vision;
                REQUIRE_FALSE(text_then_vision);
            }
        }
    }
}

TEST_CASE("streaming context stays flat while full attention grows") {
    StreamConfig cfg = toy_config(41);
    cfg.t_sink = 4;
    cfg.t_window = 8;
    cfg.v_window_seconds = 2;
    SynthOptions synth;
    synth.min_words = 2;
    synth.max_words = 2;
    const auto events = synth_stream(81, 30, cfg, synth);

    const auto reuse = run_baseline(EngineMode::reuse(), events, cfg);
    const auto full = run_baseline(EngineMode::full(), events, cfg);

    // full attention: strictly increasing context
    for (std::size_t i = 1; i < full.size(); ++i) {
        REQUIRE(full[i].stats.context_len > full[i - 1].stats.context_len);
    }
    // streaming: constant after saturation
    const auto tail = reuse.back().stats.context_len;
    for (std::size_t i = 20; i < reuse.size(); ++i) {
        REQUIRE(reuse[i].stats.context_len == tail);
    }
    REQUIRE(full.back().stats.context_len > 3 * tail);
}

TEST_CASE("out-of-order events are rejected") {
    const StreamConfig cfg = toy_config(43);
    Engine engine(cfg, EngineMode::reuse());
    auto events = synth_stream(91, 2, cfg);
    engine.step(events[1]);
    REQUIRE_THROWS_AS(engine.step(events[0]), ContractError);
}

TEST_CASE("text budget of zero yields vision-only streaming") {
    StreamConfig cfg = toy_config(47);
    cfg.text_budget_per_second = 0;
    const auto events = synth_stream(101, 4, cfg);
    Engine engine(cfg, EngineMode::reuse());
    for (const auto& ev : events) {
        const auto res = engine.step(ev);
        REQUIRE(res.tokens.empty());
    }
    REQUIRE(engine.cache().text_size() == 0);
    REQUIRE(engine.cache().sink_size() == 0);
}
