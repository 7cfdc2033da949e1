#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "streamkv/engine.hpp"
#include "streamkv/errors.hpp"

namespace streamkv::bench {

using json = nlohmann::json;

struct LatencyRecord {
    std::int64_t second = 0;
    double per_token_latency_us = 0.0;
    std::size_t context_len = 0;
    std::size_t peak_cache_entries = 0;
};

struct ModeSummary {
    double first_decile_median_us = 0.0;
    double last_decile_median_us = 0.0;
    double growth_ratio = 0.0;  // last decile / first decile
    std::size_t max_context = 0;
    std::vector<double> segment_medians;  // five equal segments of the run
};

struct ModeSeries {
    std::string mode;
    std::vector<LatencyRecord> records;
    ModeSummary summary;
    // Second at which FullAttention crossed the context ceiling, if it did;
    // the run stops there instead of crashing.
    std::optional<std::int64_t> exceeded_context_at;
};

struct BenchOptions {
    std::int64_t seconds = 660;        // total simulated, warmup included
    std::int64_t warmup_seconds = 60;  // discarded from the recorded series
    int reps = 5;                      // latency = per-second median over reps
    std::uint64_t seed = 0;
    int narration_tokens = 3;  // fixed teacher-forced tokens per second
    std::size_t context_ceiling = 2000000;
    std::int64_t chunk_len_s = 100;  // SlidingNoOverlap period
    bool parallel = false;           // timing runs should stay sequential

    void validate() const {
        if (seconds <= warmup_seconds) {
            throw ConfigError("bench: stream must be longer than the warmup");
        }
        if (warmup_seconds < 0 || reps <= 0 || narration_tokens <= 0) {
            throw ConfigError("bench: warmup/reps/narration must be positive");
        }
    }
};

struct BenchReport {
    int schema_version = 1;
    BenchOptions options;
    StreamConfig stream;
    std::vector<ModeSeries> modes;
};

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline EngineMode parse_mode(const std::string& name, std::int64_t chunk_len_s) {
    if (name == "reuse") return EngineMode::reuse();
    if (name == "full") return EngineMode::full();
    if (name == "overlap") return EngineMode::overlap();
    if (name == "noverlap") return EngineMode::no_overlap(chunk_len_s);
    throw ValidationError("unknown engine mode: " + name);
}

// Lag of the dominant autocorrelation peak of a mean-removed series. Each
// lag is normalized by its term count, and the search skips the zero-lag
// shoulder (everything before the ACF first dips below zero, or before its
// first local minimum when it never does). Used to detect the reset period
// of SlidingNoOverlap.
inline std::size_t autocorr_peak_lag(std::span<const double> x, std::size_t min_lag,
                                     std::size_t max_lag) {
    if (x.size() < min_lag + 2) throw ValidationError("autocorr: series too short");
    max_lag = std::min(max_lag, x.size() - 2);
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double c0 = 0.0;
    for (double v : x) c0 += (v - mean) * (v - mean);
    c0 /= static_cast<double>(n);
    if (c0 == 0.0) return min_lag;

    std::vector<double> r(max_lag + 1, 0.0);
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        double acc = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) {
            acc += (x[i] - mean) * (x[i + lag] - mean);
        }
        r[lag] = acc / static_cast<double>(n - lag) / c0;
    }

    std::size_t search_from = 1;
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        if (r[lag] < 0.0) {
            search_from = lag + 1;
            break;
        }
        if (lag + 1 <= max_lag && lag >= 2 && r[lag] < r[lag - 1] && r[lag] < r[lag + 1]) {
            search_from = lag + 1;
            break;
        }
    }
    const std::size_t lo = std::max(min_lag, search_from);
    double best = -2.0;
    for (std::size_t lag = lo; lag <= max_lag; ++lag) best = std::max(best, r[lag]);
    // every multiple of the period peaks equally; take the fundamental
    for (std::size_t lag = lo; lag <= max_lag; ++lag) {
        if (r[lag] >= best - 0.05) return lag;
    }
    return lo;
}

namespace detail {

inline ModeSummary summarize(const std::vector<LatencyRecord>& records) {
    ModeSummary s;
    if (records.empty()) return s;
    std::vector<double> lat;
    lat.reserve(records.size());
    for (const auto& r : records) {
        lat.push_back(r.per_token_latency_us);
        s.max_context = std::max(s.max_context, r.context_len);
    }
    const std::size_t decile = std::max<std::size_t>(1, records.size() / 10);
    s.first_decile_median_us = median({lat.begin(), lat.begin() + decile});
    s.last_decile_median_us = median({lat.end() - decile, lat.end()});
    s.growth_ratio = s.first_decile_median_us > 0.0
                         ? s.last_decile_median_us / s.first_decile_median_us
                         : 0.0;
    const std::size_t seg = std::max<std::size_t>(1, records.size() / 5);
    for (std::size_t k = 0; k < 5 && k * seg < records.size(); ++k) {
        const std::size_t lo = k * seg;
        const std::size_t hi = k == 4 ? records.size() : std::min(records.size(), lo + seg);
        s.segment_medians.push_back(median({lat.begin() + lo, lat.begin() + hi}));
    }
    return s;
}

inline ModeSeries run_mode(const EngineMode& mode, std::span<const StreamEvent> events,
                           const StreamConfig& cfg, const BenchOptions& opt) {
    ModeSeries series;
    series.mode = mode.name();

    // One untimed burn-in pass brings caches and the CPU clock state to
    // steady conditions before any measurement.
    {
        Engine burn(cfg, mode);
        for (const auto& ev : events) {
            const StepResult res = burn.step(ev);
            if (mode.kind == EngineMode::Kind::FullAttention &&
                res.stats.context_len > opt.context_ceiling) {
                break;
            }
        }
    }

    // latency_ns[rep][i] aligned with events; stats taken from rep 0.
    std::vector<std::vector<std::int64_t>> latency_ns(static_cast<std::size_t>(opt.reps));
    std::vector<StepStats> stats;
    std::optional<std::int64_t> exceeded;
    for (int rep = 0; rep < opt.reps; ++rep) {
        Engine engine(cfg, mode);
        for (const auto& ev : events) {
            const auto t0 = std::chrono::steady_clock::now();
            StepResult res = engine.step(ev);
            const auto t1 = std::chrono::steady_clock::now();
            latency_ns[static_cast<std::size_t>(rep)].push_back(
                std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
            if (rep == 0) stats.push_back(res.stats);
            if (mode.kind == EngineMode::Kind::FullAttention &&
                res.stats.context_len > opt.context_ceiling) {
                exceeded = ev.second;
                break;
            }
        }
    }
    series.exceeded_context_at = exceeded;

    // Aggregate the repetitions with the minimum: repeated timings of the
    // same deterministic step differ only by interference from the shared
    // machine, so the smallest observation is the cleanest estimate of the
    // compute cost. The reps are spread seconds apart in wall time, which
    // lets each stream second escape transient slow phases.
    for (std::size_t i = 0; i < stats.size(); ++i) {
        if (stats[i].second < opt.warmup_seconds) continue;
        std::int64_t best_ns = std::numeric_limits<std::int64_t>::max();
        for (const auto& rep : latency_ns) {
            if (i < rep.size()) best_ns = std::min(best_ns, rep[i]);
        }
        LatencyRecord rec;
        rec.second = stats[i].second;
        rec.per_token_latency_us =
            static_cast<double>(best_ns) / 1000.0 /
            static_cast<double>(std::max<std::size_t>(1, stats[i].text_tokens));
        rec.context_len = stats[i].context_len;
        rec.peak_cache_entries = stats[i].peak_cache_entries;
        series.records.push_back(rec);
    }
    series.summary = summarize(series.records);
    return series;
}

}  // namespace detail

// Drive every mode over the same seeded, teacher-forced synthetic stream and
// collect per-second latency records. Wall time is measured around the step
// compute only; the first warmup_seconds are discarded; each second reports
// the median over `reps` identical runs.
inline BenchReport run_bench(const std::vector<EngineMode>& modes, const BenchOptions& opt,
                             const StreamConfig& cfg) {
    opt.validate();
    cfg.validate();
    SynthOptions synth;
    synth.narration_density = 1.0;
    synth.min_words = opt.narration_tokens;
    synth.max_words = opt.narration_tokens;
    synth.teacher_forced = true;
    const auto events = synth_stream(opt.seed, opt.seconds, cfg, synth);

    BenchReport report;
    report.options = opt;
    report.stream = cfg;
    report.modes.resize(modes.size());
    if (opt.parallel) {
        std::vector<std::thread> workers;
        for (std::size_t i = 0; i < modes.size(); ++i) {
            workers.emplace_back([&, i] {
                report.modes[i] = detail::run_mode(modes[i], events, cfg, opt);
            });
        }
        for (auto& w : workers) w.join();
    } else {
        for (std::size_t i = 0; i < modes.size(); ++i) {
            report.modes[i] = detail::run_mode(modes[i], events, cfg, opt);
        }
    }
    return report;
}

// ---- report serialization --------------------------------------------------

inline json record_to_json(const LatencyRecord& r) {
    return json{{"second", r.second},
                {"per_token_latency_us", r.per_token_latency_us},
                {"context_len", r.context_len},
                {"peak_cache_entries", r.peak_cache_entries}};
}

inline json report_to_json(const BenchReport& rep) {
    json modes = json::array();
    for (const auto& m : rep.modes) {
        json records = json::array();
        for (const auto& r : m.records) records.push_back(record_to_json(r));
        json summary{{"first_decile_median_us", m.summary.first_decile_median_us},
                     {"last_decile_median_us", m.summary.last_decile_median_us},
                     {"growth_ratio", m.summary.growth_ratio},
                     {"max_context", m.summary.max_context},
                     {"segment_medians", m.summary.segment_medians}};
        json jm{{"mode", m.mode}, {"summary", summary}, {"records", records}};
        if (m.exceeded_context_at) {
            jm["exceeded_context_at"] = *m.exceeded_context_at;
        } else {
            jm["exceeded_context_at"] = nullptr;
        }
        modes.push_back(std::move(jm));
    }
    return json{
        {"schema_version", rep.schema_version},
        {"config",
         json{{"seed", rep.options.seed},
              {"seconds", rep.options.seconds},
              {"warmup_seconds", rep.options.warmup_seconds},
              {"reps", rep.options.reps},
              {"narration_tokens", rep.options.narration_tokens},
              {"context_ceiling", rep.options.context_ceiling},
              {"chunk_len_s", rep.options.chunk_len_s},
              {"parallel", rep.options.parallel},
              {"stream",
               json{{"t_sink", rep.stream.t_sink},
                    {"t_window", rep.stream.t_window},
                    {"v_window_seconds", rep.stream.v_window_seconds},
                    {"fps", rep.stream.fps},
                    {"frame_rows", rep.stream.frame_rows},
                    {"frame_cols", rep.stream.frame_cols},
                    {"text_budget_per_second", rep.stream.text_budget_per_second},
                    {"rope_mode", rope::mode_name(rep.stream.rope_mode)},
                    {"rope_base", rep.stream.rope_base}}},
              {"model",
               json{{"num_layers", rep.stream.model.num_layers},
                    {"num_heads", rep.stream.model.num_heads},
                    {"head_dim", rep.stream.model.head_dim},
                    {"vocab_size", rep.stream.model.vocab_size},
                    {"ffn_dim", rep.stream.model.ffn_dim},
                    {"seed", rep.stream.model.seed}}}}},
        {"modes", modes}};
}

inline BenchReport report_from_json(const json& j) {
    BenchReport rep;
    try {
        rep.schema_version = j.at("schema_version").get<int>();
        const auto& c = j.at("config");
        rep.options.seed = c.at("seed").get<std::uint64_t>();
        rep.options.seconds = c.at("seconds").get<std::int64_t>();
        rep.options.warmup_seconds = c.at("warmup_seconds").get<std::int64_t>();
        rep.options.reps = c.at("reps").get<int>();
        rep.options.narration_tokens = c.at("narration_tokens").get<int>();
        rep.options.context_ceiling = c.at("context_ceiling").get<std::size_t>();
        rep.options.chunk_len_s = c.at("chunk_len_s").get<std::int64_t>();
        rep.options.parallel = c.at("parallel").get<bool>();
        const auto& s = c.at("stream");
        rep.stream.t_sink = s.at("t_sink").get<std::size_t>();
        rep.stream.t_window = s.at("t_window").get<std::size_t>();
        rep.stream.v_window_seconds = s.at("v_window_seconds").get<std::size_t>();
        rep.stream.fps = s.at("fps").get<int>();
        rep.stream.frame_rows = s.at("frame_rows").get<int>();
        rep.stream.frame_cols = s.at("frame_cols").get<int>();
        rep.stream.text_budget_per_second = s.at("text_budget_per_second").get<int>();
        rep.stream.rope_mode = s.at("rope_mode").get<std::string>() == "3d"
                                   ? rope::Mode::ThreeD
                                   : rope::Mode::OneD;
        rep.stream.rope_base = s.at("rope_base").get<double>();
        const auto& m = c.at("model");
        rep.stream.model.num_layers = m.at("num_layers").get<int>();
        rep.stream.model.num_heads = m.at("num_heads").get<int>();
        rep.stream.model.head_dim = m.at("head_dim").get<int>();
        rep.stream.model.vocab_size = m.at("vocab_size").get<int>();
        rep.stream.model.ffn_dim = m.at("ffn_dim").get<int>();
        rep.stream.model.seed = m.at("seed").get<std::uint64_t>();
        for (const auto& jm : j.at("modes")) {
            ModeSeries series;
            series.mode = jm.at("mode").get<std::string>();
            if (!jm.at("exceeded_context_at").is_null()) {
                series.exceeded_context_at = jm.at("exceeded_context_at").get<std::int64_t>();
            }
            const auto& sum = jm.at("summary");
            series.summary.first_decile_median_us = sum.at("first_decile_median_us").get<double>();
            series.summary.last_decile_median_us = sum.at("last_decile_median_us").get<double>();
            series.summary.growth_ratio = sum.at("growth_ratio").get<double>();
            series.summary.max_context = sum.at("max_context").get<std::size_t>();
            series.summary.segment_medians =
                sum.at("segment_medians").get<std::vector<double>>();
            for (const auto& jr : jm.at("records")) {
                LatencyRecord r;
                r.second = jr.at("second").get<std::int64_t>();
                r.per_token_latency_us = jr.at("per_token_latency_us").get<double>();
                r.context_len = jr.at("context_len").get<std::size_t>();
                r.peak_cache_entries = jr.at("peak_cache_entries").get<std::size_t>();
                series.records.push_back(r);
            }
            rep.modes.push_back(std::move(series));
        }
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("malformed bench report: ") + ex.what());
    }
    return rep;
}

// CSV: one row per record, shortest-round-trip float formatting so that
// parse -> re-emit is byte-identical.
inline std::string report_to_csv(const BenchReport& rep) {
    std::string out = "mode,second,per_token_latency_us,context_len,peak_cache_entries\n";
    for (const auto& m : rep.modes) {
        for (const auto& r : m.records) {
            out += m.mode;
            out += ',';
            out += std::to_string(r.second);
            out += ',';
            out += json(r.per_token_latency_us).dump();
            out += ',';
            out += std::to_string(r.context_len);
            out += ',';
            out += std::to_string(r.peak_cache_entries);
            out += '\n';
        }
    }
    return out;
}

struct CsvRow {
    std::string mode;
    LatencyRecord record;
};

inline std::vector<CsvRow> parse_csv(const std::string& text) {
    std::vector<CsvRow> rows;
    std::size_t pos = 0;
    bool first = true;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        if (first) {
            if (line != "mode,second,per_token_latency_us,context_len,peak_cache_entries") {
                throw ValidationError("csv: unexpected header");
            }
            first = false;
            continue;
        }
        std::vector<std::string> fields;
        std::size_t p = 0;
        while (true) {
            const std::size_t comma = line.find(',', p);
            fields.push_back(line.substr(p, comma - p));
            if (comma == std::string::npos) break;
            p = comma + 1;
        }
        if (fields.size() != 5) throw ValidationError("csv: expected 5 fields");
        CsvRow row;
        row.mode = fields[0];
        row.record.second = std::stoll(fields[1]);
        row.record.per_token_latency_us = std::stod(fields[2]);
        row.record.context_len = static_cast<std::size_t>(std::stoull(fields[3]));
        row.record.peak_cache_entries = static_cast<std::size_t>(std::stoull(fields[4]));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string rows_to_csv(const std::vector<CsvRow>& rows) {
    std::string out = "mode,second,per_token_latency_us,context_len,peak_cache_entries\n";
    for (const auto& row : rows) {
        out += row.mode;
        out += ',';
        out += std::to_string(row.record.second);
        out += ',';
        out += json(row.record.per_token_latency_us).dump();
        out += ',';
        out += std::to_string(row.record.context_len);
        out += ',';
        out += std::to_string(row.record.peak_cache_entries);
        out += '\n';
    }
    return out;
}

}  // namespace streamkv::bench
