#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "streamkv/errors.hpp"
#include "streamkv/prng.hpp"

namespace streamkv::rope {

// Rotary index. Text tokens use the degenerate form t == h == w; vision
// tokens carry a real (time, grid row, grid col) triple.
struct Pos3 {
    std::int64_t t = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;

    static Pos3 scalar(std::int64_t p) { return Pos3{p, p, p}; }

    bool operator==(const Pos3& o) const { return t == o.t && h == o.h && w == o.w; }
    std::int64_t max_component() const { return std::max(t, std::max(h, w)); }
};

enum class Mode { OneD, ThreeD };

inline const char* mode_name(Mode m) { return m == Mode::OneD ? "1d" : "3d"; }

// How many rotary dimension pairs of a head each axis owns. 1D places every
// pair on the time axis; the 3D default splits t:h:w at 2:1:1. Pairs are
// assigned in contiguous blocks: [0, t) -> time, [t, t+h) -> row,
// [t+h, t+h+w) -> col.
struct Sections {
    int t_pairs = 0;
    int h_pairs = 0;
    int w_pairs = 0;

    static Sections one_d(int head_dim) { return Sections{head_dim / 2, 0, 0}; }

    static Sections split_3d(int head_dim) {
        const int pairs = head_dim / 2;
        const int hw = pairs / 4;
        return Sections{pairs - 2 * hw, hw, hw};
    }

    int total_pairs() const { return t_pairs + h_pairs + w_pairs; }

    void validate(int head_dim) const {
        if (head_dim <= 0 || head_dim % 2 != 0) {
            throw ConfigError("rope: head_dim must be positive and even");
        }
        if (t_pairs < 0 || h_pairs < 0 || w_pairs < 0 || total_pairs() != head_dim / 2) {
            throw ConfigError("rope: section pairs must be non-negative and sum to head_dim/2");
        }
    }

    int axis_of(int pair) const { return pair < t_pairs ? 0 : (pair < t_pairs + h_pairs ? 1 : 2); }
};

inline std::int64_t axis_value(const Pos3& p, int axis) {
    return axis == 0 ? p.t : (axis == 1 ? p.h : p.w);
}

// Rotate each pair (2i, 2i+1) by angle pos_axis(i) / base^(2i/head_dim).
// An isometry for any position; index zero is the identity.
inline void rotate_inplace(std::span<float> v, const Pos3& pos, const Sections& sec,
                           double base) {
    const int head_dim = static_cast<int>(v.size());
    sec.validate(head_dim);
    for (int i = 0; i < head_dim / 2; ++i) {
        const double inv_freq = std::pow(base, -2.0 * i / head_dim);
        const double angle = static_cast<double>(axis_value(pos, sec.axis_of(i))) * inv_freq;
        const float c = static_cast<float>(std::cos(angle));
        const float s = static_cast<float>(std::sin(angle));
        const float x0 = v[2 * i];
        const float x1 = v[2 * i + 1];
        v[2 * i] = c * x0 - s * x1;
        v[2 * i + 1] = s * x0 + c * x1;
    }
}

// Memoized cos/sin rows per distinct position. Rotation angles depend only on
// (position, sections, base), all fixed for the lifetime of an engine, so a
// row is computed once and reused by every head, layer and step.
class TrigTable {
public:
    TrigTable(int head_dim, const Sections& sec, double base)
        : head_dim_(head_dim), sections_(sec), base_(base) {
        sec.validate(head_dim);
        inv_freq_.resize(head_dim / 2);
        for (int i = 0; i < head_dim / 2; ++i) {
            inv_freq_[i] = std::pow(base, -2.0 * i / head_dim);
        }
    }

    // Row layout: cos0, sin0, cos1, sin1, ...
    std::span<const float> row(const Pos3& pos) {
        const Key key{pos.t, pos.h, pos.w};
        auto it = rows_.find(key);
        if (it == rows_.end()) {
            std::vector<float> r(static_cast<std::size_t>(head_dim_));
            for (int i = 0; i < head_dim_ / 2; ++i) {
                const double angle =
                    static_cast<double>(axis_value(pos, sections_.axis_of(i))) * inv_freq_[i];
                r[2 * i] = static_cast<float>(std::cos(angle));
                r[2 * i + 1] = static_cast<float>(std::sin(angle));
            }
            it = rows_.emplace(key, std::move(r)).first;
        }
        return it->second;
    }

    const Sections& sections() const { return sections_; }
    double base() const { return base_; }

private:
    struct Key {
        std::int64_t t, h, w;
        bool operator==(const Key& o) const { return t == o.t && h == o.h && w == o.w; }
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            return static_cast<std::size_t>(
                mix64(static_cast<std::uint64_t>(k.t),
                      static_cast<std::uint64_t>(k.h),
                      static_cast<std::uint64_t>(k.w)));
        }
    };

    int head_dim_;
    Sections sections_;
    double base_;
    std::vector<double> inv_freq_;
    std::unordered_map<Key, std::vector<float>, KeyHash> rows_;
};

inline void rotate_with_row(std::span<float> v, std::span<const float> trig_row) {
    if (v.size() != trig_row.size()) throw ShapeError("rope: trig row / vector size mismatch");
    for (std::size_t i = 0; i + 1 < v.size(); i += 2) {
        const float c = trig_row[i];
        const float s = trig_row[i + 1];
        const float x0 = v[i];
        const float x1 = v[i + 1];
        v[i] = c * x0 - s * x1;
        v[i + 1] = s * x0 + c * x1;
    }
}

// One retained cache entry as the remapper sees it.
struct Item {
    std::uint64_t logical_position = 0;
    bool is_vision = false;
    std::int64_t second = 0;
    int frame = 0;  // frame ordinal within its second
    int row = 0;
    int col = 0;
};

struct Remap {
    std::vector<Pos3> positions;
    std::int64_t next_time = 0;  // index the next incoming token would take
};

// Gap-free reassignment of rotary indices in retention order.
//
// 1D: entry i gets scalar index i, so before any eviction the assignment
// equals the logical stream positions, and after eviction indices stay
// bounded by the retained count.
//
// 3D: a text entry consumes one time step; a vision second-group consumes
// one time step per frame while (h, w) keep their intra-frame grid values.
// The time axis therefore stays contiguous group by group and the next
// incoming token continues at next_time.
inline Remap contiguous_remap(std::span<const Item> retained, Mode mode) {
    for (std::size_t i = 1; i < retained.size(); ++i) {
        if (retained[i].logical_position <= retained[i - 1].logical_position) {
            throw ContractError("contiguous_remap: retained entries not in stream order");
        }
    }
    Remap out;
    out.positions.reserve(retained.size());
    if (mode == Mode::OneD) {
        for (std::size_t i = 0; i < retained.size(); ++i) {
            out.positions.push_back(Pos3::scalar(static_cast<std::int64_t>(i)));
        }
        out.next_time = static_cast<std::int64_t>(retained.size());
        return out;
    }
    std::int64_t t = 0;
    std::size_t i = 0;
    while (i < retained.size()) {
        if (!retained[i].is_vision) {
            out.positions.push_back(Pos3::scalar(t));
            t += 1;
            i += 1;
            continue;
        }
        const std::int64_t sec = retained[i].second;
        int max_frame = 0;
        std::size_t j = i;
        for (; j < retained.size() && retained[j].is_vision && retained[j].second == sec; ++j) {
            out.positions.push_back(Pos3{t + retained[j].frame, retained[j].row, retained[j].col});
            max_frame = std::max(max_frame, retained[j].frame);
        }
        t += max_frame + 1;
        i = j;
    }
    out.next_time = t;
    return out;
}

}  // namespace streamkv::rope
