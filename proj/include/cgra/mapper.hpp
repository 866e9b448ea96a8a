/*
 * Copyright 2026 The cgra-edge Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * @file mapper.hpp
 * @brief Block-wise int8 GEMM mapping onto the 4x4 array.
 *
 * C(m x n) = A(m x k) * B(k x n) is zero-padded to multiples of 4 and cut into
 * 4x4 output tiles. Every tile is computed output-stationary: PE(i,j) owns
 * C[4*tr + i][4*tc + j] in its accumulator while packed operands stream past.
 *
 * One tile iteration of K4 = k'/4 packed words takes L = K4 + 12 cycles
 * (cycle numbers relative to the start of the iteration):
 *
 *   MobW(r)   cycles r .. r+K4-1     LOAD A row (4*tr + r), word s at cycle r+s
 *   MobN(c)   cycles c .. c+K4-1     LOAD B^T row (4*tc + c), word s at cycle c+s
 *   PE(i,j)   cycles i+j+1 .. i+j+K4 MAC4 acc, w, n (forwards w east, n south)
 *   PE(i,j)   cycle  T_j = j+K4+4    DRN: out_v <- acc, acc <- 0
 *   PE(i,j)   cycles T_j+1 .. T_j+3-i  mov out_v, s (shift results north)
 *   MobN(c)   cycles T_c+1 .. T_c+4  STORE s, rows 0..3 of the tile column
 *
 * T_j is the first cycle at which every accumulator of column j is final and
 * no PE below still reads the out_v registers it overwrites. The last store
 * of MobN(3) lands on cycle K4+11, hence the overhead of 12 cycles.
 *
 * A kernel launch covers one tile row; its n'/4 tiles are the outer
 * repetitions. MobW re-reads the same A rows for every tile (outer stride 0)
 * while MobN advances four B columns per tile (outer stride 4*k').
 */

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgra/fabric.hpp"
#include "cgra/isa.hpp"

namespace cgra {

/// Fixed per-tile overhead of the schedule (skew, drain and store latency).
inline constexpr std::uint32_t kScheduleOverhead = 12;
/// Keeps |acc| <= k * 2^14 < 2^31.
inline constexpr std::uint32_t kMaxK = 65536;
/// Largest padded k whose per-tile B^T advance (4*k') fits the signed 16-bit outer stride.
inline constexpr std::uint32_t kMaxPaddedK = 8188;
/// Largest padded n whose C row pitch (4*n') fits the signed 16-bit inner stride.
inline constexpr std::uint32_t kMaxPaddedN = 8188;

class MapperError : public Error {
public:
    enum class Kind { InvalidShape, KTooLarge, DoesNotFit, ShapeMismatch };

    MapperError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct GemmShape {
    std::uint32_t m = 0;
    std::uint32_t n = 0;
    std::uint32_t k = 0;

    friend constexpr bool operator==(const GemmShape&, const GemmShape&) = default;
};

constexpr std::uint32_t round_up4(std::uint32_t v) noexcept { return (v + 3U) & ~3U; }

struct Region {
    std::uint32_t offset = 0;
    std::uint32_t size = 0;

    constexpr std::uint32_t end() const noexcept { return offset + size; }
};

/// Byte layout of a GEMM in L1.
struct GemmLayout {
    Region a;   // int8, row-major A, rows padded to k'
    Region bt;  // int8, row-major B^T, rows padded to k'
    Region c;   // int32, row-major C, rows padded to n'
};

/// Phase lengths of one unit within a tile iteration.
struct UnitPhases {
    std::uint32_t delay = 0;
    std::uint32_t compute = 0;
    std::uint32_t pad = 0;
    std::uint32_t drain = 0;

    constexpr std::uint32_t total() const noexcept { return delay + compute + pad + drain; }
};

struct TilePlan {
    GemmShape shape;
    GemmShape padded;
    std::uint32_t tile_rows = 0;  // m'/4 = number of launches
    std::uint32_t tile_cols = 0;  // n'/4 = outer repetitions per launch
    std::uint32_t k_words = 0;    // k'/4 packed words per dot product
    std::uint32_t iteration_length = 0;
    std::uint64_t predicted_cycles = 0;
    std::size_t l1_size = 0;
    GemmLayout layout;
    std::array<UnitPhases, kNumUnits> phases{};

    std::uint32_t launches() const noexcept { return tile_rows; }
    std::uint16_t outer_reps() const noexcept { return static_cast<std::uint16_t>(tile_cols); }
    std::uint64_t cycles_per_launch() const noexcept {
        return static_cast<std::uint64_t>(tile_cols) * iteration_length;
    }
};

inline std::uint64_t predicted_cycles(const TilePlan& plan) noexcept {
    return static_cast<std::uint64_t>(plan.tile_rows) * plan.tile_cols * plan.iteration_length;
}

inline TilePlan plan_gemm(GemmShape shape, std::size_t l1_size) {
    using K = MapperError::Kind;
    if (shape.m == 0 || shape.n == 0 || shape.k == 0) throw MapperError(K::InvalidShape, "GEMM dimensions must be positive");
    if (shape.k > kMaxK) throw MapperError(K::KTooLarge, "k=" + std::to_string(shape.k) + " exceeds " + std::to_string(kMaxK));

    TilePlan p;
    p.shape = shape;
    p.padded = {round_up4(shape.m), round_up4(shape.n), round_up4(shape.k)};
    if (p.padded.k > kMaxPaddedK)
        throw MapperError(K::KTooLarge, "padded k=" + std::to_string(p.padded.k) + " exceeds AGU stride range (" +
                                            std::to_string(kMaxPaddedK) + ")");
    if (p.padded.n > kMaxPaddedN)
        throw MapperError(K::DoesNotFit, "padded n=" + std::to_string(p.padded.n) + " exceeds AGU stride range (" +
                                             std::to_string(kMaxPaddedN) + ")");
    p.tile_rows = p.padded.m / 4;
    p.tile_cols = p.padded.n / 4;
    if (p.tile_cols > 0xFFFF) throw MapperError(K::DoesNotFit, "too many tile columns for outer_reps");
    p.k_words = p.padded.k / 4;
    p.iteration_length = p.k_words + kScheduleOverhead;
    p.l1_size = l1_size;

    const std::uint64_t a_size = std::uint64_t{p.padded.m} * p.padded.k;
    const std::uint64_t bt_size = std::uint64_t{p.padded.n} * p.padded.k;
    const std::uint64_t c_size = std::uint64_t{p.padded.m} * p.padded.n * 4;
    const std::uint64_t total = a_size + bt_size + c_size;
    if (total > l1_size)
        throw MapperError(K::DoesNotFit, "GEMM needs " + std::to_string(total) + " bytes of L1, have " +
                                             std::to_string(l1_size));
    p.layout.a = {0, static_cast<std::uint32_t>(a_size)};
    p.layout.bt = {p.layout.a.end(), static_cast<std::uint32_t>(bt_size)};
    p.layout.c = {p.layout.bt.end(), static_cast<std::uint32_t>(c_size)};

    const std::uint32_t kw = p.k_words;
    for (int i = 0; i < kGridRows; ++i) {
        for (int j = 0; j < kGridCols; ++j) {
            const auto ui = static_cast<std::uint32_t>(i);
            const auto uj = static_cast<std::uint32_t>(j);
            p.phases[static_cast<std::size_t>(NodeId::pe(i, j).index())] = {ui + uj + 1, kw, 3 - ui, 8 - uj};
        }
    }
    for (std::uint32_t r = 0; r < kGridRows; ++r)
        p.phases[static_cast<std::size_t>(NodeId::mobw(static_cast<int>(r)).index())] = {r, kw, kScheduleOverhead - r, 0};
    for (std::uint32_t c = 0; c < kGridCols; ++c)
        p.phases[static_cast<std::size_t>(NodeId::mobn(static_cast<int>(c)).index())] = {c, kw, 5, 7 - c};

    p.predicted_cycles = predicted_cycles(p);
    return p;
}

namespace detail {

inline Segment nops(std::uint32_t n) { return Segment{{ins::nop()}, static_cast<std::uint16_t>(n), {}}; }

}  // namespace detail

/// Kernel computing C tile row `tile_row` of the plan.
inline Kernel build_gemm_kernel(const TilePlan& p, std::uint32_t tile_row) {
    if (tile_row >= p.tile_rows) throw std::out_of_range("tile row out of range");
    const std::uint32_t kw = p.k_words;
    const std::uint32_t kp = p.padded.k;
    const std::uint32_t np = p.padded.n;
    const auto kw16 = static_cast<std::uint16_t>(kw);
    Kernel kernel = Kernel::empty(p.outer_reps());

    for (int i = 0; i < kGridRows; ++i) {
        for (int j = 0; j < kGridCols; ++j) {
            const UnitPhases& ph = p.phases[static_cast<std::size_t>(NodeId::pe(i, j).index())];
            auto& segs = kernel.at(NodeId::pe(i, j)).segments;
            segs.push_back(detail::nops(ph.delay));
            segs.push_back(Segment{{ins::mac4(SrcSel::W, SrcSel::N)}, kw16, {}});
            if (ph.pad > 0) segs.push_back(detail::nops(ph.pad));
            Segment drain{{ins::drn()}, 1, {}};
            for (int s = 0; s < 3 - i; ++s) drain.context.push_back(ins::mov(DstSel::OUT_V, SrcSel::S));
            while (drain.context.size() < ph.drain) drain.context.push_back(ins::nop());
            segs.push_back(std::move(drain));
        }
    }

    for (int r = 0; r < kGridRows; ++r) {
        const UnitPhases& ph = p.phases[static_cast<std::size_t>(NodeId::mobw(r).index())];
        auto& segs = kernel.at(NodeId::mobw(r)).segments;
        if (ph.delay > 0) segs.push_back(detail::nops(ph.delay));
        const AguConfig agu{p.layout.a.offset + (tile_row * 4 + static_cast<std::uint32_t>(r)) * kp, 4, kw16, 0};
        segs.push_back(Segment{{ins::load()}, kw16, agu});
        segs.push_back(detail::nops(ph.pad));
    }

    for (int c = 0; c < kGridCols; ++c) {
        const UnitPhases& ph = p.phases[static_cast<std::size_t>(NodeId::mobn(c).index())];
        auto& segs = kernel.at(NodeId::mobn(c)).segments;
        if (ph.delay > 0) segs.push_back(detail::nops(ph.delay));
        const auto uc = static_cast<std::uint32_t>(c);
        const AguConfig load_agu{p.layout.bt.offset + uc * kp, 4, kw16, static_cast<std::int16_t>(4 * kp)};
        segs.push_back(Segment{{ins::load()}, kw16, load_agu});
        segs.push_back(detail::nops(ph.pad));
        const AguConfig store_agu{p.layout.c.offset + tile_row * 16 * np + 4 * uc, static_cast<std::int16_t>(4 * np), 4, 16};
        Segment store{{}, 1, store_agu};
        for (int s = 0; s < 4; ++s) store.context.push_back(ins::store(SrcSel::S));
        while (store.context.size() < ph.drain) store.context.push_back(ins::nop());
        segs.push_back(std::move(store));
    }

    for (const auto& prog : kernel.programs) {
        if (prog.iteration_length() != p.iteration_length)
            throw std::logic_error("schedule length mismatch on " + prog.unit.to_string());
    }
    return kernel;
}

struct GemmJob {
    TilePlan plan;
    std::vector<std::int8_t> a;  // original operands, row-major
    std::vector<std::int8_t> b;
    std::vector<std::uint8_t> a_l1;   // bytes for layout.a
    std::vector<std::uint8_t> bt_l1;  // bytes for layout.bt
    std::vector<std::vector<std::uint8_t>> images;  // one per tile row
};

inline GemmJob emit_gemm_job(const TilePlan& plan, std::span<const std::int8_t> a, std::span<const std::int8_t> b) {
    const auto& s = plan.shape;
    if (a.size() != std::size_t{s.m} * s.k || b.size() != std::size_t{s.k} * s.n)
        throw MapperError(MapperError::Kind::ShapeMismatch,
                          "operand sizes " + std::to_string(a.size()) + "/" + std::to_string(b.size()) +
                              " do not match shape " + std::to_string(s.m) + "x" + std::to_string(s.n) + "x" +
                              std::to_string(s.k));
    GemmJob job;
    job.plan = plan;
    job.a.assign(a.begin(), a.end());
    job.b.assign(b.begin(), b.end());

    const std::size_t kp = plan.padded.k;
    job.a_l1.assign(plan.layout.a.size, 0);
    for (std::size_t r = 0; r < s.m; ++r)
        for (std::size_t c = 0; c < s.k; ++c)
            job.a_l1[r * kp + c] = static_cast<std::uint8_t>(a[r * s.k + c]);

    job.bt_l1.assign(plan.layout.bt.size, 0);
    for (std::size_t r = 0; r < s.k; ++r)
        for (std::size_t c = 0; c < s.n; ++c)
            job.bt_l1[c * kp + r] = static_cast<std::uint8_t>(b[r * s.n + c]);

    for (std::uint32_t tr = 0; tr < plan.tile_rows; ++tr)
        job.images.push_back(pack_image(build_gemm_kernel(plan, tr)));
    return job;
}

}  // namespace cgra
