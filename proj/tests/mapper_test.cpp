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


#include <random>

#include <gtest/gtest.h>

#include "cgra/harness.hpp"
#include "cgra/mapper.hpp"

namespace cgra {
namespace {

// Closed forms written out independently of the planner.
std::uint64_t ceil4(std::uint64_t v) { return (v + 3) / 4; }
std::uint64_t oracle_cycles(std::uint64_t m, std::uint64_t n, std::uint64_t k) { return ceil4(m) * ceil4(n) * (ceil4(k) + 12); }
std::uint64_t oracle_reads(std::uint64_t m, std::uint64_t n, std::uint64_t k) { return 4 * ceil4(m) * 4 * ceil4(n) * 4 * ceil4(k) / 2; }
std::uint64_t oracle_writes(std::uint64_t m, std::uint64_t n) { return 4 * (4 * ceil4(m)) * (4 * ceil4(n)); }

TEST(Plan, SingleTile) {
    const TilePlan p = plan_gemm({4, 4, 16}, kDefaultL1Size);
    EXPECT_EQ(p.iteration_length, 16u);
    EXPECT_EQ(p.predicted_cycles, 16u);
    EXPECT_EQ(p.launches(), 1u);
    EXPECT_EQ(p.outer_reps(), 1);
}

TEST(Plan, SixteenCube) {
    const TilePlan p = plan_gemm({16, 16, 32}, kDefaultL1Size);
    EXPECT_EQ(p.tile_rows, 4u);
    EXPECT_EQ(p.tile_cols, 4u);
    EXPECT_EQ(p.iteration_length, 20u);
    EXPECT_EQ(p.predicted_cycles, 320u);
    EXPECT_EQ(p.layout.a.offset, 0u);
    EXPECT_EQ(p.layout.a.size, 512u);
    EXPECT_EQ(p.layout.bt.offset, 512u);
    EXPECT_EQ(p.layout.c.offset, 1024u);
    EXPECT_EQ(p.layout.c.size, 1024u);
}

TEST(Plan, Padding) {
    const TilePlan p = plan_gemm({5, 7, 9}, kDefaultL1Size);
    EXPECT_EQ(p.padded, (GemmShape{8, 8, 12}));
    EXPECT_EQ(p.predicted_cycles, 2u * 2u * 15u);
    const TilePlan q = plan_gemm({8, 4, 16}, kDefaultL1Size);
    EXPECT_EQ(q.predicted_cycles, 32u);
}

TEST(Plan, MatchesClosedForm) {
    for (std::uint32_t m = 1; m <= 40; m += 3)
        for (std::uint32_t n = 1; n <= 40; n += 5)
            for (std::uint32_t k = 1; k <= 300; k += 23)
                ASSERT_EQ(plan_gemm({m, n, k}, kDefaultL1Size).predicted_cycles, oracle_cycles(m, n, k));
}

TEST(Plan, CyclesGrowByTilesPerFourK) {
    for (std::uint32_t k = 4; k < 400; k += 4) {
        const auto a = plan_gemm({12, 20, k}, kDefaultL1Size).predicted_cycles;
        const auto b = plan_gemm({12, 20, k + 4}, kDefaultL1Size).predicted_cycles;
        ASSERT_EQ(b - a, 3u * 5u);
    }
}

TEST(Plan, PhasesSumToIterationLength) {
    const TilePlan p = plan_gemm({9, 30, 77}, kDefaultL1Size);
    for (const auto& ph : p.phases) EXPECT_EQ(ph.total(), p.iteration_length);
}

TEST(Plan, Errors) {
    auto kind_of = [](GemmShape s, std::size_t l1) {
        try {
            plan_gemm(s, l1);
        } catch (const MapperError& e) {
            return static_cast<int>(e.kind());
        }
        return -1;
    };
    EXPECT_EQ(kind_of({0, 4, 4}, kDefaultL1Size), static_cast<int>(MapperError::Kind::InvalidShape));
    EXPECT_EQ(kind_of({4, 4, 0}, kDefaultL1Size), static_cast<int>(MapperError::Kind::InvalidShape));
    EXPECT_EQ(kind_of({4, 4, 65537}, kDefaultL1Size), static_cast<int>(MapperError::Kind::KTooLarge));
    EXPECT_EQ(kind_of({4, 4, 10000}, 1 << 30), static_cast<int>(MapperError::Kind::KTooLarge));
    EXPECT_EQ(kind_of({256, 256, 256}, kDefaultL1Size), static_cast<int>(MapperError::Kind::DoesNotFit));
    EXPECT_EQ(kind_of({16, 16, 32}, 2047), static_cast<int>(MapperError::Kind::DoesNotFit));
    EXPECT_EQ(kind_of({16, 16, 32}, 2048), -1);

    const TilePlan p = plan_gemm({4, 4, 4}, kDefaultL1Size);
    const std::vector<std::int8_t> a(16), b(15);
    try {
        emit_gemm_job(p, a, b);
        FAIL();
    } catch (const MapperError& e) {
        EXPECT_EQ(e.kind(), MapperError::Kind::ShapeMismatch);
    }
}

TEST(Kernel, ImageWithinContextMemory) {
    for (std::uint32_t k : {1u, 32u, 256u, 4096u, 8188u}) {
        const TilePlan p = plan_gemm({4, 4, k}, 1 << 20);
        const auto img = pack_image(build_gemm_kernel(p, 0));
        EXPECT_LE(img.size(), kContextMemoryBytes) << k;
    }
}

TEST(Kernel, EveryUnitHasIterationLengthL) {
    const TilePlan p = plan_gemm({20, 12, 40}, kDefaultL1Size);
    for (std::uint32_t tr = 0; tr < p.tile_rows; ++tr) {
        const Kernel k = build_gemm_kernel(p, tr);
        EXPECT_EQ(k.outer_reps, 3);
        for (const auto& prog : k.programs) EXPECT_EQ(prog.iteration_length(), p.iteration_length);
        EXPECT_TRUE(validate_program(k.at(NodeId::mobn(2))).empty());
    }
    EXPECT_THROW(build_gemm_kernel(p, p.tile_rows), std::out_of_range);
}

MatrixI8 identity(std::size_t n) {
    MatrixI8 m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
    return m;
}

TEST(Execute, IdentityLeftOperand) {
    std::mt19937_64 rng(8);
    const MatrixI8 b = random_matrix(12, 9, rng);
    const auto rep = run_and_verify(make_gemm_job(identity(12), b));
    ASSERT_TRUE(rep.passed());
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(rep.result(i, j), b(i, j));
}

TEST(Execute, ZeroLeftOperandStillStoresEveryElement) {
    std::mt19937_64 rng(9);
    const auto rep = run_and_verify(make_gemm_job(MatrixI8(4, 8), random_matrix(8, 4, rng)));
    ASSERT_TRUE(rep.passed());
    EXPECT_EQ(rep.counters.stores, 16u);
    for (auto v : rep.result.data) EXPECT_EQ(v, 0);
}

TEST(Execute, TrafficMatchesClosedForm) {
    std::mt19937_64 rng(10);
    for (auto [m, n, k] : {std::tuple{16u, 16u, 32u}, {5u, 7u, 9u}, {1u, 1u, 1u}, {33u, 2u, 17u}}) {
        const auto rep = run_and_verify(make_gemm_job(random_matrix(m, k, rng), random_matrix(k, n, rng)));
        ASSERT_TRUE(rep.passed());
        EXPECT_EQ(rep.counters.l1_read_bytes, oracle_reads(m, n, k));
        EXPECT_EQ(rep.counters.l1_write_bytes, oracle_writes(m, n));
        EXPECT_EQ(rep.measured_cycles, oracle_cycles(m, n, k));
    }
}

TEST(Execute, SixteenCubeTraffic) {
    std::mt19937_64 rng(4);
    const auto rep = run_and_verify(make_gemm_job(random_matrix(16, 32, rng), random_matrix(32, 16, rng)));
    ASSERT_TRUE(rep.passed());
    EXPECT_EQ(rep.counters.l1_read_bytes, 4096u);
    EXPECT_EQ(rep.counters.l1_write_bytes, 1024u);
    EXPECT_EQ(2u * 16 * 16 * 32 / rep.counters.l1_read_bytes, 4u);
}

TEST(Execute, PeUtilization) {
    std::mt19937_64 rng(12);
    for (std::uint32_t k : {16u, 128u, 200u}) {
        const auto rep = run_and_verify(make_gemm_job(random_matrix(8, k, rng), random_matrix(k, 8, rng)));
        ASSERT_TRUE(rep.passed());
        const double kw = static_cast<double>(ceil4(k));
        const double mac_fraction = kw / (kw + 12);
        for (int i = 0; i < kNumPes; ++i) {
            const auto& u = rep.counters.units[static_cast<std::size_t>(i)];
            EXPECT_DOUBLE_EQ(static_cast<double>(u.mac4_ops) / static_cast<double>(rep.counters.cycles), mac_fraction);
            const double busy = static_cast<double>(u.busy) / static_cast<double>(rep.counters.cycles);
            EXPECT_GE(busy, mac_fraction);
            if (k >= 128) {
                EXPECT_GE(busy, 0.7);
            }
        }
    }
}

}  // namespace
}  // namespace cgra
