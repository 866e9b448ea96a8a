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


// Random generators shared by the unit and acceptance suites.

#pragma once

#include <random>
#include <vector>

#include "cgra/isa.hpp"

namespace cgra::testing {

inline constexpr std::array<unsigned, 15> kSrcCodes = {0, 1, 2, 3, 4, 5, 6, 8, 9, 10, 11, 12, 13, 14, 15};
inline constexpr std::array<unsigned, 12> kDstCodes = {0, 1, 2, 3, 8, 9, 10, 11, 12, 13, 14, 15};

template <typename T, std::size_t N>
T pick(const std::array<T, N>& a, std::mt19937_64& rng) {
    return a[std::uniform_int_distribution<std::size_t>(0, N - 1)(rng)];
}

/// Any canonical instruction (kind legality not considered).
inline Instruction random_canonical_instruction(std::mt19937_64& rng) {
    Instruction in;
    in.op = static_cast<Opcode>(std::uniform_int_distribution<int>(0, kNumOpcodes - 1)(rng));
    if (uses_dst(in.op)) in.dst = static_cast<DstSel>(pick(kDstCodes, rng));
    if (uses_src_a(in.op)) in.src_a = static_cast<SrcSel>(pick(kSrcCodes, rng));
    if (uses_src_b(in.op)) in.src_b = static_cast<SrcSel>(pick(kSrcCodes, rng));
    if (reads_imm(in)) in.imm = static_cast<std::int8_t>(std::uniform_int_distribution<int>(-128, 127)(rng));
    return in;
}

/// An instruction that passes validate_program on `unit`.
inline Instruction random_legal_instruction(NodeId unit, std::mt19937_64& rng) {
    std::vector<Opcode> ops;
    for (int o = 0; o < kNumOpcodes; ++o)
        if (legal_on(unit.kind, static_cast<Opcode>(o))) ops.push_back(static_cast<Opcode>(o));
    Instruction in;
    in.op = ops[std::uniform_int_distribution<std::size_t>(0, ops.size() - 1)(rng)];

    std::vector<SrcSel> srcs;
    std::vector<DstSel> dsts;
    if (unit.is_pe()) {
        for (unsigned c : kSrcCodes) srcs.push_back(static_cast<SrcSel>(c));
        for (unsigned c : kDstCodes) dsts.push_back(static_cast<DstSel>(c));
    } else {
        for (Port p : kAllPorts)
            if (has_port(unit, p)) srcs.push_back(static_cast<SrcSel>(p));
        srcs.push_back(SrcSel::ZERO);
        srcs.push_back(SrcSel::IMM);
        dsts = {DstSel::NUL, DstSel::OUT_H, DstSel::OUT_V};
    }
    auto any_src = [&] { return srcs[std::uniform_int_distribution<std::size_t>(0, srcs.size() - 1)(rng)]; };
    auto any_dst = [&] { return dsts[std::uniform_int_distribution<std::size_t>(0, dsts.size() - 1)(rng)]; };

    if (uses_dst(in.op)) in.dst = in.op == Opcode::MAC4 ? DstSel::ACC : any_dst();
    if (uses_src_a(in.op)) {
        do in.src_a = any_src();
        while (in.op == Opcode::SRA && in.src_a == SrcSel::IMM);
    }
    if (uses_src_b(in.op)) in.src_b = any_src();
    if (in.op == Opcode::SRA) in.imm = static_cast<std::int8_t>(std::uniform_int_distribution<int>(0, 31)(rng));
    else if (reads_imm(in)) in.imm = static_cast<std::int8_t>(std::uniform_int_distribution<int>(-128, 127)(rng));
    return in;
}

/// A kernel of valid random programs whose image fits the context memory.
inline Kernel random_kernel(std::mt19937_64& rng) {
    Kernel k = Kernel::empty(static_cast<std::uint16_t>(std::uniform_int_distribution<int>(1, 9)(rng)));
    for (auto& prog : k.programs) {
        const int nseg = std::uniform_int_distribution<int>(0, 2)(rng);
        for (int s = 0; s < nseg; ++s) {
            Segment seg;
            seg.repeat = static_cast<std::uint16_t>(std::uniform_int_distribution<int>(1, 300)(rng));
            const int len = std::uniform_int_distribution<int>(1, 4)(rng);
            for (int i = 0; i < len; ++i) seg.context.push_back(random_legal_instruction(prog.unit, rng));
            if (prog.unit.is_mob()) {
                seg.agu.base = static_cast<std::uint32_t>(std::uniform_int_distribution<int>(0, 4096)(rng)) * 4;
                seg.agu.stride_inner = static_cast<std::int16_t>(std::uniform_int_distribution<int>(-8, 8)(rng) * 4);
                seg.agu.count_inner = static_cast<std::uint16_t>(std::uniform_int_distribution<int>(1, 64)(rng));
                seg.agu.stride_outer = static_cast<std::int16_t>(std::uniform_int_distribution<int>(-8, 8)(rng) * 4);
            }
            prog.segments.push_back(std::move(seg));
        }
    }
    return k;
}

}  // namespace cgra::testing
