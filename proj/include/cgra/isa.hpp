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
 * @file isa.hpp
 * @brief Instruction set, per-unit static programs and the context image.
 *
 * Instruction word (32 bits):
 *
 *     [31:27] opcode  [26:23] dst  [22:19] src_a  [18:15] src_b  [14:7] imm  [6:0] zero
 *
 * Fields an opcode does not use are encoded as zero, so two programs are equal
 * iff their images are byte-equal.
 *
 * Context image (little-endian):
 *
 *     "CGR1" | version u16 = 1 | unit_count u16 = 24 | outer_reps u16 | 6 zero bytes
 *     24 unit blocks in canonical unit order:
 *       unit_id u8 | segment_count u8 | reserved u16
 *       per segment: repeat u16 | ctx_len u8 | flags u8 | agu_base u32
 *                    | stride_inner i16 | count_inner u16 | stride_outer i16 | reserved u16
 *                    | ctx_len instruction words
 *
 * The whole image must fit the 4096-byte context memory.
 */

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgra/fabric.hpp"

namespace cgra {

enum class Opcode : std::uint8_t {
    NOP = 0,
    MOV = 1,
    ADD = 2,
    SUB = 3,
    MUL = 4,
    MAC4 = 5,
    DRN = 6,
    SRA = 7,
    CLAMP8 = 8,
    LDI = 9,
    LOAD = 10,
    STORE = 11,
};
inline constexpr int kNumOpcodes = 12;

enum class SrcSel : std::uint8_t {
    N = 0, S = 1, E = 2, W = 3, ACC = 4, ZERO = 5, IMM = 6,
    RF0 = 8, RF1, RF2, RF3, RF4, RF5, RF6, RF7,
};

enum class DstSel : std::uint8_t {
    NUL = 0, OUT_H = 1, OUT_V = 2, ACC = 3,
    RF0 = 8, RF1, RF2, RF3, RF4, RF5, RF6, RF7,
};

inline constexpr int kNumRegs = 8;
inline constexpr int kMaxSegments = 4;
inline constexpr int kMaxContext = 8;
inline constexpr std::size_t kContextMemoryBytes = 4096;
inline constexpr std::size_t kImageHeaderBytes = 16;
inline constexpr std::size_t kUnitHeaderBytes = 4;
inline constexpr std::size_t kSegmentHeaderBytes = 16;

constexpr bool valid_opcode_code(unsigned code) noexcept { return code < kNumOpcodes; }
constexpr bool valid_src_code(unsigned code) noexcept { return code < 16 && code != 7; }
constexpr bool valid_dst_code(unsigned code) noexcept { return code < 4 || (code >= 8 && code < 16); }

constexpr bool is_rf(SrcSel s) noexcept { return static_cast<unsigned>(s) >= 8; }
constexpr bool is_rf(DstSel d) noexcept { return static_cast<unsigned>(d) >= 8; }
constexpr int rf_index(SrcSel s) noexcept { return static_cast<int>(s) - 8; }
constexpr int rf_index(DstSel d) noexcept { return static_cast<int>(d) - 8; }
constexpr bool is_port(SrcSel s) noexcept { return static_cast<unsigned>(s) < 4; }
constexpr Port to_port(SrcSel s) noexcept { return static_cast<Port>(static_cast<unsigned>(s)); }

// Operand usage per opcode.
constexpr bool uses_dst(Opcode op) noexcept {
    switch (op) {
    case Opcode::MOV: case Opcode::ADD: case Opcode::SUB: case Opcode::MUL:
    case Opcode::MAC4: case Opcode::SRA: case Opcode::CLAMP8: case Opcode::LDI:
        return true;
    default:
        return false;
    }
}

constexpr bool uses_src_a(Opcode op) noexcept {
    switch (op) {
    case Opcode::MOV: case Opcode::ADD: case Opcode::SUB: case Opcode::MUL:
    case Opcode::MAC4: case Opcode::SRA: case Opcode::CLAMP8: case Opcode::STORE:
        return true;
    default:
        return false;
    }
}

constexpr bool uses_src_b(Opcode op) noexcept {
    switch (op) {
    case Opcode::ADD: case Opcode::SUB: case Opcode::MUL: case Opcode::MAC4:
        return true;
    default:
        return false;
    }
}

/// Opcodes that read the imm field directly (shift amount, literal).
constexpr bool uses_imm_field(Opcode op) noexcept { return op == Opcode::SRA || op == Opcode::LDI; }

constexpr bool legal_on_pe(Opcode op) noexcept { return op != Opcode::LOAD && op != Opcode::STORE; }
constexpr bool legal_on_mob(Opcode op) noexcept {
    switch (op) {
    case Opcode::NOP: case Opcode::MOV: case Opcode::ADD: case Opcode::SUB:
    case Opcode::MUL: case Opcode::LOAD: case Opcode::STORE:
        return true;
    default:
        return false;
    }
}
constexpr bool legal_on(NodeKind kind, Opcode op) noexcept {
    return kind == NodeKind::PE ? legal_on_pe(op) : legal_on_mob(op);
}

inline constexpr std::array<std::string_view, kNumOpcodes> kMnemonics = {
    "nop", "mov", "add", "sub", "mul", "mac4", "drn", "sra", "clamp8", "ldi", "load", "store"};

inline std::string_view mnemonic(Opcode op) { return kMnemonics.at(static_cast<std::size_t>(op)); }

inline std::string_view src_name(SrcSel s) {
    static constexpr std::array<std::string_view, 16> names = {
        "n", "s", "e", "w", "acc", "zero", "imm", "?",
        "rf0", "rf1", "rf2", "rf3", "rf4", "rf5", "rf6", "rf7"};
    return names.at(static_cast<std::size_t>(s) & 15U);
}

inline std::string_view dst_name(DstSel d) {
    static constexpr std::array<std::string_view, 16> names = {
        "null", "out_h", "out_v", "acc", "?", "?", "?", "?",
        "rf0", "rf1", "rf2", "rf3", "rf4", "rf5", "rf6", "rf7"};
    return names.at(static_cast<std::size_t>(d) & 15U);
}

struct Instruction {
    Opcode op = Opcode::NOP;
    DstSel dst = DstSel::NUL;
    SrcSel src_a = static_cast<SrcSel>(0);
    SrcSel src_b = static_cast<SrcSel>(0);
    std::int8_t imm = 0;

    friend constexpr bool operator==(const Instruction&, const Instruction&) = default;
};

/// True when the imm field carries meaning for this instruction.
constexpr bool reads_imm(const Instruction& in) noexcept {
    return uses_imm_field(in.op) || (uses_src_a(in.op) && in.src_a == SrcSel::IMM) ||
           (uses_src_b(in.op) && in.src_b == SrcSel::IMM);
}

/// Unused fields zero.
constexpr bool is_canonical(const Instruction& in) noexcept {
    if (!uses_dst(in.op) && in.dst != DstSel::NUL) return false;
    if (!uses_src_a(in.op) && static_cast<unsigned>(in.src_a) != 0) return false;
    if (!uses_src_b(in.op) && static_cast<unsigned>(in.src_b) != 0) return false;
    if (!reads_imm(in) && in.imm != 0) return false;
    return true;
}

// Shorthand constructors, mostly used by the mapper and tests.
namespace ins {
constexpr Instruction nop() noexcept { return {}; }
constexpr Instruction mov(DstSel d, SrcSel a) noexcept { return {Opcode::MOV, d, a, SrcSel::N, 0}; }
constexpr Instruction mac4(SrcSel a, SrcSel b) noexcept { return {Opcode::MAC4, DstSel::ACC, a, b, 0}; }
constexpr Instruction drn() noexcept { return {Opcode::DRN, DstSel::NUL, SrcSel::N, SrcSel::N, 0}; }
constexpr Instruction load() noexcept { return {Opcode::LOAD, DstSel::NUL, SrcSel::N, SrcSel::N, 0}; }
constexpr Instruction store(SrcSel a) noexcept { return {Opcode::STORE, DstSel::NUL, a, SrcSel::N, 0}; }
constexpr Instruction ldi(DstSel d, std::int8_t v) noexcept { return {Opcode::LDI, d, SrcSel::N, SrcSel::N, v}; }
}  // namespace ins

constexpr std::uint32_t encode_instruction(const Instruction& in) noexcept {
    return (static_cast<std::uint32_t>(in.op) & 0x1FU) << 27 |
           (static_cast<std::uint32_t>(in.dst) & 0xFU) << 23 |
           (static_cast<std::uint32_t>(in.src_a) & 0xFU) << 19 |
           (static_cast<std::uint32_t>(in.src_b) & 0xFU) << 15 |
           (static_cast<std::uint32_t>(static_cast<std::uint8_t>(in.imm))) << 7;
}

class DecodeError : public Error {
public:
    enum class Kind { IllegalOpcode, IllegalSelector, NonCanonical };

    DecodeError(Kind kind, int bit, std::uint32_t word, const std::string& what)
        : Error(what + " (word 0x" + hex8(word) + ", bit " + std::to_string(bit) + ")"),
          kind_(kind), bit_(bit), word_(word) {}

    Kind kind() const noexcept { return kind_; }
    /// Lowest bit position of the offending field.
    int bit() const noexcept { return bit_; }
    std::uint32_t word() const noexcept { return word_; }

private:
    static std::string hex8(std::uint32_t w) {
        static constexpr char digits[] = "0123456789abcdef";
        std::string s(8, '0');
        for (int i = 7; i >= 0; --i, w >>= 4) s[static_cast<std::size_t>(i)] = digits[w & 15U];
        return s;
    }

    Kind kind_;
    int bit_;
    std::uint32_t word_;
};

inline Instruction decode_instruction(std::uint32_t word) {
    using K = DecodeError::Kind;
    const unsigned op = (word >> 27) & 0x1FU;
    const unsigned dst = (word >> 23) & 0xFU;
    const unsigned a = (word >> 19) & 0xFU;
    const unsigned b = (word >> 15) & 0xFU;
    const auto imm = static_cast<std::int8_t>(static_cast<std::uint8_t>((word >> 7) & 0xFFU));

    if (!valid_opcode_code(op)) throw DecodeError(K::IllegalOpcode, 27, word, "illegal opcode " + std::to_string(op));
    if (!valid_dst_code(dst)) throw DecodeError(K::IllegalSelector, 23, word, "reserved dst selector " + std::to_string(dst));
    if (!valid_src_code(a)) throw DecodeError(K::IllegalSelector, 19, word, "reserved src_a selector " + std::to_string(a));
    if (!valid_src_code(b)) throw DecodeError(K::IllegalSelector, 15, word, "reserved src_b selector " + std::to_string(b));
    if ((word & 0x7FU) != 0) throw DecodeError(K::NonCanonical, 0, word, "reserved low bits set");

    const Instruction in{static_cast<Opcode>(op), static_cast<DstSel>(dst), static_cast<SrcSel>(a),
                         static_cast<SrcSel>(b), imm};
    if (!uses_dst(in.op) && dst != 0) throw DecodeError(K::NonCanonical, 23, word, "unused dst field set");
    if (!uses_src_a(in.op) && a != 0) throw DecodeError(K::NonCanonical, 19, word, "unused src_a field set");
    if (!uses_src_b(in.op) && b != 0) throw DecodeError(K::NonCanonical, 15, word, "unused src_b field set");
    if (!reads_imm(in) && imm != 0) throw DecodeError(K::NonCanonical, 7, word, "unused imm field set");
    return in;
}

struct AguConfig {
    std::uint32_t base = 0;
    std::int16_t stride_inner = 0;
    std::uint16_t count_inner = 0;
    std::int16_t stride_outer = 0;

    friend constexpr bool operator==(const AguConfig&, const AguConfig&) = default;

    /// Byte address of the k-th access in outer iteration t (may fall outside L1).
    constexpr std::int64_t address(std::uint64_t k, std::uint64_t t) const noexcept {
        const std::uint64_t count = count_inner == 0 ? 1 : count_inner;
        return static_cast<std::int64_t>(base) +
               static_cast<std::int64_t>(k % count) * stride_inner +
               static_cast<std::int64_t>(t) * stride_outer;
    }
};

struct Segment {
    std::vector<Instruction> context;
    std::uint16_t repeat = 1;
    AguConfig agu;

    std::uint64_t cycles() const noexcept { return static_cast<std::uint64_t>(context.size()) * repeat; }

    friend bool operator==(const Segment&, const Segment&) = default;
};

struct UnitProgram {
    NodeId unit;
    std::vector<Segment> segments;

    /// Cycles of one pass over the segment list.
    std::uint64_t iteration_length() const noexcept {
        std::uint64_t total = 0;
        for (const auto& s : segments) total += s.cycles();
        return total;
    }

    friend bool operator==(const UnitProgram&, const UnitProgram&) = default;
};

/// Decoded content of a context image.
struct Kernel {
    std::uint16_t outer_reps = 1;
    std::vector<UnitProgram> programs;  // canonical unit order, 24 entries

    friend bool operator==(const Kernel&, const Kernel&) = default;

    /// A kernel with 24 empty programs.
    static Kernel empty(std::uint16_t outer_reps = 1) {
        Kernel k;
        k.outer_reps = outer_reps;
        for (int i = 0; i < kNumUnits; ++i) k.programs.push_back({NodeId::from_index(i), {}});
        return k;
    }

    UnitProgram& at(NodeId n) { return programs.at(static_cast<std::size_t>(n.index())); }
    const UnitProgram& at(NodeId n) const { return programs.at(static_cast<std::size_t>(n.index())); }
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
    NodeId unit;
    int segment = -1;  // -1: program level
    int slot = -1;     // -1: segment level
    std::string reason;

    std::string to_string() const {
        std::string s = unit.to_string();
        if (segment >= 0) s += " segment " + std::to_string(segment);
        if (slot >= 0) s += " slot " + std::to_string(slot);
        return s + ": " + reason;
    }
};

namespace detail {

inline void check_instruction(const UnitProgram& prog, int seg, int slot, const Instruction& in,
                              std::vector<Violation>& out) {
    const NodeId u = prog.unit;
    auto flag = [&](std::string reason) { out.push_back({u, seg, slot, std::move(reason)}); };

    if (!valid_opcode_code(static_cast<unsigned>(in.op))) {
        flag("illegal opcode code " + std::to_string(static_cast<unsigned>(in.op)));
        return;
    }
    const std::string mn(mnemonic(in.op));
    std::string upper = mn;
    for (auto& ch : upper) ch = static_cast<char>(ch >= 'a' && ch <= 'z' ? ch - 32 : ch);

    if (!legal_on(u.kind, in.op)) flag(upper + " illegal on " + (u.is_pe() ? "PE" : "MOB"));

    const bool a_used = uses_src_a(in.op);
    const bool b_used = uses_src_b(in.op);
    if (!valid_dst_code(static_cast<unsigned>(in.dst))) flag("reserved dst selector");
    if (!valid_src_code(static_cast<unsigned>(in.src_a))) flag("reserved src_a selector");
    if (!valid_src_code(static_cast<unsigned>(in.src_b))) flag("reserved src_b selector");
    if (!is_canonical(in)) flag("non-canonical encoding (unused field set)");

    if (in.op == Opcode::MAC4 && in.dst != DstSel::ACC) flag("MAC4 destination must be acc");
    if (in.op == Opcode::SRA) {
        if (in.imm < 0 || in.imm > 31) flag("SRA shift " + std::to_string(in.imm) + " not in 0..31");
        if (in.src_a == SrcSel::IMM) flag("SRA cannot shift an immediate");
    }
    auto check_src = [&](SrcSel s, const char* which) {
        if (u.is_mob()) {
            if (s == SrcSel::ACC || is_rf(s)) flag(std::string(which) + " " + std::string(src_name(s)) + " not present on MOB");
        }
        if (is_port(s) && !has_port(u, to_port(s)))
            flag(std::string(which) + " reads missing port " + port_name(to_port(s)));
    };
    if (a_used) check_src(in.src_a, "src_a");
    if (b_used) check_src(in.src_b, "src_b");
    if (u.is_mob() && uses_dst(in.op) && (in.dst == DstSel::ACC || is_rf(in.dst)))
        flag("dst " + std::string(dst_name(in.dst)) + " not present on MOB");
}

}  // namespace detail

/// Lists every violation; empty iff the program is loadable on its unit.
inline std::vector<Violation> validate_program(const UnitProgram& prog) {
    std::vector<Violation> out;
    if (!prog.unit.valid()) {
        out.push_back({prog.unit, -1, -1, "invalid unit id"});
        return out;
    }
    if (prog.segments.size() > kMaxSegments)
        out.push_back({prog.unit, -1, -1,
                       "segment count " + std::to_string(prog.segments.size()) + " > " + std::to_string(kMaxSegments)});
    for (std::size_t s = 0; s < prog.segments.size(); ++s) {
        const Segment& seg = prog.segments[s];
        const int si = static_cast<int>(s);
        if (seg.context.empty() || seg.context.size() > kMaxContext)
            out.push_back({prog.unit, si, -1, "context length " + std::to_string(seg.context.size()) + " not in 1..8"});
        if (seg.repeat == 0) out.push_back({prog.unit, si, -1, "repeat must be >= 1"});
        bool touches_memory = false;
        for (std::size_t i = 0; i < seg.context.size(); ++i) {
            const Instruction& in = seg.context[i];
            touches_memory |= in.op == Opcode::LOAD || in.op == Opcode::STORE;
            detail::check_instruction(prog, si, static_cast<int>(i), in, out);
        }
        if (touches_memory && prog.unit.is_mob() && seg.agu.count_inner == 0)
            out.push_back({prog.unit, si, -1, "AGU count_inner must be >= 1"});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Context image

class ImageTooLarge : public Error {
public:
    explicit ImageTooLarge(std::size_t size)
        : Error("context image of " + std::to_string(size) + " bytes exceeds " +
                std::to_string(kContextMemoryBytes)),
          size_(size) {}
    std::size_t size() const noexcept { return size_; }

private:
    std::size_t size_;
};

class ImageError : public Error {
public:
    enum class Kind { BadMagic, BadVersion, Truncated, NonCanonical, MissingUnit, DuplicateUnit, InvalidProgram };

    ImageError(Kind kind, std::size_t offset, const std::string& what)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), kind_(kind), offset_(offset) {}

    Kind kind() const noexcept { return kind_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    Kind kind_;
    std::size_t offset_;
};

class InvalidProgram : public ImageError {
public:
    explicit InvalidProgram(std::vector<Violation> violations)
        : ImageError(Kind::InvalidProgram, 0, summarize(violations)), violations_(std::move(violations)) {}
    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    static std::string summarize(const std::vector<Violation>& v) {
        std::string s = "invalid program: ";
        for (std::size_t i = 0; i < v.size() && i < 4; ++i) s += (i ? "; " : "") + v[i].to_string();
        if (v.size() > 4) s += "; ... (" + std::to_string(v.size()) + " total)";
        return s;
    }
    std::vector<Violation> violations_;
};

inline std::size_t image_size(std::span<const UnitProgram> programs) noexcept {
    std::size_t size = kImageHeaderBytes;
    for (const auto& p : programs) {
        size += kUnitHeaderBytes;
        for (const auto& s : p.segments) size += kSegmentHeaderBytes + 4 * s.context.size();
    }
    return size;
}

namespace detail {

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) {
        u8(static_cast<std::uint8_t>(v));
        u8(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        u16(static_cast<std::uint16_t>(v));
        u16(static_cast<std::uint16_t>(v >> 16));
    }
    void i16(std::int16_t v) { u16(static_cast<std::uint16_t>(v)); }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t offset() const noexcept { return pos_; }
    bool done() const noexcept { return pos_ == bytes_.size(); }

    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        const auto v = static_cast<std::uint16_t>(bytes_[pos_] | bytes_[pos_ + 1] << 8);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        const std::uint32_t lo = u16();
        return lo | static_cast<std::uint32_t>(u16()) << 16;
    }
    std::int16_t i16() { return static_cast<std::int16_t>(u16()); }

    void expect_zero_u8(const char* what) {
        const std::size_t at = pos_;
        if (u8() != 0) throw ImageError(ImageError::Kind::NonCanonical, at, std::string(what) + " must be zero");
    }
    void expect_zero_u16(const char* what) {
        const std::size_t at = pos_;
        if (u16() != 0) throw ImageError(ImageError::Kind::NonCanonical, at, std::string(what) + " must be zero");
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size())
            throw ImageError(ImageError::Kind::Truncated, pos_, "image truncated");
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Packs 24 programs (any order, each unit exactly once) into a context image.
inline std::vector<std::uint8_t> pack_image(std::span<const UnitProgram> programs, std::uint16_t outer_reps) {
    using K = ImageError::Kind;
    std::array<const UnitProgram*, kNumUnits> by_index{};
    for (const auto& p : programs) {
        if (!p.unit.valid()) throw ImageError(K::MissingUnit, 0, "invalid unit id in program list");
        auto& slot = by_index[static_cast<std::size_t>(p.unit.index())];
        if (slot) throw ImageError(K::DuplicateUnit, 0, "duplicate program for " + p.unit.to_string());
        slot = &p;
    }
    for (int i = 0; i < kNumUnits; ++i) {
        if (!by_index[static_cast<std::size_t>(i)])
            throw ImageError(K::MissingUnit, 0, "missing program for " + NodeId::from_index(i).to_string());
    }
    if (outer_reps == 0) throw ImageError(K::NonCanonical, 0, "outer_reps must be >= 1");

    std::vector<Violation> violations;
    for (const auto* p : by_index) {
        auto v = validate_program(*p);
        violations.insert(violations.end(), v.begin(), v.end());
    }
    if (!violations.empty()) throw InvalidProgram(std::move(violations));

    const std::size_t size = image_size(programs);
    if (size > kContextMemoryBytes) throw ImageTooLarge(size);

    detail::ByteWriter w;
    for (char ch : std::string_view("CGR1")) w.u8(static_cast<std::uint8_t>(ch));
    w.u16(1);
    w.u16(kNumUnits);
    w.u16(outer_reps);
    for (int i = 0; i < 6; ++i) w.u8(0);
    for (int i = 0; i < kNumUnits; ++i) {
        const UnitProgram& p = *by_index[static_cast<std::size_t>(i)];
        w.u8(static_cast<std::uint8_t>(i));
        w.u8(static_cast<std::uint8_t>(p.segments.size()));
        w.u16(0);
        for (const auto& s : p.segments) {
            w.u16(s.repeat);
            w.u8(static_cast<std::uint8_t>(s.context.size()));
            w.u8(0);
            w.u32(s.agu.base);
            w.i16(s.agu.stride_inner);
            w.u16(s.agu.count_inner);
            w.i16(s.agu.stride_outer);
            w.u16(0);
            for (const auto& in : s.context) w.u32(encode_instruction(in));
        }
    }
    return w.take();
}

inline std::vector<std::uint8_t> pack_image(const Kernel& kernel) {
    return pack_image(kernel.programs, kernel.outer_reps);
}

/// Structural decode of an image. Does not check kind legality; see validate_program.
inline Kernel unpack_image(std::span<const std::uint8_t> bytes) {
    using K = ImageError::Kind;
    detail::ByteReader r(bytes);
    if (bytes.size() < 4 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != "CGR1")
        throw ImageError(K::BadMagic, 0, "bad magic (expected \"CGR1\")");
    r.u32();
    if (const auto version = r.u16(); version != 1)
        throw ImageError(K::BadVersion, 4, "unsupported image version " + std::to_string(version));
    if (const auto count = r.u16(); count != kNumUnits)
        throw ImageError(K::NonCanonical, 6, "unit_count " + std::to_string(count) + " != 24");
    Kernel k;
    const std::size_t reps_at = r.offset();
    k.outer_reps = r.u16();
    if (k.outer_reps == 0) throw ImageError(K::NonCanonical, reps_at, "outer_reps must be >= 1");
    for (int i = 0; i < 6; ++i) r.expect_zero_u8("header reserved byte");

    for (int i = 0; i < kNumUnits; ++i) {
        const std::size_t unit_at = r.offset();
        const auto id = r.u8();
        if (id != i)
            throw ImageError(K::NonCanonical, unit_at,
                             "unit_id " + std::to_string(id) + " out of canonical order (expected " + std::to_string(i) + ")");
        UnitProgram p{NodeId::from_index(i), {}};
        const auto nseg = r.u8();
        r.expect_zero_u16("unit reserved field");
        for (unsigned s = 0; s < nseg; ++s) {
            Segment seg;
            seg.repeat = r.u16();
            const auto len = r.u8();
            r.expect_zero_u8("segment flags");
            seg.agu.base = r.u32();
            seg.agu.stride_inner = r.i16();
            seg.agu.count_inner = r.u16();
            seg.agu.stride_outer = r.i16();
            r.expect_zero_u16("segment reserved field");
            for (unsigned j = 0; j < len; ++j) {
                const std::size_t word_at = r.offset();
                const std::uint32_t word = r.u32();
                try {
                    seg.context.push_back(decode_instruction(word));
                } catch (const DecodeError& e) {
                    throw ImageError(K::NonCanonical, word_at, e.what());
                }
            }
            p.segments.push_back(std::move(seg));
        }
        k.programs.push_back(std::move(p));
    }
    if (!r.done()) throw ImageError(K::NonCanonical, r.offset(), "trailing bytes after last unit block");
    return k;
}

}  // namespace cgra
