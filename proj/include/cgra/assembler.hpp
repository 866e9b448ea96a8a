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
 * @file assembler.hpp
 * @brief Text front-end (.casm) and disassembler for context images.
 *
 * Grammar, one statement per line, `;` to end of line is a comment:
 *
 *     .kernel outer_reps=<n>
 *     .unit pe <r> <c> | .unit mobw <r> | .unit mobn <c>
 *     .segment repeat=<n> [base=<addr>] [stride_i=<n>] [count_i=<n>] [stride_o=<n>]
 *     <mnemonic> [operand {, operand}]
 *
 * Operands are destination/source selector names in lower case
 * (null out_h out_v acc rf0..rf7 / n s e w acc zero rf0..rf7) or `#<int>` for
 * an immediate. Numbers are decimal or 0x-prefixed hex.
 *
 *     mov out_h, w        mac4 acc, w, n      drn
 *     add rf0, rf1, #3    sra rf0, acc, #7    clamp8 out_v, rf0
 *     ldi rf1, #-3        load                store s
 *
 * Units not mentioned get empty programs. Disassembly is canonical: empty
 * units and zero AGU fields are omitted, so assemble(disassemble(img)) == img.
 */

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cgra/isa.hpp"

namespace cgra {

class AsmError : public Error {
public:
    enum class Kind { SyntaxError, UnknownMnemonic, OperandArity, KindViolation, InvalidProgram, DuplicateUnit };

    AsmError(Kind kind, int line, int col, const std::string& what)
        : Error("line " + std::to_string(line) + ", col " + std::to_string(col) + ": " + what),
          kind_(kind), line_(line), col_(col) {}

    Kind kind() const noexcept { return kind_; }
    int line() const noexcept { return line_; }
    int col() const noexcept { return col_; }

private:
    Kind kind_;
    int line_;
    int col_;
};

namespace detail::casm {

struct Token {
    std::string text;
    int col = 1;  // 1-based
};

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

/// Splits a comment-stripped line into words and commas.
inline std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> toks;
    std::size_t i = 0;
    while (i < line.size()) {
        const char ch = line[i];
        if (std::isspace(static_cast<unsigned char>(ch))) {
            ++i;
        } else if (ch == ',') {
            toks.push_back({",", static_cast<int>(i) + 1});
            ++i;
        } else {
            const std::size_t start = i;
            while (i < line.size() && line[i] != ',' && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            toks.push_back({std::string(line.substr(start, i - start)), static_cast<int>(start) + 1});
        }
    }
    return toks;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
    bool neg = false;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
        neg = s.front() == '-';
        s.remove_prefix(1);
    }
    int base = 10;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        base = 16;
        s.remove_prefix(2);
    }
    if (s.empty()) return std::nullopt;
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    if (v > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) return std::nullopt;
    const auto sv = static_cast<std::int64_t>(v);
    return neg ? -sv : sv;
}

inline std::optional<SrcSel> src_from_name(std::string_view name) {
    static const std::map<std::string, SrcSel, std::less<>> table = {
        {"n", SrcSel::N}, {"s", SrcSel::S}, {"e", SrcSel::E}, {"w", SrcSel::W},
        {"acc", SrcSel::ACC}, {"zero", SrcSel::ZERO},
        {"rf0", SrcSel::RF0}, {"rf1", SrcSel::RF1}, {"rf2", SrcSel::RF2}, {"rf3", SrcSel::RF3},
        {"rf4", SrcSel::RF4}, {"rf5", SrcSel::RF5}, {"rf6", SrcSel::RF6}, {"rf7", SrcSel::RF7}};
    if (auto it = table.find(name); it != table.end()) return it->second;
    return std::nullopt;
}

inline std::optional<DstSel> dst_from_name(std::string_view name) {
    static const std::map<std::string, DstSel, std::less<>> table = {
        {"null", DstSel::NUL}, {"out_h", DstSel::OUT_H}, {"out_v", DstSel::OUT_V}, {"out", DstSel::OUT_H},
        {"acc", DstSel::ACC},
        {"rf0", DstSel::RF0}, {"rf1", DstSel::RF1}, {"rf2", DstSel::RF2}, {"rf3", DstSel::RF3},
        {"rf4", DstSel::RF4}, {"rf5", DstSel::RF5}, {"rf6", DstSel::RF6}, {"rf7", DstSel::RF7}};
    if (auto it = table.find(name); it != table.end()) return it->second;
    return std::nullopt;
}

struct Loc {
    int line = 0;
    int col = 0;
};

/// Operand roles in source order for each opcode.
enum class Role { Dst, SrcA, SrcB, Imm };

inline std::vector<Role> operand_roles(Opcode op) {
    switch (op) {
    case Opcode::MOV: case Opcode::CLAMP8: return {Role::Dst, Role::SrcA};
    case Opcode::ADD: case Opcode::SUB: case Opcode::MUL: case Opcode::MAC4:
        return {Role::Dst, Role::SrcA, Role::SrcB};
    case Opcode::SRA: return {Role::Dst, Role::SrcA, Role::Imm};
    case Opcode::LDI: return {Role::Dst, Role::Imm};
    case Opcode::STORE: return {Role::SrcA};
    default: return {};
    }
}

class Parser {
public:
    Kernel parse(std::string_view source) {
        kernel_ = Kernel::empty();
        int line_no = 0;
        std::size_t pos = 0;
        while (pos <= source.size()) {
            std::size_t end = source.find('\n', pos);
            if (end == std::string_view::npos) end = source.size();
            std::string_view line = source.substr(pos, end - pos);
            ++line_no;
            if (auto semi = line.find(';'); semi != std::string_view::npos) line = line.substr(0, semi);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            statement(line_no, tokenize(line));
            if (end == source.size()) break;
            pos = end + 1;
        }
        check();
        return std::move(kernel_);
    }

private:
    [[noreturn]] void fail(AsmError::Kind k, int line, int col, const std::string& msg) const {
        throw AsmError(k, line, col, msg);
    }
    [[noreturn]] void syntax(int line, int col, const std::string& expected) const {
        fail(AsmError::Kind::SyntaxError, line, col, "expected " + expected);
    }

    std::int64_t number(int line, const Token& t, std::string_view text, std::int64_t lo, std::int64_t hi,
                        const std::string& what) const {
        auto v = parse_int(text);
        if (!v) syntax(line, t.col, "integer for " + what);
        if (*v < lo || *v > hi)
            fail(AsmError::Kind::SyntaxError, line, t.col,
                 what + " " + std::to_string(*v) + " out of range " + std::to_string(lo) + ".." + std::to_string(hi));
        return *v;
    }

    void statement(int line, const std::vector<Token>& toks) {
        if (toks.empty()) return;
        const std::string head = lower(toks[0].text);
        if (head == ".kernel") return kernel_directive(line, toks);
        if (head == ".unit") return unit_directive(line, toks);
        if (head == ".segment") return segment_directive(line, toks);
        if (!head.empty() && head[0] == '.') fail(AsmError::Kind::SyntaxError, line, toks[0].col, "unknown directive " + head);
        instruction(line, toks);
    }

    void kernel_directive(int line, const std::vector<Token>& toks) {
        if (saw_kernel_) fail(AsmError::Kind::SyntaxError, line, toks[0].col, "duplicate .kernel directive");
        if (current_) fail(AsmError::Kind::SyntaxError, line, toks[0].col, ".kernel must precede every .unit");
        saw_kernel_ = true;
        for (std::size_t i = 1; i < toks.size(); ++i) {
            auto [key, value] = split_kv(line, toks[i]);
            if (key != "outer_reps") syntax(line, toks[i].col, "outer_reps=<n>");
            kernel_.outer_reps = static_cast<std::uint16_t>(number(line, toks[i], value, 1, 65535, "outer_reps"));
        }
    }

    std::pair<std::string, std::string> split_kv(int line, const Token& t) const {
        const auto eq = t.text.find('=');
        if (eq == std::string::npos || eq == 0) syntax(line, t.col, "key=value");
        return {lower(std::string_view(t.text).substr(0, eq)), t.text.substr(eq + 1)};
    }

    void unit_directive(int line, const std::vector<Token>& toks) {
        if (toks.size() < 2) syntax(line, toks[0].col + 5, "unit kind (pe, mobw, mobn)");
        const std::string kind = lower(toks[1].text);
        NodeId id;
        if (kind == "pe") {
            if (toks.size() != 4) syntax(line, toks[1].col, "'pe <row> <col>'");
            const auto r = number(line, toks[2], toks[2].text, 0, kGridRows - 1, "row");
            const auto c = number(line, toks[3], toks[3].text, 0, kGridCols - 1, "column");
            id = NodeId::pe(static_cast<int>(r), static_cast<int>(c));
        } else if (kind == "mobw" || kind == "mobn") {
            if (toks.size() != 3) syntax(line, toks[1].col, "'" + kind + " <index>'");
            const auto v = number(line, toks[2], toks[2].text, 0, 3, "index");
            id = kind == "mobw" ? NodeId::mobw(static_cast<int>(v)) : NodeId::mobn(static_cast<int>(v));
        } else {
            syntax(line, toks[1].col, "unit kind (pe, mobw, mobn)");
        }
        auto& seen = seen_[static_cast<std::size_t>(id.index())];
        if (seen.line != 0)
            fail(AsmError::Kind::DuplicateUnit, line, toks[0].col,
                 "duplicate unit " + id.to_string() + " (first at line " + std::to_string(seen.line) + ")");
        seen = {line, toks[0].col};
        current_ = id;
    }

    void segment_directive(int line, const std::vector<Token>& toks) {
        if (!current_) fail(AsmError::Kind::SyntaxError, line, toks[0].col, ".segment outside a .unit block");
        Segment seg;
        bool have_repeat = false;
        for (std::size_t i = 1; i < toks.size(); ++i) {
            auto [key, value] = split_kv(line, toks[i]);
            if (key == "repeat") {
                seg.repeat = static_cast<std::uint16_t>(number(line, toks[i], value, 1, 65535, "repeat"));
                have_repeat = true;
            } else if (key == "base") {
                seg.agu.base = static_cast<std::uint32_t>(number(line, toks[i], value, 0, 0xFFFFFFFFLL, "base"));
            } else if (key == "stride_i") {
                seg.agu.stride_inner = static_cast<std::int16_t>(number(line, toks[i], value, -32768, 32767, "stride_i"));
            } else if (key == "count_i") {
                seg.agu.count_inner = static_cast<std::uint16_t>(number(line, toks[i], value, 0, 65535, "count_i"));
            } else if (key == "stride_o") {
                seg.agu.stride_outer = static_cast<std::int16_t>(number(line, toks[i], value, -32768, 32767, "stride_o"));
            } else {
                syntax(line, toks[i].col, "one of repeat, base, stride_i, count_i, stride_o");
            }
        }
        if (!have_repeat) syntax(line, toks[0].col, "repeat=<n> on .segment");
        auto& prog = kernel_.at(*current_);
        prog.segments.push_back(std::move(seg));
        seg_locs_[current_->index()].push_back({line, toks[0].col});
        slot_locs_[current_->index()].emplace_back();
    }

    void instruction(int line, const std::vector<Token>& toks) {
        const std::string mn = lower(toks[0].text);
        auto it = std::find(kMnemonics.begin(), kMnemonics.end(), mn);
        if (it == kMnemonics.end()) fail(AsmError::Kind::UnknownMnemonic, line, toks[0].col, "unknown mnemonic '" + mn + "'");
        if (!current_) fail(AsmError::Kind::SyntaxError, line, toks[0].col, "instruction outside a .unit block");
        auto& prog = kernel_.at(*current_);
        if (prog.segments.empty()) fail(AsmError::Kind::SyntaxError, line, toks[0].col, "instruction before .segment");

        Instruction in;
        in.op = static_cast<Opcode>(it - kMnemonics.begin());

        // operands: tok (',' tok)*
        std::vector<const Token*> ops;
        for (std::size_t i = 1; i < toks.size(); ++i) {
            const bool want_comma = (i % 2) == 0;
            if (want_comma != (toks[i].text == ",")) syntax(line, toks[i].col, want_comma ? "','" : "operand");
            if (!want_comma) ops.push_back(&toks[i]);
        }
        if (toks.size() > 1 && toks.back().text == ",") syntax(line, toks.back().col + 1, "operand after ','");

        const auto roles = operand_roles(in.op);
        if (ops.size() != roles.size())
            fail(AsmError::Kind::OperandArity, line, toks[0].col,
                 mn + " takes " + std::to_string(roles.size()) + " operand(s), got " + std::to_string(ops.size()));

        std::optional<std::int64_t> imm;
        auto take_imm = [&](const Token& t) {
            const auto v = number(line, t, std::string_view(t.text).substr(1), -128, 127, "immediate");
            if (imm && *imm != v) fail(AsmError::Kind::SyntaxError, line, t.col, "conflicting immediates in one instruction");
            imm = v;
        };
        for (std::size_t i = 0; i < roles.size(); ++i) {
            const Token& t = *ops[i];
            const std::string name = lower(t.text);
            switch (roles[i]) {
            case Role::Dst: {
                auto d = dst_from_name(name);
                if (!d) syntax(line, t.col, "destination register");
                in.dst = *d;
                break;
            }
            case Role::SrcA:
            case Role::SrcB: {
                SrcSel s;
                if (!name.empty() && name[0] == '#') {
                    take_imm(t);
                    s = SrcSel::IMM;
                } else if (auto v = src_from_name(name)) {
                    s = *v;
                } else {
                    syntax(line, t.col, "source operand");
                }
                (roles[i] == Role::SrcA ? in.src_a : in.src_b) = s;
                break;
            }
            case Role::Imm:
                if (name.empty() || name[0] != '#') syntax(line, t.col, "'#<imm>'");
                take_imm(t);
                break;
            }
        }
        if (imm) in.imm = static_cast<std::int8_t>(*imm);
        prog.segments.back().context.push_back(in);
        slot_locs_[current_->index()].back().push_back({line, toks[0].col});
    }

    void check() const {
        for (const auto& prog : kernel_.programs) {
            const int u = prog.unit.index();
            for (const auto& v : validate_program(prog)) {
                Loc loc = seen_[static_cast<std::size_t>(u)];
                if (v.segment >= 0) {
                    const auto s = static_cast<std::size_t>(v.segment);
                    loc = seg_locs_.at(u).at(s);
                    if (v.slot >= 0) loc = slot_locs_.at(u).at(s).at(static_cast<std::size_t>(v.slot));
                }
                const bool kind = v.reason.find("illegal on") != std::string::npos ||
                                  v.reason.find("not present on MOB") != std::string::npos ||
                                  v.reason.find("missing port") != std::string::npos;
                fail(kind ? AsmError::Kind::KindViolation : AsmError::Kind::InvalidProgram, loc.line, loc.col,
                     v.to_string());
            }
        }
    }

    Kernel kernel_;
    bool saw_kernel_ = false;
    std::optional<NodeId> current_;
    std::array<Loc, kNumUnits> seen_{};
    std::map<int, std::vector<Loc>> seg_locs_;
    std::map<int, std::vector<std::vector<Loc>>> slot_locs_;
};

inline std::string format_instruction(const Instruction& in) {
    std::string out(mnemonic(in.op));
    auto src = [&](SrcSel s) {
        return s == SrcSel::IMM ? "#" + std::to_string(in.imm) : std::string(src_name(s));
    };
    std::vector<std::string> ops;
    for (Role r : operand_roles(in.op)) {
        switch (r) {
        case Role::Dst: ops.emplace_back(dst_name(in.dst)); break;
        case Role::SrcA: ops.push_back(src(in.src_a)); break;
        case Role::SrcB: ops.push_back(src(in.src_b)); break;
        case Role::Imm: ops.push_back("#" + std::to_string(in.imm)); break;
        }
    }
    for (std::size_t i = 0; i < ops.size(); ++i) out += (i == 0 ? " " : ", ") + ops[i];
    return out;
}

inline std::string format_unit(NodeId n) {
    switch (n.kind) {
    case NodeKind::PE: return "pe " + std::to_string(n.row) + " " + std::to_string(n.col);
    case NodeKind::MOBW: return "mobw " + std::to_string(n.row);
    case NodeKind::MOBN: return "mobn " + std::to_string(n.col);
    }
    return "?";
}

}  // namespace detail::casm

/// Parses and validates .casm text into a kernel (no packing).
inline Kernel parse_kernel(std::string_view source) { return detail::casm::Parser{}.parse(source); }

/// Parses, validates and packs .casm text into a context image.
inline std::vector<std::uint8_t> assemble(std::string_view source) { return pack_image(parse_kernel(source)); }

/// Canonical text for a decoded kernel.
inline std::string disassemble(const Kernel& kernel) {
    std::ostringstream os;
    os << ".kernel outer_reps=" << kernel.outer_reps << "\n";
    for (const auto& prog : kernel.programs) {
        if (prog.segments.empty()) continue;
        os << "\n.unit " << detail::casm::format_unit(prog.unit) << "\n";
        for (const auto& seg : prog.segments) {
            os << ".segment repeat=" << seg.repeat;
            if (seg.agu.base != 0) {
                std::ostringstream hex;
                hex << std::hex << seg.agu.base;
                os << " base=0x" << hex.str();
            }
            if (seg.agu.stride_inner != 0) os << " stride_i=" << seg.agu.stride_inner;
            if (seg.agu.count_inner != 0) os << " count_i=" << seg.agu.count_inner;
            if (seg.agu.stride_outer != 0) os << " stride_o=" << seg.agu.stride_outer;
            os << "\n";
            for (const auto& in : seg.context) os << "  " << detail::casm::format_instruction(in) << "\n";
        }
    }
    return os.str();
}

inline std::string disassemble(std::span<const std::uint8_t> image) { return disassemble(unpack_image(image)); }

}  // namespace cgra
