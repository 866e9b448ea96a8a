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
 * @file engine.hpp
 * @brief Cycle-stepped execution of the 24 units against a shared L1.
 *
 * Each cycle runs in two phases. In the read phase every unit fetches its
 * operands; a neighbor-port read sees the neighbor's output register as it was
 * at the end of the previous cycle. In the commit phase every unit writes its
 * own registers, then stores are applied to L1 in canonical unit order. A value
 * therefore crosses at most one link per cycle, and any number of neighbors may
 * read the same output register in the same cycle.
 *
 * Port reads resolve as follows: through E/W a unit sees the neighbor's out_h,
 * through N/S the neighbor's out_v; a MOB exposes its single `out` register on
 * both of its ports.
 *
 * L1 is an ideal single-cycle memory: a LOAD result sits in the MOB's `out` at
 * the end of the issuing cycle, and all 8 MOBs may access L1 in the same cycle.
 */

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cgra/fabric.hpp"
#include "cgra/isa.hpp"

namespace cgra {

inline constexpr std::size_t kDefaultL1Size = 131072;

enum class TraceLevel { Off, Counters, Full };

struct UnitCounters {
    std::uint64_t busy = 0;
    std::uint64_t idle = 0;
    std::uint64_t mac4_ops = 0;
    /// Operand reads through each port, indexed by Port.
    std::array<std::uint64_t, 4> port_reads{};

    friend bool operator==(const UnitCounters&, const UnitCounters&) = default;
};

struct CounterSet {
    std::uint64_t cycles = 0;
    std::uint64_t mac4_ops = 0;
    std::uint64_t alu_ops = 0;  // MOV ADD SUB MUL SRA CLAMP8 LDI DRN
    std::uint64_t rf_writes = 0;
    std::uint64_t link_reads = 0;
    std::uint64_t loads = 0;
    std::uint64_t stores = 0;
    std::uint64_t l1_read_bytes = 0;
    std::uint64_t l1_write_bytes = 0;
    std::array<UnitCounters, kNumUnits> units{};

    const UnitCounters& unit(NodeId n) const { return units.at(static_cast<std::size_t>(n.index())); }

    std::uint64_t total_idle() const noexcept {
        std::uint64_t s = 0;
        for (const auto& u : units) s += u.idle;
        return s;
    }

    CounterSet& operator+=(const CounterSet& o) noexcept {
        cycles += o.cycles;
        mac4_ops += o.mac4_ops;
        alu_ops += o.alu_ops;
        rf_writes += o.rf_writes;
        link_reads += o.link_reads;
        loads += o.loads;
        stores += o.stores;
        l1_read_bytes += o.l1_read_bytes;
        l1_write_bytes += o.l1_write_bytes;
        for (std::size_t i = 0; i < units.size(); ++i) {
            units[i].busy += o.units[i].busy;
            units[i].idle += o.units[i].idle;
            units[i].mac4_ops += o.units[i].mac4_ops;
            for (std::size_t p = 0; p < 4; ++p) units[i].port_reads[p] += o.units[i].port_reads[p];
        }
        return *this;
    }

    friend bool operator==(const CounterSet&, const CounterSet&) = default;
};

/// One executed (non-NOP) instruction.
struct TraceRecord {
    std::uint64_t cycle = 0;
    NodeId unit;
    Opcode op = Opcode::NOP;
    DstSel dst = DstSel::NUL;
    std::int32_t value = 0;
    std::optional<std::uint32_t> addr;

    /// Name of the register (or "mem") the instruction wrote.
    std::string_view dst_label() const {
        switch (op) {
        case Opcode::MAC4: return "acc";
        case Opcode::DRN: return "out_v";
        case Opcode::LOAD: return "out";
        case Opcode::STORE: return "mem";
        default: break;
        }
        if (unit.is_mob() && (dst == DstSel::OUT_H || dst == DstSel::OUT_V)) return "out";
        return dst_name(dst);
    }

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

enum class RunStatus { Completed, CycleBudgetExceeded };

struct RunResult {
    RunStatus status = RunStatus::Completed;
    std::uint64_t max_cycles = 0;
    CounterSet counters;
    std::vector<TraceRecord> trace;  // only filled for TraceLevel::Full

    bool completed() const noexcept { return status == RunStatus::Completed; }
};

/// Halting L1 access error raised by a LOAD/STORE.
class AccessFault : public Error {
public:
    enum class Kind { Misaligned, OutOfRange };

    AccessFault(Kind kind, NodeId unit, std::uint64_t cycle, std::int64_t address)
        : Error(std::string(kind == Kind::Misaligned ? "misaligned" : "out-of-range") + " L1 access by " +
                unit.to_string() + " at cycle " + std::to_string(cycle) + ", address " + std::to_string(address)),
          kind_(kind), unit_(unit), cycle_(cycle), address_(address) {}

    Kind kind() const noexcept { return kind_; }
    NodeId unit() const noexcept { return unit_; }
    std::uint64_t cycle() const noexcept { return cycle_; }
    std::int64_t address() const noexcept { return address_; }

private:
    Kind kind_;
    NodeId unit_;
    std::uint64_t cycle_;
    std::int64_t address_;
};

class L1RangeError : public Error {
public:
    L1RangeError(std::size_t offset, std::size_t len, std::size_t l1_size)
        : Error("L1 range [" + std::to_string(offset) + ", +" + std::to_string(len) + ") outside L1 of " +
                std::to_string(l1_size) + " bytes") {}
};

class MachineBusy : public Error {
public:
    MachineBusy() : Error("cannot load a context image while a kernel is mid-run") {}
};

namespace alu {

constexpr std::int32_t wrap(std::int64_t v) noexcept {
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(static_cast<std::uint64_t>(v)));
}
constexpr std::int32_t add(std::int32_t a, std::int32_t b) noexcept {
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(a) + static_cast<std::uint32_t>(b));
}
constexpr std::int32_t sub(std::int32_t a, std::int32_t b) noexcept {
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(a) - static_cast<std::uint32_t>(b));
}
constexpr std::int32_t mul(std::int32_t a, std::int32_t b) noexcept {
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(a) * static_cast<std::uint32_t>(b));
}
constexpr std::int32_t lane(std::int32_t word, int i) noexcept {
    return static_cast<std::int8_t>(static_cast<std::uint8_t>(static_cast<std::uint32_t>(word) >> (8 * i)));
}
/// acc + sum over 4 int8 lanes of a*b, wrapping at 32 bits.
constexpr std::int32_t mac4(std::int32_t acc, std::int32_t a, std::int32_t b) noexcept {
    std::int32_t dot = 0;
    for (int i = 0; i < 4; ++i) dot += lane(a, i) * lane(b, i);
    return add(acc, dot);
}
constexpr std::int32_t clamp8(std::int32_t a) noexcept { return a < -128 ? -128 : (a > 127 ? 127 : a); }
constexpr std::int32_t sra(std::int32_t a, int shift) noexcept { return a >> (shift & 31); }
/// Little-endian packing of four int8 lanes into one word.
constexpr std::int32_t pack4(std::int8_t l0, std::int8_t l1, std::int8_t l2, std::int8_t l3) noexcept {
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(static_cast<std::uint8_t>(l0)) |
                                     static_cast<std::uint32_t>(static_cast<std::uint8_t>(l1)) << 8 |
                                     static_cast<std::uint32_t>(static_cast<std::uint8_t>(l2)) << 16 |
                                     static_cast<std::uint32_t>(static_cast<std::uint8_t>(l3)) << 24);
}

}  // namespace alu

class Machine {
public:
    explicit Machine(std::size_t l1_size = kDefaultL1Size) : l1_(l1_size, 0) { clear_programs(); }

    std::size_t l1_size() const noexcept { return l1_.size(); }

    // -- host side -----------------------------------------------------------

    void write_l1(std::size_t offset, std::span<const std::uint8_t> bytes) {
        check_range(offset, bytes.size());
        if (!bytes.empty()) std::memcpy(l1_.data() + offset, bytes.data(), bytes.size());
    }

    std::vector<std::uint8_t> read_l1(std::size_t offset, std::size_t len) const {
        check_range(offset, len);
        return {l1_.begin() + static_cast<std::ptrdiff_t>(offset),
                l1_.begin() + static_cast<std::ptrdiff_t>(offset + len)};
    }

    std::span<const std::uint8_t> l1() const noexcept { return l1_; }

    /// Memory-controller step: decodes, validates and installs every unit program.
    void load_image(std::span<const std::uint8_t> image) { load_kernel(unpack_image(image)); }

    void load_kernel(const Kernel& kernel) {
        if (mid_run()) throw MachineBusy();
        if (kernel.programs.size() != kNumUnits)
            throw ImageError(ImageError::Kind::MissingUnit, 0, "kernel must hold 24 programs");
        if (kernel.outer_reps == 0) throw ImageError(ImageError::Kind::NonCanonical, 0, "outer_reps must be >= 1");
        std::vector<Violation> violations;
        std::array<bool, kNumUnits> seen{};
        for (const auto& p : kernel.programs) {
            auto v = validate_program(p);
            violations.insert(violations.end(), v.begin(), v.end());
            if (p.unit.valid()) {
                auto& s = seen[static_cast<std::size_t>(p.unit.index())];
                if (s) throw ImageError(ImageError::Kind::DuplicateUnit, 0, "duplicate program for " + p.unit.to_string());
                s = true;
            }
        }
        if (!violations.empty()) throw InvalidProgram(std::move(violations));

        clear_programs();
        outer_reps_ = kernel.outer_reps;
        for (const auto& p : kernel.programs) programs_[static_cast<std::size_t>(p.unit.index())] = p;
        reset_state();
    }

    /// Abandons a partially executed kernel; state and counters return to the loaded-but-not-run point.
    void reset() { reset_state(); }

    bool finished() const noexcept {
        for (const auto& u : units_)
            if (!u.exhausted) return false;
        return true;
    }

    bool mid_run() const noexcept { return counters_.cycles > 0 && !finished(); }

    // -- execution -----------------------------------------------------------

    /// Advances one cycle and returns the non-idle events of that cycle.
    std::vector<TraceRecord> step() {
        std::vector<TraceRecord> events;
        step_impl(&events);
        return events;
    }

    RunResult run(std::uint64_t max_cycles, TraceLevel level = TraceLevel::Counters) {
        RunResult result;
        result.max_cycles = max_cycles;
        std::vector<TraceRecord>* sink = level == TraceLevel::Full ? &result.trace : nullptr;
        while (!finished()) {
            if (counters_.cycles >= max_cycles) {
                result.status = RunStatus::CycleBudgetExceeded;
                break;
            }
            step_impl(sink);
        }
        result.counters = counters_;
        return result;
    }

    const CounterSet& counters() const noexcept { return counters_; }
    std::uint64_t cycle() const noexcept { return counters_.cycles; }

    // -- inspection ----------------------------------------------------------

    std::int32_t acc(NodeId n) const { return unit(n).acc; }
    std::int32_t out_h(NodeId n) const { return unit(n).out_h; }
    std::int32_t out_v(NodeId n) const { return n.is_mob() ? unit(n).out_h : unit(n).out_v; }
    std::int32_t mob_out(NodeId n) const { return unit(n).out_h; }
    std::int32_t rf(NodeId n, int i) const { return unit(n).rf.at(static_cast<std::size_t>(i)); }

private:
    struct UnitState {
        std::array<std::int32_t, kNumRegs> rf{};
        std::int32_t acc = 0;
        std::int32_t out_h = 0;  // MOBs keep their single `out` here
        std::int32_t out_v = 0;
        std::size_t seg = 0;
        std::uint32_t rep = 0;
        std::size_t ctx = 0;
        std::uint32_t outer = 0;
        std::uint64_t agu_k = 0;
        bool exhausted = true;
    };

    struct PendingStore {
        std::uint32_t addr;
        std::int32_t value;
    };

    const UnitState& unit(NodeId n) const { return units_.at(static_cast<std::size_t>(n.index())); }

    void check_range(std::size_t offset, std::size_t len) const {
        if (offset > l1_.size() || len > l1_.size() - offset) throw L1RangeError(offset, len, l1_.size());
    }

    void clear_programs() {
        for (int i = 0; i < kNumUnits; ++i) {
            programs_[static_cast<std::size_t>(i)] = UnitProgram{NodeId::from_index(i), {}};
            const NodeId n = NodeId::from_index(i);
            for (Port p : kAllPorts)
                neighbors_[static_cast<std::size_t>(i)][static_cast<std::size_t>(p)] =
                    has_port(n, p) ? neighbor(n, p).index() : -1;
        }
        outer_reps_ = 1;
    }

    void reset_state() {
        counters_ = CounterSet{};
        for (std::size_t i = 0; i < units_.size(); ++i) {
            units_[i] = UnitState{};
            units_[i].exhausted = programs_[i].segments.empty();
        }
    }

    std::int32_t read_port(const std::array<UnitState, kNumUnits>& prev, std::size_t self, Port p) const {
        const int nb = neighbors_[self][static_cast<std::size_t>(p)];
        const auto& s = prev[static_cast<std::size_t>(nb)];
        if (nb >= kNumPes) return s.out_h;
        return (p == Port::E || p == Port::W) ? s.out_h : s.out_v;
    }

    std::uint32_t agu_address(std::size_t idx, const Segment& seg, const UnitState& st) const {
        const NodeId n = NodeId::from_index(static_cast<int>(idx));
        const std::int64_t addr = seg.agu.address(st.agu_k, st.outer);
        if (addr % 4 != 0) throw AccessFault(AccessFault::Kind::Misaligned, n, counters_.cycles, addr);
        if (addr < 0 || addr + 4 > static_cast<std::int64_t>(l1_.size()))
            throw AccessFault(AccessFault::Kind::OutOfRange, n, counters_.cycles, addr);
        return static_cast<std::uint32_t>(addr);
    }

    std::int32_t load_word(std::uint32_t addr) const {
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = v << 8 | l1_[addr + static_cast<std::uint32_t>(i)];
        return static_cast<std::int32_t>(v);
    }

    void store_word(std::uint32_t addr, std::int32_t value) {
        auto v = static_cast<std::uint32_t>(value);
        for (int i = 0; i < 4; ++i, v >>= 8) l1_[addr + static_cast<std::uint32_t>(i)] = static_cast<std::uint8_t>(v);
    }

    void advance(std::size_t idx) {
        UnitState& st = units_[idx];
        const auto& segs = programs_[idx].segments;
        const Segment& seg = segs[st.seg];
        if (++st.ctx < seg.context.size()) return;
        st.ctx = 0;
        if (++st.rep < seg.repeat) return;
        st.rep = 0;
        st.agu_k = 0;
        if (++st.seg < segs.size()) return;
        st.seg = 0;
        if (++st.outer < outer_reps_) return;
        st.exhausted = true;
    }

    void step_impl(std::vector<TraceRecord>* sink) {
        const std::array<UnitState, kNumUnits> prev = units_;
        const std::uint64_t now = counters_.cycles;
        std::vector<PendingStore> stores;

        for (std::size_t i = 0; i < units_.size(); ++i) {
            UnitState& st = units_[i];
            UnitCounters& uc = counters_.units[i];
            if (st.exhausted) {
                ++uc.idle;
                continue;
            }
            const Segment& seg = programs_[i].segments[st.seg];
            const Instruction& in = seg.context[st.ctx];
            if (in.op == Opcode::NOP) {
                ++uc.idle;
                advance(i);
                continue;
            }
            ++uc.busy;
            const NodeId self = NodeId::from_index(static_cast<int>(i));
            const UnitState& old = prev[i];

            auto src = [&](SrcSel s) -> std::int32_t {
                if (is_port(s)) {
                    ++counters_.link_reads;
                    ++uc.port_reads[static_cast<std::size_t>(s)];
                    return read_port(prev, i, to_port(s));
                }
                if (is_rf(s)) return old.rf[static_cast<std::size_t>(rf_index(s))];
                switch (s) {
                case SrcSel::ACC: return old.acc;
                case SrcSel::IMM: return in.imm;
                default: return 0;
                }
            };
            auto write = [&](DstSel d, std::int32_t v) {
                if (is_rf(d)) {
                    st.rf[static_cast<std::size_t>(rf_index(d))] = v;
                    ++counters_.rf_writes;
                    return;
                }
                switch (d) {
                case DstSel::OUT_H: st.out_h = v; break;
                case DstSel::OUT_V:
                    if (self.is_mob()) st.out_h = v;
                    else st.out_v = v;
                    break;
                case DstSel::ACC: st.acc = v; break;
                default: break;
                }
            };

            TraceRecord rec{now, self, in.op, in.dst, 0, std::nullopt};
            switch (in.op) {
            case Opcode::MOV:
                rec.value = src(in.src_a);
                write(in.dst, rec.value);
                ++counters_.alu_ops;
                break;
            case Opcode::ADD:
            case Opcode::SUB:
            case Opcode::MUL: {
                const std::int32_t a = src(in.src_a);
                const std::int32_t b = src(in.src_b);
                rec.value = in.op == Opcode::ADD ? alu::add(a, b) : in.op == Opcode::SUB ? alu::sub(a, b) : alu::mul(a, b);
                write(in.dst, rec.value);
                ++counters_.alu_ops;
                break;
            }
            case Opcode::MAC4: {
                const std::int32_t a = src(in.src_a);
                const std::int32_t b = src(in.src_b);
                st.acc = alu::mac4(old.acc, a, b);
                st.out_h = a;
                st.out_v = b;
                rec.value = st.acc;
                ++counters_.mac4_ops;
                ++uc.mac4_ops;
                break;
            }
            case Opcode::DRN:
                st.out_v = old.acc;
                st.acc = 0;
                rec.value = old.acc;
                ++counters_.alu_ops;
                break;
            case Opcode::SRA:
                rec.value = alu::sra(src(in.src_a), in.imm);
                write(in.dst, rec.value);
                ++counters_.alu_ops;
                break;
            case Opcode::CLAMP8:
                rec.value = alu::clamp8(src(in.src_a));
                write(in.dst, rec.value);
                ++counters_.alu_ops;
                break;
            case Opcode::LDI:
                rec.value = in.imm;
                write(in.dst, rec.value);
                ++counters_.alu_ops;
                break;
            case Opcode::LOAD: {
                const std::uint32_t addr = agu_address(i, seg, st);
                rec.addr = addr;
                rec.value = load_word(addr);
                st.out_h = rec.value;
                ++st.agu_k;
                ++counters_.loads;
                counters_.l1_read_bytes += 4;
                break;
            }
            case Opcode::STORE: {
                const std::uint32_t addr = agu_address(i, seg, st);
                rec.addr = addr;
                rec.value = src(in.src_a);
                stores.push_back({addr, rec.value});
                ++st.agu_k;
                ++counters_.stores;
                counters_.l1_write_bytes += 4;
                break;
            }
            case Opcode::NOP:
                break;
            }
            if (sink) sink->push_back(rec);
            advance(i);
        }
        for (const auto& s : stores) store_word(s.addr, s.value);
        ++counters_.cycles;
    }

    std::vector<std::uint8_t> l1_;
    std::array<UnitProgram, kNumUnits> programs_{};
    std::array<std::array<int, 4>, kNumUnits> neighbors_{};
    std::array<UnitState, kNumUnits> units_{};
    std::uint16_t outer_reps_ = 1;
    CounterSet counters_;
};

}  // namespace cgra
