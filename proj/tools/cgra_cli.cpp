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

// cgra: host-side driver. Owns L1 initialization, image loading, launch
// sequencing and result readback.
//
// Exit codes: 0 success/match, 1 verification mismatch, 2 usage or input
// error, 3 simulation fault, 4 cycle budget exceeded.

#include <algorithm>
#include <iostream>
#include <iterator>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cgra/cgra.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMismatch = 1;
constexpr int kExitUsage = 2;
constexpr int kExitFault = 3;
constexpr int kExitBudget = 4;

struct UsageError : cgra::Error {
    using cgra::Error::Error;
};

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(text, &used, 0);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw UsageError(what + ": not an unsigned integer: '" + text + "'");
    }
}

struct MemSpec {
    std::string path;
    std::size_t offset = 0;
    std::vector<std::uint8_t> bytes;
};

MemSpec parse_mem_spec(const std::string& spec) {
    const auto at = spec.rfind('@');
    if (at == std::string::npos || at == 0) throw UsageError("--mem: expected path@0xOFFSET, got '" + spec + "'");
    MemSpec m;
    m.path = spec.substr(0, at);
    m.offset = parse_u64(spec.substr(at + 1), "--mem offset");
    m.bytes = cgra::read_file(m.path);
    return m;
}

struct DumpSpec {
    std::size_t offset = 0;
    std::size_t len = 0;
    std::string path;
};

DumpSpec parse_dump_spec(const std::string& spec) {
    const auto c1 = spec.find(':');
    const auto c2 = c1 == std::string::npos ? c1 : spec.find(':', c1 + 1);
    if (c2 == std::string::npos) throw UsageError("--dump: expected 0xOFF:LEN:out.bin, got '" + spec + "'");
    return {parse_u64(spec.substr(0, c1), "--dump offset"), parse_u64(spec.substr(c1 + 1, c2 - c1 - 1), "--dump length"),
            spec.substr(c2 + 1)};
}

std::string read_source(const std::string& path) {
    if (path.empty() || path == "-") return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
    return cgra::read_text(path);
}

int cmd_asm(const std::string& in, const std::string& out) {
    cgra::write_file(out, cgra::assemble(read_source(in)));
    return kExitOk;
}

int cmd_dasm(const std::string& in) {
    std::cout << cgra::disassemble(cgra::read_file(in));
    return kExitOk;
}

struct MapOptions {
    std::uint32_t m = 0, n = 0, k = 0;
    std::string a_path, b_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::size_t l1_size = cgra::kDefaultL1Size;
};

int cmd_map_gemm(const MapOptions& o) {
    const cgra::TilePlan plan = cgra::plan_gemm({o.m, o.n, o.k}, o.l1_size);
    std::vector<std::int8_t> a, b;
    if (!o.a_path.empty() || !o.b_path.empty()) {
        if (o.a_path.empty() || o.b_path.empty()) throw UsageError("map gemm: --a and --b must be given together");
        auto to_i8 = [](const std::vector<std::uint8_t>& v) { return std::vector<std::int8_t>(v.begin(), v.end()); };
        a = to_i8(cgra::read_file(o.a_path));
        b = to_i8(cgra::read_file(o.b_path));
        if (a.size() != std::size_t{o.m} * o.k)
            throw cgra::FileError(o.a_path, "holds " + std::to_string(a.size()) + " bytes, expected m*k = " +
                                                std::to_string(std::size_t{o.m} * o.k));
        if (b.size() != std::size_t{o.k} * o.n)
            throw cgra::FileError(o.b_path, "holds " + std::to_string(b.size()) + " bytes, expected k*n = " +
                                                std::to_string(std::size_t{o.k} * o.n));
    } else {
        std::mt19937_64 rng(o.seed.value_or(1));
        a = cgra::random_matrix(o.m, o.k, rng).data;
        b = cgra::random_matrix(o.k, o.n, rng).data;
    }
    const cgra::GemmJob job = cgra::emit_gemm_job(plan, a, b);
    cgra::write_job_dir(job, o.out_dir);
    std::cout << cgra::job_descriptor(job).dump(2) << "\n";
    return kExitOk;
}

struct RunOptions {
    std::string image;
    std::vector<std::string> mems;
    std::size_t l1_size = cgra::kDefaultL1Size;
    std::uint64_t max_cycles = 100'000'000;
    std::string trace = "off";
    std::string trace_out;
    std::vector<std::string> dumps;
};

int cmd_run(const RunOptions& o) {
    cgra::TraceLevel level = cgra::TraceLevel::Off;
    if (o.trace == "counters") level = cgra::TraceLevel::Counters;
    else if (o.trace == "full") level = cgra::TraceLevel::Full;
    else if (o.trace != "off") throw UsageError("--trace: expected off|counters|full, got '" + o.trace + "'");
    if (level != cgra::TraceLevel::Off && o.trace_out.empty()) throw UsageError("--trace " + o.trace + " requires --trace-out");

    std::vector<MemSpec> mems;
    for (const auto& s : o.mems) mems.push_back(parse_mem_spec(s));
    std::vector<DumpSpec> dumps;
    for (const auto& s : o.dumps) dumps.push_back(parse_dump_spec(s));

    for (const auto& m : mems)
        if (m.offset > o.l1_size || m.bytes.size() > o.l1_size - m.offset)
            throw UsageError("--mem " + m.path + ": region does not fit L1 of " + std::to_string(o.l1_size) + " bytes");
    for (std::size_t i = 0; i < mems.size(); ++i)
        for (std::size_t j = i + 1; j < mems.size(); ++j) {
            const auto& x = mems[i];
            const auto& y = mems[j];
            if (x.offset < y.offset + y.bytes.size() && y.offset < x.offset + x.bytes.size())
                throw UsageError("--mem " + x.path + " overlaps " + y.path);
        }

    const auto image = cgra::read_file(o.image);
    cgra::Machine machine(o.l1_size);
    for (const auto& m : mems) machine.write_l1(m.offset, m.bytes);
    machine.load_image(image);

    cgra::RunResult result;
    try {
        result = machine.run(o.max_cycles, level);
    } catch (const cgra::AccessFault& f) {
        std::cerr << "cgra run: simulation fault: " << f.what() << "\n";
        return kExitFault;
    }

    if (level == cgra::TraceLevel::Full) cgra::write_text(o.trace_out, cgra::trace_to_jsonl(result.trace));
    if (level == cgra::TraceLevel::Counters) cgra::write_text(o.trace_out, cgra::to_json_value(result.counters).dump(2) + "\n");
    for (const auto& d : dumps) cgra::write_file(d.path, machine.read_l1(d.offset, d.len));

    const cgra::json summary = {{"status", result.completed() ? "completed" : "cycle_budget_exceeded"},
                                {"cycles", result.counters.cycles},
                                {"max_cycles", o.max_cycles},
                                {"counters", cgra::to_json_value(result.counters)}};
    std::cout << summary.dump(2) << "\n";
    if (!result.completed()) {
        std::cerr << "cgra run: cycle budget of " << o.max_cycles << " exceeded\n";
        return kExitBudget;
    }
    return kExitOk;
}

int cmd_verify(const std::string& dir) {
    const cgra::GemmJob job = cgra::read_job_dir(dir);
    const cgra::VerificationReport rep = cgra::run_and_verify(job);
    std::cout << cgra::to_json_value(rep).dump(2) << "\n";
    return rep.passed() ? kExitOk : kExitMismatch;
}

int cmd_attention(std::uint32_t seq, std::uint32_t dim, std::uint32_t heads, std::uint64_t seed) {
    const cgra::AttentionReport rep = cgra::attention_job(cgra::random_attention(seq, dim, heads, seed));
    std::cout << cgra::to_json_value(rep).dump(2) << "\n";
    return rep.all_match() ? kExitOk : kExitMismatch;
}

int cmd_report(const std::string& counters_path, const std::string& model_path) {
    const cgra::CounterSet counters = cgra::counters_from_json(cgra::read_json(counters_path));
    cgra::EnergyModel model;
    if (!model_path.empty()) {
        try {
            model = cgra::energy_model_from_json(cgra::read_json(model_path));
        } catch (const cgra::FileError&) {
            throw;
        } catch (const cgra::Error& e) {
            throw cgra::FileError(model_path, e.what());
        }
    }
    cgra::json doc = cgra::to_json_value(cgra::build_report(counters, model));
    doc["energy_model"] = cgra::to_json_value(model);
    std::cout << doc.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulator, assembler and GEMM mapper for a 4x4 PE + 4x2 MOB switchless-torus CGRA"};
    app.require_subcommand(1);

    std::string asm_in = "-", asm_out;
    auto* asm_cmd = app.add_subcommand("asm", "Assemble .casm text into a context image");
    asm_cmd->add_option("input", asm_in, "Source file ('-' or omitted for stdin)");
    asm_cmd->add_option("-o,--output", asm_out, "Output image")->required();

    std::string dasm_in;
    auto* dasm_cmd = app.add_subcommand("dasm", "Disassemble a context image to canonical .casm");
    dasm_cmd->add_option("input", dasm_in, "Context image")->required();

    MapOptions map_opts;
    auto* map_cmd = app.add_subcommand("map", "Map a workload onto the array");
    map_cmd->require_subcommand(1);
    auto* gemm_cmd = map_cmd->add_subcommand("gemm", "Emit a job directory for C = A x B");
    gemm_cmd->add_option("--m", map_opts.m, "Rows of A and C")->required()->check(CLI::PositiveNumber);
    gemm_cmd->add_option("--n", map_opts.n, "Columns of B and C")->required()->check(CLI::PositiveNumber);
    gemm_cmd->add_option("--k", map_opts.k, "Columns of A, rows of B")->required()->check(CLI::PositiveNumber);
    gemm_cmd->add_option("--a", map_opts.a_path, "A as raw int8, row-major m x k");
    gemm_cmd->add_option("--b", map_opts.b_path, "B as raw int8, row-major k x n");
    gemm_cmd->add_option("--seed", map_opts.seed, "Generate random operands with this seed when --a/--b are omitted");
    gemm_cmd->add_option("--l1-size", map_opts.l1_size, "L1 size in bytes");
    gemm_cmd->add_option("-o,--output", map_opts.out_dir, "Job directory")->required();

    RunOptions run_opts;
    auto* run_cmd = app.add_subcommand("run", "Run one context image");
    run_cmd->add_option("--img", run_opts.image, "Context image")->required();
    run_cmd->add_option("--mem", run_opts.mems, "L1 initialization, path@0xOFFSET (repeatable)");
    run_cmd->add_option("--l1-size", run_opts.l1_size, "L1 size in bytes");
    run_cmd->add_option("--max-cycles", run_opts.max_cycles, "Cycle budget");
    run_cmd->add_option("--trace", run_opts.trace, "off | counters | full");
    run_cmd->add_option("--trace-out", run_opts.trace_out, "Trace output file");
    run_cmd->add_option("--dump", run_opts.dumps, "Dump L1 after the run, 0xOFF:LEN:out.bin (repeatable)");

    std::string job_dir;
    auto* verify_cmd = app.add_subcommand("verify", "Run a job directory and compare against the reference GEMM");
    verify_cmd->add_option("--job", job_dir, "Job directory")->required();

    std::uint32_t seq = 0, dim = 0, heads = 0;
    std::uint64_t seed = 1;
    auto* att_cmd = app.add_subcommand("attention", "Random int8 attention: Q*K^T and P*V on the fabric");
    att_cmd->add_option("--seq", seq, "Sequence length")->required()->check(CLI::PositiveNumber);
    att_cmd->add_option("--dim", dim, "Head dimension")->required()->check(CLI::PositiveNumber);
    att_cmd->add_option("--heads", heads, "Number of heads")->required()->check(CLI::PositiveNumber);
    att_cmd->add_option("--seed", seed, "RNG seed");

    std::string counters_path, model_path;
    auto* report_cmd = app.add_subcommand("report", "Utilization, traffic and energy from a counter file");
    report_cmd->add_option("--counters", counters_path, "Counters JSON (bare or with a 'counters' member)")->required();
    report_cmd->add_option("--energy-model", model_path, "Energy coefficients JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*asm_cmd) return cmd_asm(asm_in, asm_out);
        if (*dasm_cmd) return cmd_dasm(dasm_in);
        if (*gemm_cmd) return cmd_map_gemm(map_opts);
        if (*run_cmd) return cmd_run(run_opts);
        if (*verify_cmd) return cmd_verify(job_dir);
        if (*att_cmd) return cmd_attention(seq, dim, heads, seed);
        if (*report_cmd) return cmd_report(counters_path, model_path);
    } catch (const cgra::AccessFault& e) {
        std::cerr << "cgra: simulation fault: " << e.what() << "\n";
        return kExitFault;
    } catch (const std::exception& e) {
        std::cerr << "cgra: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
