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
 * @file io.hpp
 * @brief JSON documents, JSON-Lines traces and job directories.
 *
 * A job directory holds
 *
 *     job.json          shape, padded shape, L1 regions, launches, predicted cycles
 *     a.bin, b.bin      original int8 operands, row-major (A m x k, B k x n)
 *     a_l1.bin          A region bytes (rows padded to k')
 *     bt_l1.bin         B^T region bytes (rows padded to k')
 *     launch_NNN.img    one context image per C tile row
 */

#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgra/engine.hpp"
#include "cgra/harness.hpp"
#include "cgra/mapper.hpp"
#include "cgra/metrics.hpp"

namespace cgra {

using json = nlohmann::json;

class FileError : public Error {
public:
    FileError(const std::filesystem::path& path, const std::string& what)
        : Error(path.string() + ": " + what) {}
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError(path, "cannot open for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_text(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError(path, "cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FileError(path, "write failed");
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline json read_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw FileError(path, std::string("invalid JSON: ") + e.what());
    }
}

// -- counters ---------------------------------------------------------------

inline json to_json_value(const CounterSet& c) {
    json units = json::array();
    for (int i = 0; i < kNumUnits; ++i) {
        const auto& u = c.units[static_cast<std::size_t>(i)];
        units.push_back({{"unit", NodeId::from_index(i).to_string()},
                         {"busy", u.busy},
                         {"idle", u.idle},
                         {"mac4_ops", u.mac4_ops},
                         {"port_reads", {{"N", u.port_reads[0]}, {"S", u.port_reads[1]}, {"E", u.port_reads[2]}, {"W", u.port_reads[3]}}}});
    }
    return {{"cycles", c.cycles},         {"mac4_ops", c.mac4_ops},
            {"alu_ops", c.alu_ops},       {"rf_writes", c.rf_writes},
            {"link_reads", c.link_reads}, {"loads", c.loads},
            {"stores", c.stores},         {"l1_read_bytes", c.l1_read_bytes},
            {"l1_write_bytes", c.l1_write_bytes}, {"units", units}};
}

/// Accepts a bare counter object or any document with a "counters" member.
inline CounterSet counters_from_json(const json& doc) {
    const json& j = doc.contains("counters") ? doc.at("counters") : doc;
    CounterSet c;
    try {
        c.cycles = j.at("cycles").get<std::uint64_t>();
        c.mac4_ops = j.at("mac4_ops").get<std::uint64_t>();
        c.alu_ops = j.at("alu_ops").get<std::uint64_t>();
        c.rf_writes = j.at("rf_writes").get<std::uint64_t>();
        c.link_reads = j.at("link_reads").get<std::uint64_t>();
        c.loads = j.at("loads").get<std::uint64_t>();
        c.stores = j.at("stores").get<std::uint64_t>();
        c.l1_read_bytes = j.at("l1_read_bytes").get<std::uint64_t>();
        c.l1_write_bytes = j.at("l1_write_bytes").get<std::uint64_t>();
        const json& units = j.at("units");
        if (units.size() != kNumUnits) throw Error("counters: expected 24 unit entries");
        for (std::size_t i = 0; i < kNumUnits; ++i) {
            auto& u = c.units[i];
            u.busy = units[i].at("busy").get<std::uint64_t>();
            u.idle = units[i].at("idle").get<std::uint64_t>();
            u.mac4_ops = units[i].value("mac4_ops", std::uint64_t{0});
            if (units[i].contains("port_reads")) {
                const json& pr = units[i]["port_reads"];
                for (Port p : kAllPorts) u.port_reads[static_cast<std::size_t>(p)] = pr.value(port_name(p), std::uint64_t{0});
            }
        }
    } catch (const json::exception& e) {
        throw Error(std::string("counters: ") + e.what());
    }
    return c;
}

// -- traces -----------------------------------------------------------------

inline std::string trace_line(const TraceRecord& r) {
    json j = {{"cycle", r.cycle}, {"unit", r.unit.to_string()}, {"opcode", mnemonic(r.op)},
              {"dst", r.dst_label()}, {"value", r.value}};
    if (r.addr) j["addr"] = *r.addr;
    return j.dump();
}

inline std::string trace_to_jsonl(std::span<const TraceRecord> trace) {
    std::string out;
    for (const auto& r : trace) {
        out += trace_line(r);
        out += '\n';
    }
    return out;
}

// -- energy model and report -------------------------------------------------

inline EnergyModel energy_model_from_json(const json& j) {
    if (!j.is_object()) throw Error("energy model: expected a JSON object");
    EnergyModel m;
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const auto& [name, field] : EnergyModel::kFields) {
            if (key == name) {
                if (!value.is_number()) throw Error("energy model: " + key + " must be a number");
                m.*field = value.get<double>();
                known = true;
            }
        }
        if (!known) throw Error("energy model: unknown key " + key);
    }
    m.validate();
    return m;
}

inline json to_json_value(const EnergyModel& m) {
    json j = json::object();
    for (const auto& [name, field] : EnergyModel::kFields) j[name] = m.*field;
    return j;
}

inline json to_json_value(const Report& r) {
    json units = json::array();
    for (const auto& u : r.units) units.push_back({{"unit", u.unit.to_string()}, {"busy", u.busy}, {"utilization", u.utilization}});
    json links = json::array();
    for (const auto& l : r.links)
        links.push_back({{"from", l.link.from.to_string()}, {"to", l.link.to.to_string()}, {"reads", l.reads}});
    return {{"cycles", r.cycles},
            {"units", units},
            {"l1_read_bytes", r.l1_read_bytes},
            {"l1_write_bytes", r.l1_write_bytes},
            {"traffic_bytes", r.traffic_bytes},
            {"link_reads", r.link_reads},
            {"links", links},
            {"energy_units", "abstract (model-based event weights, not silicon power)"},
            {"energy_switchless", r.energy_switchless},
            {"energy_switched_baseline", r.energy_switched_baseline},
            {"baseline_model", "one router traversal per neighbor operand read"},
            {"ratio", r.ratio}};
}

// -- verification -------------------------------------------------------------

inline json to_json_value(const VerificationReport& r) {
    json j = {{"match", r.match},
              {"cycles_exact", r.cycles_exact()},
              {"passed", r.passed()},
              {"completed", r.completed},
              {"measured_cycles", r.measured_cycles},
              {"predicted_cycles", r.predicted_cycles},
              {"launch_cycles", r.launch_cycles},
              {"max_image_bytes", r.max_image_bytes},
              {"counters", to_json_value(r.counters)}};
    if (r.first_mismatch) {
        const auto& m = *r.first_mismatch;
        j["first_mismatch"] = {{"row", m.row}, {"col", m.col}, {"expected", m.expected}, {"actual", m.actual}};
    } else {
        j["first_mismatch"] = nullptr;
    }
    return j;
}

inline json to_json_value(const AttentionReport& r) {
    json heads = json::array();
    for (std::size_t h = 0; h < r.heads.size(); ++h) {
        const auto& hr = r.heads[h];
        heads.push_back({{"head", h},
                         {"scores_gemm", to_json_value(hr.scores)},
                         {"output_gemm", to_json_value(hr.output)},
                         {"mse_vs_float", hr.mse}});
    }
    return {{"seq_len", r.seq_len},   {"head_dim", r.head_dim}, {"num_heads", r.num_heads},
            {"all_match", r.all_match()}, {"mean_mse_vs_float", r.mean_mse},
            {"mse_note", "informational only"}, {"heads", heads}};
}

// -- job directories ------------------------------------------------------------

inline std::string launch_image_name(std::size_t i) {
    std::ostringstream os;
    os << "launch_" << (i < 100 ? (i < 10 ? "00" : "0") : "") << i << ".img";
    return os.str();
}

inline json job_descriptor(const GemmJob& job) {
    const TilePlan& p = job.plan;
    auto region = [](const Region& r, const char* file) {
        json j = {{"offset", r.offset}, {"size", r.size}};
        if (file) j["file"] = file;
        return j;
    };
    json launches = json::array();
    for (std::size_t i = 0; i < job.images.size(); ++i)
        launches.push_back({{"tile_row", i},
                            {"image", launch_image_name(i)},
                            {"image_bytes", job.images[i].size()},
                            {"outer_reps", p.tile_cols},
                            {"predicted_cycles", p.cycles_per_launch()}});
    return {{"format", "cgra-gemm-job"},
            {"version", 1},
            {"shape", {{"m", p.shape.m}, {"n", p.shape.n}, {"k", p.shape.k}}},
            {"padded", {{"m", p.padded.m}, {"n", p.padded.n}, {"k", p.padded.k}}},
            {"l1_size", p.l1_size},
            {"inputs", {{"a", "a.bin"}, {"b", "b.bin"}}},
            {"regions",
             {{"a", region(p.layout.a, "a_l1.bin")},
              {"bt", region(p.layout.bt, "bt_l1.bin")},
              {"c", region(p.layout.c, nullptr)}}},
            {"iteration_length", p.iteration_length},
            {"schedule_overhead", kScheduleOverhead},
            {"launches", launches},
            {"predicted_cycles", p.predicted_cycles}};
}

inline void write_job_dir(const GemmJob& job, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw FileError(dir, "cannot create directory: " + ec.message());
    auto as_bytes = [](const std::vector<std::int8_t>& v) {
        return std::span(reinterpret_cast<const std::uint8_t*>(v.data()), v.size());
    };
    write_file(dir / "a.bin", as_bytes(job.a));
    write_file(dir / "b.bin", as_bytes(job.b));
    write_file(dir / "a_l1.bin", job.a_l1);
    write_file(dir / "bt_l1.bin", job.bt_l1);
    for (std::size_t i = 0; i < job.images.size(); ++i) write_file(dir / launch_image_name(i), job.images[i]);
    write_text(dir / "job.json", job_descriptor(job).dump(2) + "\n");
}

/// Loads a job exactly as stored on disk; layout bytes and images are taken from the files.
inline GemmJob read_job_dir(const std::filesystem::path& dir) {
    const json desc = read_json(dir / "job.json");
    GemmJob job;
    try {
        const GemmShape shape{desc.at("shape").at("m").get<std::uint32_t>(), desc.at("shape").at("n").get<std::uint32_t>(),
                              desc.at("shape").at("k").get<std::uint32_t>()};
        job.plan = plan_gemm(shape, desc.at("l1_size").get<std::size_t>());
        if (desc.at("predicted_cycles").get<std::uint64_t>() != job.plan.predicted_cycles)
            throw FileError(dir / "job.json", "predicted_cycles disagrees with the plan for this shape");
        auto load_i8 = [&](const std::string& name) {
            const auto bytes = read_file(dir / name);
            return std::vector<std::int8_t>(bytes.begin(), bytes.end());
        };
        job.a = load_i8(desc.at("inputs").at("a").get<std::string>());
        job.b = load_i8(desc.at("inputs").at("b").get<std::string>());
        if (job.a.size() != std::size_t{shape.m} * shape.k) throw FileError(dir / "a.bin", "size does not match shape");
        if (job.b.size() != std::size_t{shape.k} * shape.n) throw FileError(dir / "b.bin", "size does not match shape");
        job.a_l1 = read_file(dir / desc.at("regions").at("a").at("file").get<std::string>());
        job.bt_l1 = read_file(dir / desc.at("regions").at("bt").at("file").get<std::string>());
        if (job.a_l1.size() != job.plan.layout.a.size) throw FileError(dir / "a_l1.bin", "size does not match region");
        if (job.bt_l1.size() != job.plan.layout.bt.size) throw FileError(dir / "bt_l1.bin", "size does not match region");
        for (const auto& l : desc.at("launches")) job.images.push_back(read_file(dir / l.at("image").get<std::string>()));
        if (job.images.size() != job.plan.tile_rows) throw FileError(dir / "job.json", "launch count does not match plan");
    } catch (const json::exception& e) {
        throw FileError(dir / "job.json", std::string("malformed job descriptor: ") + e.what());
    }
    return job;
}

}  // namespace cgra
