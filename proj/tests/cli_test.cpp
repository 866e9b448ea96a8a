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


#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "cgra/assembler.hpp"
#include "cgra/io.hpp"

namespace cgra {
namespace {

namespace fs = std::filesystem;

const fs::path kKernels = CGRA_KERNEL_DIR;

class Cli : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        std::random_device rd;
        dir = fs::temp_directory_path() / ("cgra_cli_test_" + std::to_string(rd()));
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    /// Runs the CLI with `args` (shell syntax), stdout to out.txt, stderr to err.txt; returns the exit code.
    int cgra(const std::string& args) {
        const std::string cmd = std::string("\"") + CGRA_CLI + "\" " + args + " > \"" + (dir / "out.txt").string() +
                                "\" 2> \"" + (dir / "err.txt").string() + "\"";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    std::string out() const { return read_text(dir / "out.txt"); }
    std::string err() const { return read_text(dir / "err.txt"); }
    std::string p(const std::string& name) const { return "\"" + (dir / name).string() + "\""; }
};

TEST_F(Cli, AsmDasmRoundTripIsByteIdentical) {
    for (const auto& entry : fs::directory_iterator(kKernels)) {
        if (entry.path().extension() != ".casm") continue;
        ASSERT_EQ(cgra("asm \"" + entry.path().string() + "\" -o " + p("a.img")), 0) << err();
        ASSERT_EQ(cgra("dasm " + p("a.img")), 0) << err();
        // feed the disassembly back through stdin
        write_text(dir / "listing.casm", out());
        ASSERT_EQ(cgra("asm - -o " + p("b.img") + " < " + p("listing.casm")), 0) << err();
        EXPECT_EQ(read_file(dir / "a.img"), read_file(dir / "b.img")) << entry.path();
        EXPECT_EQ(read_file(dir / "a.img"), assemble(read_text(entry.path())));
    }
}

TEST_F(Cli, AsmErrorsAreUsageErrors) {
    write_text(dir / "bad.casm", ".unit pe 0 0\n.segment repeat=1\n  frob\n");
    EXPECT_EQ(cgra("asm " + p("bad.casm") + " -o " + p("x.img")), 2);
    EXPECT_NE(err().find("line 3"), std::string::npos) << err();
    EXPECT_EQ(cgra("asm " + p("missing.casm") + " -o " + p("x.img")), 2);
}

TEST_F(Cli, MapAndVerify) {
    ASSERT_EQ(cgra("map gemm --m 16 --n 16 --k 32 --seed 5 -o " + p("job")), 0) << err();
    EXPECT_EQ(json::parse(out())["predicted_cycles"], 320);
    ASSERT_EQ(cgra("verify --job " + p("job")), 0) << err();
    const json rep = json::parse(out());
    EXPECT_EQ(rep["match"], true);
    EXPECT_EQ(rep["measured_cycles"], 320);
    EXPECT_EQ(rep["counters"]["l1_read_bytes"], 4096);
}

TEST_F(Cli, MapWithOperandFiles) {
    std::vector<std::uint8_t> a(5 * 3), b(3 * 2);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<std::uint8_t>(i * 37);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<std::uint8_t>(200 + i);
    write_file(dir / "a.bin", a);
    write_file(dir / "b.bin", b);
    ASSERT_EQ(cgra("map gemm --m 5 --n 2 --k 3 --a " + p("a.bin") + " --b " + p("b.bin") + " -o " + p("job")), 0)
        << err();
    EXPECT_EQ(cgra("verify --job " + p("job")), 0) << err();
    EXPECT_EQ(cgra("map gemm --m 5 --n 2 --k 4 --a " + p("a.bin") + " --b " + p("b.bin") + " -o " + p("job2")), 2);
    EXPECT_EQ(cgra("map gemm --m 5 --n 2 --k 3 --a " + p("a.bin") + " -o " + p("job3")), 2);
}

TEST_F(Cli, CorruptedJobFailsVerification) {
    ASSERT_EQ(cgra("map gemm --m 8 --n 8 --k 16 --seed 2 -o " + p("job")), 0) << err();
    auto bt = read_file(dir / "job" / "bt_l1.bin");
    std::rotate(bt.begin(), bt.begin() + 4, bt.end());
    write_file(dir / "job" / "bt_l1.bin", bt);
    EXPECT_EQ(cgra("verify --job " + p("job")), 1);
    EXPECT_FALSE(json::parse(out())["first_mismatch"].is_null());
}

TEST_F(Cli, MapErrors) {
    EXPECT_EQ(cgra("map gemm --m 0 --n 4 --k 4 -o " + p("job")), 2);
    EXPECT_EQ(cgra("map gemm --m 4 --n 4 --k 70000 -o " + p("job")), 2);
    EXPECT_EQ(cgra("map gemm --m 64 --n 64 --k 64 --l1-size 1024 -o " + p("job")), 2);
    EXPECT_NE(err().find("L1"), std::string::npos) << err();
}

TEST_F(Cli, RunWithMemoryAndDump) {
    ASSERT_EQ(cgra("asm \"" + (kKernels / "mac_demo.casm").string() + "\" -o " + p("mac.img")), 0) << err();
    const std::vector<std::uint8_t> mem{1, 2, 3, 4, 4, 3, 2, 1};
    write_file(dir / "mem.bin", mem);
    ASSERT_EQ(cgra("run --img " + p("mac.img") + " --mem " + p("mem.bin") + "@0x0 --trace full --trace-out " +
                   p("t.jsonl") + " --dump 0x0:8:" + p("dump.bin")),
              0)
        << err();
    const json summary = json::parse(out());
    EXPECT_EQ(summary["status"], "completed");
    EXPECT_EQ(summary["cycles"], 3);
    EXPECT_EQ(summary["counters"]["mac4_ops"], 1);
    EXPECT_EQ(read_file(dir / "dump.bin"), mem);
    const std::string trace = read_text(dir / "t.jsonl");
    EXPECT_NE(trace.find("\"value\":20"), std::string::npos) << trace;
}

TEST_F(Cli, RunTraceIsDeterministic) {
    ASSERT_EQ(cgra("asm \"" + (kKernels / "ring_pass.casm").string() + "\" -o " + p("r.img")), 0) << err();
    ASSERT_EQ(cgra("run --img " + p("r.img") + " --trace full --trace-out " + p("t1.jsonl")), 0) << err();
    ASSERT_EQ(cgra("run --img " + p("r.img") + " --trace full --trace-out " + p("t2.jsonl")), 0) << err();
    EXPECT_EQ(read_file(dir / "t1.jsonl"), read_file(dir / "t2.jsonl"));
    EXPECT_FALSE(read_file(dir / "t1.jsonl").empty());
}

TEST_F(Cli, OutOfRangeStoreFaults) {
    ASSERT_EQ(cgra("asm \"" + (kKernels / "store_out_of_range.casm").string() + "\" -o " + p("s.img")), 0) << err();
    EXPECT_EQ(cgra("run --img " + p("s.img") + " --l1-size 256"), 3);
    const std::string e = err();
    EXPECT_NE(e.find("mobn(2)"), std::string::npos) << e;
    EXPECT_NE(e.find("cycle 2"), std::string::npos) << e;
    EXPECT_EQ(cgra("run --img " + p("s.img")), 0) << err();
}

TEST_F(Cli, CycleBudget) {
    ASSERT_EQ(cgra("asm \"" + (kKernels / "load_loop.casm").string() + "\" -o " + p("l.img")), 0) << err();
    EXPECT_EQ(cgra("run --img " + p("l.img") + " --max-cycles 5"), 4);
    EXPECT_EQ(json::parse(out())["status"], "cycle_budget_exceeded");
    EXPECT_EQ(cgra("run --img " + p("l.img") + " --max-cycles 8"), 0);
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(cgra(""), 2);
    EXPECT_EQ(cgra("frobnicate"), 2);
    EXPECT_EQ(cgra("run"), 2);
    EXPECT_EQ(cgra("run --img " + p("nope.img")), 2);
    write_file(dir / "junk.img", std::vector<std::uint8_t>{1, 2, 3});
    EXPECT_EQ(cgra("run --img " + p("junk.img")), 2);
    EXPECT_EQ(cgra("dasm " + p("junk.img")), 2);
    ASSERT_EQ(cgra("asm \"" + (kKernels / "load_loop.casm").string() + "\" -o " + p("l.img")), 0);
    EXPECT_EQ(cgra("run --img " + p("l.img") + " --trace sometimes --trace-out " + p("t")), 2);
    EXPECT_EQ(cgra("run --img " + p("l.img") + " --trace full"), 2);
    EXPECT_EQ(cgra("run --img " + p("l.img") + " --mem " + p("l.img") + "@zz"), 2);
    EXPECT_EQ(cgra("run --img " + p("l.img") + " --dump 0x0:4"), 2);
}

TEST_F(Cli, Attention) {
    ASSERT_EQ(cgra("attention --seq 8 --dim 16 --heads 2 --seed 3"), 0) << err();
    const json rep = json::parse(out());
    EXPECT_EQ(rep["all_match"], true);
    EXPECT_EQ(rep["heads"].size(), 2u);
    EXPECT_TRUE(rep["mean_mse_vs_float"].is_number());
}

TEST_F(Cli, ReportFromRunCounters) {
    ASSERT_EQ(cgra("map gemm --m 16 --n 16 --k 32 --seed 1 -o " + p("job")), 0) << err();
    ASSERT_EQ(cgra("run --img " + p("job/launch_000.img") + " --mem " + p("job/a_l1.bin") + "@0 --mem " +
                   p("job/bt_l1.bin") + "@0x200 --trace counters --trace-out " + p("c.json")),
              0)
        << err();
    ASSERT_EQ(cgra("report --counters " + p("c.json")), 0) << err();
    const json r = json::parse(out());
    EXPECT_EQ(r["cycles"], 80);
    EXPECT_EQ(r["l1_read_bytes"], 1024);
    EXPECT_GE(r["ratio"].get<double>(), 1.0);

    write_text(dir / "model.json", R"({"e_router_hop": 0})");
    ASSERT_EQ(cgra("report --counters " + p("c.json") + " --energy-model " + p("model.json")), 0) << err();
    EXPECT_EQ(json::parse(out())["ratio"], 1.0);

    write_text(dir / "neg.json", R"({"e_alu": -1})");
    EXPECT_EQ(cgra("report --counters " + p("c.json") + " --energy-model " + p("neg.json")), 2);
    write_text(dir / "unk.json", R"({"e_bogus": 1})");
    EXPECT_EQ(cgra("report --counters " + p("c.json") + " --energy-model " + p("unk.json")), 2);
}

}  // namespace
}  // namespace cgra
