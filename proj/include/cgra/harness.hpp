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
 * @file harness.hpp
 * @brief Reference GEMM, end-to-end verification and the attention workload.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cgra/engine.hpp"
#include "cgra/mapper.hpp"

namespace cgra {

template <typename T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<T> values) : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != r * c) throw Error("matrix data size does not match shape");
    }

    T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

using MatrixI8 = Matrix<std::int8_t>;
using MatrixI32 = Matrix<std::int32_t>;

template <typename T>
Matrix<T> transpose(const Matrix<T>& m) {
    Matrix<T> t(m.cols, m.rows);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) t(c, r) = m(r, c);
    return t;
}

inline MatrixI8 random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> dist(-128, 127);
    MatrixI8 m(rows, cols);
    for (auto& v : m.data) v = static_cast<std::int8_t>(dist(rng));
    return m;
}

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

/// c_ij = sum_k a_ik * b_kj, straight triple loop.
inline MatrixI32 gemm_ref(const MatrixI8& a, const MatrixI8& b) {
    if (a.cols != b.rows)
        throw ShapeMismatch("gemm_ref: A is " + std::to_string(a.rows) + "x" + std::to_string(a.cols) + ", B is " +
                            std::to_string(b.rows) + "x" + std::to_string(b.cols));
    MatrixI32 c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.cols; ++j) {
            std::int64_t sum = 0;
            for (std::size_t k = 0; k < a.cols; ++k) sum += std::int64_t{a(i, k)} * b(k, j);
            c(i, j) = static_cast<std::int32_t>(sum);
        }
    return c;
}

inline GemmJob make_gemm_job(const MatrixI8& a, const MatrixI8& b, std::size_t l1_size = kDefaultL1Size) {
    if (a.cols != b.rows) throw ShapeMismatch("A columns must equal B rows");
    const TilePlan plan = plan_gemm({static_cast<std::uint32_t>(a.rows), static_cast<std::uint32_t>(b.cols),
                                     static_cast<std::uint32_t>(a.cols)},
                                    l1_size);
    return emit_gemm_job(plan, a.data, b.data);
}

struct Mismatch {
    std::size_t row = 0;
    std::size_t col = 0;
    std::int32_t expected = 0;
    std::int32_t actual = 0;
};

struct FabricRun {
    MatrixI32 c;  // padding stripped
    CounterSet counters;
    std::vector<std::uint64_t> launch_cycles;
    bool completed = true;
};

/// Host sequence for a job: fill L1, then load/launch each tile-row kernel in turn, then read C back.
inline FabricRun run_gemm_job(const GemmJob& job) {
    const TilePlan& p = job.plan;
    Machine machine(p.l1_size);
    machine.write_l1(p.layout.a.offset, job.a_l1);
    machine.write_l1(p.layout.bt.offset, job.bt_l1);

    FabricRun out;
    // Budget well above the schedule so a wrong prediction shows up as a mismatch, not a hang.
    const std::uint64_t budget = 2 * p.cycles_per_launch() + 64;
    for (const auto& image : job.images) {
        machine.load_image(image);
        const RunResult r = machine.run(budget, TraceLevel::Counters);
        out.counters += r.counters;
        out.launch_cycles.push_back(r.counters.cycles);
        if (!r.completed()) {
            out.completed = false;
            machine.reset();
        }
    }

    const auto raw = machine.read_l1(p.layout.c.offset, p.layout.c.size);
    out.c = MatrixI32(p.shape.m, p.shape.n);
    for (std::size_t i = 0; i < p.shape.m; ++i)
        for (std::size_t j = 0; j < p.shape.n; ++j) {
            const std::size_t at = (i * p.padded.n + j) * 4;
            std::uint32_t v = 0;
            for (int b = 3; b >= 0; --b) v = v << 8 | raw[at + static_cast<std::size_t>(b)];
            out.c(i, j) = static_cast<std::int32_t>(v);
        }
    return out;
}

struct VerificationReport {
    bool match = false;
    std::optional<Mismatch> first_mismatch;
    std::uint64_t measured_cycles = 0;
    std::uint64_t predicted_cycles = 0;
    bool completed = true;
    CounterSet counters;
    std::vector<std::uint64_t> launch_cycles;
    std::size_t max_image_bytes = 0;
    MatrixI32 result;

    bool cycles_exact() const noexcept { return completed && measured_cycles == predicted_cycles; }
    bool passed() const noexcept { return match && cycles_exact(); }
};

inline std::optional<Mismatch> first_difference(const MatrixI32& expected, const MatrixI32& actual) {
    for (std::size_t i = 0; i < expected.rows; ++i)
        for (std::size_t j = 0; j < expected.cols; ++j)
            if (expected(i, j) != actual(i, j)) return Mismatch{i, j, expected(i, j), actual(i, j)};
    return std::nullopt;
}

inline VerificationReport run_and_verify(const GemmJob& job) {
    const GemmShape& s = job.plan.shape;
    const MatrixI32 expected = gemm_ref(MatrixI8(s.m, s.k, job.a), MatrixI8(s.k, s.n, job.b));
    FabricRun run = run_gemm_job(job);

    VerificationReport rep;
    rep.first_mismatch = first_difference(expected, run.c);
    rep.match = !rep.first_mismatch.has_value();
    rep.completed = run.completed;
    rep.measured_cycles = run.counters.cycles;
    rep.predicted_cycles = predicted_cycles(job.plan);
    rep.counters = run.counters;
    rep.launch_cycles = std::move(run.launch_cycles);
    for (const auto& img : job.images) rep.max_image_bytes = std::max(rep.max_image_bytes, img.size());
    rep.result = std::move(run.c);
    return rep;
}

// ---------------------------------------------------------------------------
// Attention

struct AttentionHead {
    MatrixI8 q, k, v;  // each seq_len x head_dim
};

struct AttentionSpec {
    std::uint32_t seq_len = 0;
    std::uint32_t head_dim = 0;
    std::uint32_t num_heads = 0;
    std::vector<AttentionHead> heads;
    std::size_t l1_size = kDefaultL1Size;
};

inline AttentionSpec random_attention(std::uint32_t seq_len, std::uint32_t head_dim, std::uint32_t num_heads,
                                      std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    AttentionSpec spec{seq_len, head_dim, num_heads, {}, kDefaultL1Size};
    for (std::uint32_t h = 0; h < num_heads; ++h)
        spec.heads.push_back({random_matrix(seq_len, head_dim, rng), random_matrix(seq_len, head_dim, rng),
                              random_matrix(seq_len, head_dim, rng)});
    return spec;
}

/// Softmax probabilities requantized to int8 with one symmetric scale per row.
struct QuantizedProbs {
    MatrixI8 q;
    std::vector<double> row_max;  // probability = q * row_max / 127
    Matrix<double> probs;
};

/// Host step between the two GEMMs: scale by 1/sqrt(d), row softmax, per-row max requantization.
inline QuantizedProbs softmax_requantize(const MatrixI32& scores, std::uint32_t head_dim) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    QuantizedProbs out{MatrixI8(scores.rows, scores.cols), std::vector<double>(scores.rows),
                       Matrix<double>(scores.rows, scores.cols)};
    for (std::size_t i = 0; i < scores.rows; ++i) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j < scores.cols; ++j) mx = std::max(mx, scores(i, j) * scale);
        double sum = 0;
        for (std::size_t j = 0; j < scores.cols; ++j) sum += out.probs(i, j) = std::exp(scores(i, j) * scale - mx);
        double row_max = 0;
        for (std::size_t j = 0; j < scores.cols; ++j) row_max = std::max(row_max, out.probs(i, j) /= sum);
        out.row_max[i] = row_max;
        for (std::size_t j = 0; j < scores.cols; ++j)
            out.q(i, j) = static_cast<std::int8_t>(std::lround(out.probs(i, j) / row_max * 127.0));
    }
    return out;
}

struct HeadReport {
    VerificationReport scores;  // Q * K^T
    VerificationReport output;  // P_q * V
    QuantizedProbs probs;
    Matrix<double> output_dequant;
    double mse = 0;  // vs all-float attention, informational
};

struct AttentionReport {
    std::uint32_t seq_len = 0, head_dim = 0, num_heads = 0;
    std::vector<HeadReport> heads;
    double mean_mse = 0;

    bool all_match() const noexcept {
        return std::all_of(heads.begin(), heads.end(), [](const HeadReport& h) {
            return h.scores.passed() && h.output.passed();
        });
    }
    CounterSet total_counters() const {
        CounterSet c;
        for (const auto& h : heads) {
            c += h.scores.counters;
            c += h.output.counters;
        }
        return c;
    }
};

inline Matrix<double> float_attention(const AttentionHead& h) {
    const std::size_t S = h.q.rows;
    const std::size_t d = h.q.cols;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Matrix<double> out(S, d);
    std::vector<double> p(S);
    for (std::size_t i = 0; i < S; ++i) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j < S; ++j) {
            double dot = 0;
            for (std::size_t x = 0; x < d; ++x) dot += static_cast<double>(h.q(i, x)) * h.k(j, x);
            p[j] = dot * scale;
            mx = std::max(mx, p[j]);
        }
        double sum = 0;
        for (auto& v : p) sum += v = std::exp(v - mx);
        for (std::size_t x = 0; x < d; ++x) {
            double acc = 0;
            for (std::size_t j = 0; j < S; ++j) acc += p[j] / sum * h.v(j, x);
            out(i, x) = acc;
        }
    }
    return out;
}

/// Runs each head as two fabric GEMMs (Q*K^T, then P_q*V) with the softmax on the host.
inline AttentionReport attention_job(const AttentionSpec& spec) {
    if (spec.heads.size() != spec.num_heads) throw ShapeMismatch("attention: head count does not match spec");
    AttentionReport rep{spec.seq_len, spec.head_dim, spec.num_heads, {}, 0};
    double mse_sum = 0;
    for (const auto& h : spec.heads) {
        if (h.q.rows != spec.seq_len || h.q.cols != spec.head_dim || h.k.rows != spec.seq_len ||
            h.k.cols != spec.head_dim || h.v.rows != spec.seq_len || h.v.cols != spec.head_dim)
            throw ShapeMismatch("attention: Q, K, V must be seq_len x head_dim");
        HeadReport hr;
        // B = K^T, whose transposed layout in L1 is K itself.
        hr.scores = run_and_verify(make_gemm_job(h.q, transpose(h.k), spec.l1_size));
        hr.probs = softmax_requantize(hr.scores.result, spec.head_dim);
        hr.output = run_and_verify(make_gemm_job(hr.probs.q, h.v, spec.l1_size));

        const MatrixI32& o = hr.output.result;
        hr.output_dequant = Matrix<double>(o.rows, o.cols);
        for (std::size_t i = 0; i < o.rows; ++i)
            for (std::size_t j = 0; j < o.cols; ++j) hr.output_dequant(i, j) = o(i, j) * hr.probs.row_max[i] / 127.0;

        const Matrix<double> ref = float_attention(h);
        double se = 0;
        for (std::size_t i = 0; i < ref.data.size(); ++i) {
            const double diff = ref.data[i] - hr.output_dequant.data[i];
            se += diff * diff;
        }
        hr.mse = ref.data.empty() ? 0 : se / static_cast<double>(ref.data.size());
        mse_sum += hr.mse;
        rep.heads.push_back(std::move(hr));
    }
    rep.mean_mse = rep.heads.empty() ? 0 : mse_sum / static_cast<double>(rep.heads.size());
    return rep;
}

}  // namespace cgra
