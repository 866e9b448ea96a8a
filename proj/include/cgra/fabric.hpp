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
 * @file fabric.hpp
 * @brief Switchless mesh-torus topology of the 4x4 PE grid and its 8 MOBs.
 *
 * Every row r is a 5-node ring
 *
 *     MobW(r) <-> PE(r,0) <-> PE(r,1) <-> PE(r,2) <-> PE(r,3) <-> (wrap) MobW(r)
 *
 * and every column c is a 5-node ring
 *
 *     MobN(c) <-> PE(0,c) <-> PE(1,c) <-> PE(2,c) <-> PE(3,c) <-> (wrap) MobN(c)
 *
 * There are no routers. A unit reads its neighbors' output registers directly,
 * so the neighbor relation below is the whole interconnect.
 */

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgra {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kGridRows = 4;
inline constexpr int kGridCols = 4;
inline constexpr int kNumPes = kGridRows * kGridCols;
inline constexpr int kNumUnits = kNumPes + kGridRows + kGridCols;  // 24

enum class NodeKind : std::uint8_t { PE, MOBW, MOBN };

enum class Port : std::uint8_t { N, S, E, W };

inline constexpr std::array<Port, 4> kAllPorts = {Port::N, Port::S, Port::E, Port::W};

constexpr Port opposite(Port p) noexcept {
    switch (p) {
    case Port::N: return Port::S;
    case Port::S: return Port::N;
    case Port::E: return Port::W;
    case Port::W: return Port::E;
    }
    return Port::N;
}

constexpr const char* port_name(Port p) noexcept {
    switch (p) {
    case Port::N: return "N";
    case Port::S: return "S";
    case Port::E: return "E";
    case Port::W: return "W";
    }
    return "?";
}

/// Identity of one of the 24 units. Use the named constructors.
struct NodeId {
    NodeKind kind = NodeKind::PE;
    std::uint8_t row = 0;  // PE row or MobW row; 0 for MobN
    std::uint8_t col = 0;  // PE column or MobN column; 0 for MobW

    static constexpr NodeId pe(int r, int c) noexcept {
        return {NodeKind::PE, static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(c)};
    }
    static constexpr NodeId mobw(int r) noexcept {
        return {NodeKind::MOBW, static_cast<std::uint8_t>(r), 0};
    }
    static constexpr NodeId mobn(int c) noexcept {
        return {NodeKind::MOBN, 0, static_cast<std::uint8_t>(c)};
    }

    constexpr bool is_pe() const noexcept { return kind == NodeKind::PE; }
    constexpr bool is_mob() const noexcept { return kind != NodeKind::PE; }

    /// Position in canonical unit order: PEs row-major, then MobW(0..3), then MobN(0..3).
    constexpr int index() const noexcept {
        switch (kind) {
        case NodeKind::PE: return row * kGridCols + col;
        case NodeKind::MOBW: return kNumPes + row;
        case NodeKind::MOBN: return kNumPes + kGridRows + col;
        }
        return 0;
    }

    static constexpr NodeId from_index(int idx) {
        if (idx < 0 || idx >= kNumUnits) throw Error("unit index out of range: " + std::to_string(idx));
        if (idx < kNumPes) return pe(idx / kGridCols, idx % kGridCols);
        if (idx < kNumPes + kGridRows) return mobw(idx - kNumPes);
        return mobn(idx - kNumPes - kGridRows);
    }

    constexpr bool valid() const noexcept {
        switch (kind) {
        case NodeKind::PE: return row < kGridRows && col < kGridCols;
        case NodeKind::MOBW: return row < kGridRows && col == 0;
        case NodeKind::MOBN: return col < kGridCols && row == 0;
        }
        return false;
    }

    friend constexpr bool operator==(const NodeId&, const NodeId&) = default;

    std::string to_string() const {
        switch (kind) {
        case NodeKind::PE: return "pe(" + std::to_string(row) + "," + std::to_string(col) + ")";
        case NodeKind::MOBW: return "mobw(" + std::to_string(row) + ")";
        case NodeKind::MOBN: return "mobn(" + std::to_string(col) + ")";
        }
        return "?";
    }
};

class NoSuchPort : public Error {
public:
    NoSuchPort(NodeId node, Port port)
        : Error("no port " + std::string(port_name(port)) + " on " + node.to_string()) {}
};

/// MobW units only have E/W ports, MobN units only N/S, PEs all four.
constexpr bool has_port(NodeId node, Port port) noexcept {
    switch (node.kind) {
    case NodeKind::PE: return true;
    case NodeKind::MOBW: return port == Port::E || port == Port::W;
    case NodeKind::MOBN: return port == Port::N || port == Port::S;
    }
    return false;
}

/// The unique ring neighbor of `node` in direction `port`.
constexpr NodeId neighbor(NodeId node, Port port) {
    if (!has_port(node, port)) throw NoSuchPort(node, port);
    switch (node.kind) {
    case NodeKind::MOBW:
        return port == Port::E ? NodeId::pe(node.row, 0) : NodeId::pe(node.row, kGridCols - 1);
    case NodeKind::MOBN:
        return port == Port::S ? NodeId::pe(0, node.col) : NodeId::pe(kGridRows - 1, node.col);
    case NodeKind::PE:
        break;
    }
    const int r = node.row;
    const int c = node.col;
    switch (port) {
    case Port::N: return r == 0 ? NodeId::mobn(c) : NodeId::pe(r - 1, c);
    case Port::S: return r == kGridRows - 1 ? NodeId::mobn(c) : NodeId::pe(r + 1, c);
    case Port::W: return c == 0 ? NodeId::mobw(r) : NodeId::pe(r, c - 1);
    case Port::E: return c == kGridCols - 1 ? NodeId::mobw(r) : NodeId::pe(r, c + 1);
    }
    return node;
}

/// Directed link: data read by `to` through its port `opposite(from_port)`
/// originates at `from`, which reaches `to` through `from_port`.
struct Link {
    NodeId from;
    Port from_port;
    NodeId to;

    friend constexpr bool operator==(const Link&, const Link&) = default;
};

inline std::vector<Link> all_links() {
    std::vector<Link> links;
    links.reserve(80);
    for (int i = 0; i < kNumUnits; ++i) {
        const NodeId n = NodeId::from_index(i);
        for (Port p : kAllPorts) {
            if (has_port(n, p)) links.push_back({n, p, neighbor(n, p)});
        }
    }
    return links;
}

}  // namespace cgra
