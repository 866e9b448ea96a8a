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


#include <algorithm>
#include <map>

#include <gtest/gtest.h>

#include "cgra/fabric.hpp"

namespace cgra {
namespace {

std::vector<NodeId> all_nodes() {
    std::vector<NodeId> v;
    for (int i = 0; i < kNumUnits; ++i) v.push_back(NodeId::from_index(i));
    return v;
}

TEST(Fabric, NodeCountsAndCanonicalOrder) {
    const auto nodes = all_nodes();
    EXPECT_EQ(std::count_if(nodes.begin(), nodes.end(), [](NodeId n) { return n.is_pe(); }), 16);
    EXPECT_EQ(std::count_if(nodes.begin(), nodes.end(), [](NodeId n) { return n.kind == NodeKind::MOBW; }), 4);
    EXPECT_EQ(std::count_if(nodes.begin(), nodes.end(), [](NodeId n) { return n.kind == NodeKind::MOBN; }), 4);
    EXPECT_EQ(NodeId::pe(0, 0).index(), 0);
    EXPECT_EQ(NodeId::pe(3, 3).index(), 15);
    EXPECT_EQ(NodeId::mobw(0).index(), 16);
    EXPECT_EQ(NodeId::mobn(3).index(), 23);
    for (int i = 0; i < kNumUnits; ++i) EXPECT_EQ(NodeId::from_index(i).index(), i);
    EXPECT_THROW(NodeId::from_index(24), Error);
}

TEST(Fabric, NeighborExamples) {
    EXPECT_EQ(neighbor(NodeId::pe(1, 3), Port::E), NodeId::mobw(1));
    EXPECT_EQ(neighbor(NodeId::pe(0, 2), Port::N), NodeId::mobn(2));
    EXPECT_EQ(neighbor(NodeId::mobn(2), Port::N), NodeId::pe(3, 2));
    EXPECT_EQ(neighbor(NodeId::mobw(2), Port::E), NodeId::pe(2, 0));
    EXPECT_EQ(neighbor(NodeId::pe(2, 1), Port::W), NodeId::pe(2, 0));
    EXPECT_EQ(neighbor(NodeId::pe(2, 1), Port::S), NodeId::pe(3, 1));
}

TEST(Fabric, MissingPortsThrow) {
    EXPECT_THROW(neighbor(NodeId::mobw(0), Port::N), NoSuchPort);
    EXPECT_THROW(neighbor(NodeId::mobw(3), Port::S), NoSuchPort);
    EXPECT_THROW(neighbor(NodeId::mobn(1), Port::E), NoSuchPort);
    EXPECT_THROW(neighbor(NodeId::mobn(1), Port::W), NoSuchPort);
}

TEST(Fabric, NeighborInvolutionExhaustive) {
    int pairs = 0;
    for (NodeId n : all_nodes())
        for (Port p : kAllPorts) {
            if (!has_port(n, p)) continue;
            EXPECT_EQ(neighbor(neighbor(n, p), opposite(p)), n) << n.to_string() << " " << port_name(p);
            ++pairs;
        }
    EXPECT_EQ(pairs, 16 * 4 + 8 * 2);
}

TEST(Fabric, RingClosureInFiveSteps) {
    for (NodeId start : all_nodes()) {
        for (Port p : {Port::E, Port::S}) {
            if (!has_port(start, p)) continue;
            NodeId cur = start;
            for (int step = 1; step <= 5; ++step) {
                cur = neighbor(cur, p);
                if (step < 5) {
                    EXPECT_NE(cur, start) << "ring shorter than 5 from " << start.to_string();
                }
            }
            EXPECT_EQ(cur, start) << start.to_string() << " " << port_name(p);
        }
    }
}

TEST(Fabric, LinkEnumeration) {
    const auto links = all_links();
    EXPECT_EQ(links.size(), 80u);

    std::map<int, int> degree;
    for (const auto& l : links) ++degree[l.from.index()];
    for (NodeId n : all_nodes()) EXPECT_EQ(degree[n.index()], n.is_pe() ? 4 : 2) << n.to_string();

    // symmetric under reversal
    for (const auto& l : links) {
        const Link rev{l.to, opposite(l.from_port), l.from};
        EXPECT_NE(std::find(links.begin(), links.end(), rev), links.end());
    }
}

}  // namespace
}  // namespace cgra
