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
 * @file metrics.hpp
 * @brief Utilization, traffic and event-count energy reports.
 *
 * Energy is a weighted event count in abstract units, not a power estimate.
 * The switched baseline charges one extra router traversal (e_router_hop) for
 * every operand read from a neighbor; it is a deliberately coarse comparison
 * point for the switchless fabric.
 */

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cgra/engine.hpp"
#include "cgra/fabric.hpp"

namespace cgra {

class NegativeCoefficient : public Error {
public:
    explicit NegativeCoefficient(const std::string& name)
        : Error("energy coefficient " + name + " must be finite and non-negative") {}
};

/// Per-event coefficients. The defaults are placeholders, not calibrated values.
struct EnergyModel {
    double e_alu = 1.0;
    double e_mac4 = 4.0;
    double e_rf_write = 0.5;
    double e_link_hop = 0.25;
    double e_load = 8.0;
    double e_store = 8.0;
    double e_idle = 0.05;
    double e_router_hop = 1.0;

    using Field = double EnergyModel::*;
    static constexpr std::array<std::pair<const char*, Field>, 8> kFields = {{
        {"e_alu", &EnergyModel::e_alu},
        {"e_mac4", &EnergyModel::e_mac4},
        {"e_rf_write", &EnergyModel::e_rf_write},
        {"e_link_hop", &EnergyModel::e_link_hop},
        {"e_load", &EnergyModel::e_load},
        {"e_store", &EnergyModel::e_store},
        {"e_idle", &EnergyModel::e_idle},
        {"e_router_hop", &EnergyModel::e_router_hop},
    }};

    void validate() const {
        for (const auto& [name, field] : kFields) {
            const double v = this->*field;
            if (!std::isfinite(v) || v < 0) throw NegativeCoefficient(name);
        }
    }

    EnergyModel scaled(double factor) const {
        EnergyModel m = *this;
        for (const auto& [name, field] : kFields) m.*field *= factor;
        return m;
    }
};

struct UnitUtilization {
    NodeId unit;
    std::uint64_t busy = 0;
    double utilization = 0;
};

struct LinkTraffic {
    Link link;
    std::uint64_t reads = 0;
};

struct Report {
    std::uint64_t cycles = 0;
    std::vector<UnitUtilization> units;
    std::uint64_t l1_read_bytes = 0;
    std::uint64_t l1_write_bytes = 0;
    std::uint64_t traffic_bytes = 0;
    std::uint64_t link_reads = 0;
    std::vector<LinkTraffic> links;
    double energy_switchless = 0;
    double energy_switched_baseline = 0;
    double ratio = 1;  // baseline / switchless
};

inline double switchless_energy(const CounterSet& c, const EnergyModel& m) {
    return static_cast<double>(c.alu_ops) * m.e_alu + static_cast<double>(c.mac4_ops) * m.e_mac4 +
           static_cast<double>(c.rf_writes) * m.e_rf_write + static_cast<double>(c.link_reads) * m.e_link_hop +
           static_cast<double>(c.loads) * m.e_load + static_cast<double>(c.stores) * m.e_store +
           static_cast<double>(c.total_idle()) * m.e_idle;
}

inline Report build_report(const CounterSet& c, const EnergyModel& model) {
    model.validate();
    Report r;
    r.cycles = c.cycles;
    for (int i = 0; i < kNumUnits; ++i) {
        const auto& u = c.units[static_cast<std::size_t>(i)];
        r.units.push_back({NodeId::from_index(i), u.busy,
                           c.cycles == 0 ? 0.0 : static_cast<double>(u.busy) / static_cast<double>(c.cycles)});
    }
    r.l1_read_bytes = c.l1_read_bytes;
    r.l1_write_bytes = c.l1_write_bytes;
    r.traffic_bytes = c.l1_read_bytes + c.l1_write_bytes;
    r.link_reads = c.link_reads;

    // A read by `reader` through port p travels the link neighbor(reader, p) -> reader.
    for (const Link& l : all_links()) {
        const NodeId reader = l.to;
        const Port via = opposite(l.from_port);
        r.links.push_back({l, c.unit(reader).port_reads[static_cast<std::size_t>(via)]});
    }

    r.energy_switchless = switchless_energy(c, model);
    r.energy_switched_baseline = r.energy_switchless + static_cast<double>(c.link_reads) * model.e_router_hop;
    r.ratio = r.energy_switchless == 0 ? (r.energy_switched_baseline == 0 ? 1.0 : INFINITY)
                                       : r.energy_switched_baseline / r.energy_switchless;
    return r;
}

}  // namespace cgra
