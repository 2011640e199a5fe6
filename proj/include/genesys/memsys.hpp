#pragma once

// Genome-buffer SRAM banking, the two NoC options and the energy ledger.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "genesys/eve.hpp"
#include "genesys/gene.hpp"
#include "genesys/neat.hpp"

namespace genesys {

enum class NocMode : std::uint8_t { p2p, multicast };

inline const char* to_string(NocMode m) { return m == NocMode::p2p ? "p2p" : "multicast"; }

inline NocMode parse_noc_mode(const std::string& s) {
    if (s == "p2p")
        return NocMode::p2p;
    if (s == "multicast")
        return NocMode::multicast;
    throw ConfigError("unknown noc mode '" + s + "' (expected p2p or multicast)");
}

/// Per-event energies in picojoules. Placeholder magnitudes, not synthesized values.
struct EnergyTable {
    double sram_read_word = 10.0;
    double sram_write_word = 12.0;
    double noc_hop = 1.0;
    double pe_gene_op = 0.5;
    double mac_op = 1.0;
};

struct HwConfig {
    std::uint32_t num_eve_pes = 256;
    std::uint32_t systolic_rows = 32;
    std::uint32_t systolic_cols = 32;
    std::uint64_t sram_bytes = 1'572'864;  // 1.5 MiB
    std::uint32_t sram_banks = 48;
    NocMode noc_mode = NocMode::multicast;
    EnergyTable energy_table;
    double clock_hz = 2e8;
    std::uint64_t vectorize_cycles_per_node = 0;

    void validate() const {
        if (num_eve_pes == 0)
            throw ConfigError("num_eve_pes must be >= 1");
        if (systolic_rows == 0 || systolic_cols == 0)
            throw ConfigError("systolic array dimensions must be >= 1");
        if (sram_banks == 0)
            throw ConfigError("sram_banks must be >= 1");
        if (!(clock_hz > 0.0))
            throw ConfigError("clock_hz must be positive");
        const double e[] = {energy_table.sram_read_word, energy_table.sram_write_word, energy_table.noc_hop,
                            energy_table.pe_gene_op, energy_table.mac_op};
        for (double v : e)
            if (!(v >= 0.0))
                throw ConfigError("energies must be non-negative");
    }
};

struct MemStats {
    std::int64_t sram_reads = 0;
    std::int64_t sram_writes = 0;
    std::int64_t dram_reads = 0;
    std::int64_t bank_conflicts = 0;
    std::int64_t noc_multicast_fanout_sum = 0;  // word deliveries to PEs

    friend bool operator==(const MemStats&, const MemStats&) = default;
};

struct BankMap {
    std::map<GenomeId, std::uint32_t> bank_of;
    std::map<GenomeId, std::uint64_t> spilled_words;  // words living in DRAM
    std::int64_t conflicts = 0;
};

/// Round-robin parent-to-bank placement in ascending id order. Conflicts
/// assume every listed parent streams concurrently, one word per cycle:
/// a bank holding streams of lengths L1..Lk serializes sum(L) - max(L) words.
/// Bytes past `sram_bytes` spill to DRAM.
inline BankMap sram_map(std::vector<const Genome*> parents, std::uint32_t banks, std::uint64_t sram_bytes) {
    if (banks == 0)
        throw ConfigError("sram_banks must be >= 1");
    std::sort(parents.begin(), parents.end(), [](const Genome* a, const Genome* b) { return a->genome_id < b->genome_id; });
    parents.erase(std::unique(parents.begin(), parents.end(),
                              [](const Genome* a, const Genome* b) { return a->genome_id == b->genome_id; }),
                  parents.end());
    BankMap m;
    std::uint64_t used = 0;
    std::vector<std::vector<std::uint64_t>> lengths(banks);
    for (std::size_t i = 0; i < parents.size(); ++i) {
        const Genome& g = *parents[i];
        const auto bank = static_cast<std::uint32_t>(i % banks);
        m.bank_of[g.genome_id] = bank;
        lengths[bank].push_back(g.gene_count());

        const std::uint64_t bytes = footprint_bytes(g);
        const std::uint64_t fits = used >= sram_bytes ? 0 : std::min(bytes, sram_bytes - used);
        const std::uint64_t spilled_bytes = bytes - fits;
        m.spilled_words[g.genome_id] = std::min<std::uint64_t>(g.gene_count(), (spilled_bytes + kGeneBytes - 1) / kGeneBytes);
        used += bytes;
    }
    for (const auto& ls : lengths) {
        if (ls.size() < 2)
            continue;
        std::uint64_t sum = 0, longest = 0;
        for (auto l : ls) {
            sum += l;
            longest = std::max(longest, l);
        }
        m.conflicts += static_cast<std::int64_t>(sum - longest);
    }
    return m;
}

/// Counts buffer traffic for one evolution pass. Point-to-point reads every
/// (child, parent gene) delivery from SRAM; multicast reads each distinct
/// parent once per round and fans it out.
inline MemStats plan_fetch(const PeSchedule& schedule, const MatingPlan& plan, const Population& parents,
                           std::span<const Genome> children, NocMode mode, const HwConfig& hw) {
    const auto idx = detail::index_by_id(parents);
    std::vector<const Genome*> all;
    for (const auto& e : plan.entries) {
        all.push_back(&parents.genomes[idx.at(e.parent_a)]);
        all.push_back(&parents.genomes[idx.at(e.parent_b)]);
    }
    const BankMap layout = sram_map(all, hw.sram_banks, hw.sram_bytes);

    MemStats s;
    auto read_parent = [&](const Genome& g) {
        const auto spilled = static_cast<std::int64_t>(layout.spilled_words.at(g.genome_id));
        s.dram_reads += spilled;
        s.sram_reads += static_cast<std::int64_t>(g.gene_count()) - spilled;
    };

    for (const auto& round : schedule.rounds) {
        std::map<GenomeId, std::int64_t> consumers;  // parent -> streams it feeds this round
        std::vector<std::vector<std::uint64_t>> bank_streams(hw.sram_banks);
        for (const auto& slot : round) {
            const MatingEntry& e = plan.entries[slot.entry];
            ++consumers[e.parent_a];
            ++consumers[e.parent_b];
            const Genome& a = parents.genomes[idx.at(e.parent_a)];
            const Genome& b = parents.genomes[idx.at(e.parent_b)];
            s.noc_multicast_fanout_sum += static_cast<std::int64_t>(a.gene_count() + b.gene_count());
            if (mode == NocMode::p2p) {
                read_parent(a);
                read_parent(b);
                bank_streams[layout.bank_of.at(a.genome_id)].push_back(a.gene_count());
                bank_streams[layout.bank_of.at(b.genome_id)].push_back(b.gene_count());
            }
        }
        if (mode == NocMode::multicast) {
            for (const auto& [id, n] : consumers) {
                const Genome& g = parents.genomes[idx.at(id)];
                read_parent(g);
                bank_streams[layout.bank_of.at(id)].push_back(g.gene_count());
            }
        }
        for (const auto& ls : bank_streams) {
            if (ls.size() < 2)
                continue;
            std::uint64_t sum = 0, longest = 0;
            for (auto l : ls) {
                sum += l;
                longest = std::max(longest, l);
            }
            s.bank_conflicts += static_cast<std::int64_t>(sum - longest);
        }
    }
    for (const auto& c : children)
        s.sram_writes += static_cast<std::int64_t>(c.gene_count());
    return s;
}

struct EnergyLedger {
    double sram = 0.0;  // joules
    double noc = 0.0;
    double eve_pes = 0.0;
    double adam_macs = 0.0;
    double total = 0.0;
    double runtime_s = 0.0;
};

/// Dot product of event counts with per-event energies (pJ -> J).
inline EnergyLedger account_energy(const CycleStats& cycles, const MemStats& mem, std::int64_t adam_macs,
                                   const HwConfig& hw) {
    const std::int64_t counts[] = {cycles.eve_cycles, cycles.genes_streamed, mem.sram_reads, mem.sram_writes,
                                   mem.noc_multicast_fanout_sum, adam_macs};
    for (auto c : counts)
        if (c < 0)
            throw Error("negative event count in energy accounting");
    const EnergyTable& t = hw.energy_table;
    constexpr double pj = 1e-12;
    EnergyLedger e;
    e.sram = (static_cast<double>(mem.sram_reads) * t.sram_read_word +
              static_cast<double>(mem.sram_writes) * t.sram_write_word) * pj;
    e.noc = static_cast<double>(mem.noc_multicast_fanout_sum) * t.noc_hop * pj;
    e.eve_pes = static_cast<double>(cycles.genes_streamed) * t.pe_gene_op * pj;
    e.adam_macs = static_cast<double>(adam_macs) * t.mac_op * pj;
    e.total = e.sram + e.noc + e.eve_pes + e.adam_macs;
    e.runtime_s = static_cast<double>(cycles.eve_cycles) / hw.clock_hz;
    return e;
}

} // namespace genesys
