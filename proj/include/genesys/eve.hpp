#pragma once

// Streaming evolution engine: gene split, the four-stage PE pipeline
// (crossover -> perturb -> delete -> add), gene merge, PE allocation and
// cycle accounting. Every stage consumes 64-bit gene words one at a time.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "genesys/gene.hpp"
#include "genesys/neat.hpp"

namespace genesys {

enum class PairKind : std::uint8_t { matched, only_a, only_b };

struct AlignedPair {
    GeneKey key;
    std::optional<EncodedGene> from_a;
    std::optional<EncodedGene> from_b;
    PairKind kind = PairKind::matched;
};

/// Sorted merge-join of both parents, node cluster first.
inline std::vector<AlignedPair> split_streams(const Genome& a, const Genome& b) {
    if (!is_canonical(a) || !is_canonical(b))
        throw InvalidGenomeError("split_streams requires canonical parents");
    std::vector<AlignedPair> out;
    out.reserve(std::max(a.gene_count(), b.gene_count()));

    auto join = [&](const auto& xs, const auto& ys) {
        std::size_t i = 0, j = 0;
        while (i < xs.size() || j < ys.size()) {
            const bool take_a = j == ys.size() || (i < xs.size() && key_of(xs[i]) < key_of(ys[j]));
            const bool take_b = i == xs.size() || (j < ys.size() && key_of(ys[j]) < key_of(xs[i]));
            AlignedPair pair;
            if (take_a) {
                pair = {key_of(xs[i]), encode_gene(xs[i]), std::nullopt, PairKind::only_a};
                ++i;
            } else if (take_b) {
                pair = {key_of(ys[j]), std::nullopt, encode_gene(ys[j]), PairKind::only_b};
                ++j;
            } else {
                pair = {key_of(xs[i]), encode_gene(xs[i]), encode_gene(ys[j]), PairKind::matched};
                ++i;
                ++j;
            }
            out.push_back(pair);
        }
    };
    join(a.nodes, b.nodes);
    join(a.connections, b.connections);
    return out;
}

/// Per-PE pipeline registers.
template <UnitSource Rng>
struct PeState {
    NeatParams params;
    ChildLanes<Rng> lanes;
    std::uint16_t num_inputs = 0;
    std::uint16_t num_outputs = 0;

    std::vector<NodeId> deleted_node_ids{};
    std::uint32_t deletions_so_far = 0;
    NodeId max_node_id_seen = 0;
    std::optional<NodeId> pending_conn_src{};
    bool node_added = false;
    bool conn_add_done = false;
    ReproductionCounters counters{};

    bool is_io(NodeId id) const { return id < std::uint32_t{num_inputs} + num_outputs; }
};

template <UnitSource Rng>
PeState<Rng> make_pe_state(const NeatParams& p, ChildLanes<Rng> lanes, std::uint16_t num_inputs,
                           std::uint16_t num_outputs) {
    PeState<Rng> pe{.params = p, .lanes = std::move(lanes)};
    pe.num_inputs = num_inputs;
    pe.num_outputs = num_outputs;
    return pe;
}

/// Gene leaving the add stage; `inserted` marks genes synthesized by a structural mutation.
struct PeEmit {
    EncodedGene gene;
    bool inserted = false;
};

template <UnitSource Rng>
std::optional<EncodedGene> crossover_stage(const AlignedPair& pair, PeState<Rng>& pe) {
    ++pe.counters.genes_streamed;
    if (pair.kind == PairKind::only_b)
        return std::nullopt;
    ++pe.counters.crossovers;
    if (pair.kind == PairKind::only_a)
        return pair.from_a;

    auto pick_a = [&] { return pe.lanes.crossover.next_unit() < pe.params.crossover_bias; };
    const EncodedGene ga = *pair.from_a, gb = *pair.from_b;
    if (!ga.is_connection()) {
        const NodeGene na = decode_node(ga), nb = decode_node(gb);
        NodeGene out = na;
        out.bias = pick_a() ? na.bias : nb.bias;
        out.response = pick_a() ? na.response : nb.response;
        out.activation = pick_a() ? na.activation : nb.activation;
        out.aggregation = pick_a() ? na.aggregation : nb.aggregation;
        return encode_gene(out);
    }
    const ConnectionGene ca = decode_connection(ga), cb = decode_connection(gb);
    ConnectionGene out = ca;
    out.weight = pick_a() ? ca.weight : cb.weight;
    out.enabled = pick_a() ? ca.enabled : cb.enabled;
    return encode_gene(out);
}

template <UnitSource Rng>
EncodedGene perturb_stage(EncodedGene gene, PeState<Rng>& pe) {
    auto mutate = [&](double v, RealKind kind) {
        bool mutated = false, replaced = false;
        const double out = mutate_real(v, kind, pe.params, pe.lanes.perturb, &mutated, &replaced);
        pe.counters.perturbations += mutated;
        pe.counters.replacements += replaced;
        return out;
    };
    if (!gene.is_connection()) {
        NodeGene n = decode_node(gene);
        n.bias = mutate(n.bias, RealKind::half);
        n.response = mutate(n.response, RealKind::half);
        return encode_gene(n);
    }
    ConnectionGene c = decode_connection(gene);
    c.weight = mutate(c.weight, RealKind::single);
    return encode_gene(c);
}

template <UnitSource Rng>
std::optional<EncodedGene> delete_stage(EncodedGene gene, PeState<Rng>& pe) {
    if (!gene.is_connection()) {
        const NodeGene n = decode_node(gene);
        const double u = pe.lanes.remove.next_unit();
        if (!pe.is_io(n.id) && pe.deletions_so_far < pe.params.max_node_deletions && u < pe.params.delete_node_prob) {
            pe.deleted_node_ids.push_back(n.id);
            ++pe.deletions_so_far;
            ++pe.counters.node_deletions;
            return std::nullopt;
        }
        return gene;
    }
    const ConnectionGene c = decode_connection(gene);
    const auto& dead = pe.deleted_node_ids;
    if (std::find(dead.begin(), dead.end(), c.src) != dead.end() ||
        std::find(dead.begin(), dead.end(), c.dst) != dead.end()) {
        ++pe.counters.dangling_drops;
        return std::nullopt;
    }
    if (pe.lanes.remove.next_unit() < pe.params.delete_conn_prob) {
        ++pe.counters.conn_deletions;
        return std::nullopt;
    }
    return gene;
}

/// Up to three genes out per gene in.
struct AddStageOutput {
    std::array<PeEmit, 3> genes{};
    std::size_t count = 0;

    void push(EncodedGene g, bool inserted) { genes[count++] = {g, inserted}; }
    const PeEmit* begin() const { return genes.data(); }
    const PeEmit* end() const { return genes.data() + count; }
};

template <UnitSource Rng>
AddStageOutput add_stage(EncodedGene gene, PeState<Rng>& pe) {
    AddStageOutput out;
    if (!gene.is_connection()) {
        pe.max_node_id_seen = std::max(pe.max_node_id_seen, decode_node(gene).id);
        out.push(gene, false);
        return out;
    }
    const ConnectionGene c = decode_connection(gene);

    // second cycle of a two-phase connection add; the add engine is busy, no split this gene
    bool completing = false;
    if (pe.pending_conn_src) {
        out.push(encode_gene(ConnectionGene{*pe.pending_conn_src, c.dst, 1.0, true}), true);
        pe.pending_conn_src.reset();
        pe.conn_add_done = true;
        completing = true;
    }

    bool split = false;
    if (!completing && !pe.node_added && c.enabled && pe.max_node_id_seen < kMaxNodeId) {
        if (pe.lanes.add.next_unit() < pe.params.add_node_prob) {
            const auto m = static_cast<NodeId>(pe.max_node_id_seen + 1);
            out.push(encode_gene(NodeGene{m, 0.0, 1.0, pe.params.default_activation, Aggregation::sum}), true);
            out.push(encode_gene(ConnectionGene{c.src, m, 1.0, true}), true);
            out.push(encode_gene(ConnectionGene{m, c.dst, c.weight, true}), true);
            pe.node_added = true;
            ++pe.counters.nodes_added;
            split = true;
        }
    }
    if (!split)
        out.push(gene, false);

    if (!pe.conn_add_done && !pe.pending_conn_src) {
        if (pe.lanes.add.next_unit() >= 1.0 - pe.params.add_conn_prob)
            pe.pending_conn_src = c.src;
    }
    return out;
}

struct MergeResult {
    Genome genome;
    std::uint64_t nodes_added = 0;
    std::uint64_t conns_added = 0;
    std::uint64_t conns_rejected = 0;
};

/// Reassembles a child genome from one PE's output stream. Inserted
/// connections that duplicate a key or close a cycle are discarded.
inline MergeResult merge_stream(std::span<const PeEmit> stream, GenomeId child_id, std::uint16_t num_inputs,
                                std::uint16_t num_outputs) {
    MergeResult r;
    Genome& g = r.genome;
    g.genome_id = child_id;
    g.num_inputs = num_inputs;
    g.num_outputs = num_outputs;

    std::vector<NodeId> new_nodes;
    std::vector<ConnectionGene> inserted;
    for (const auto& e : stream) {
        if (!e.gene.is_connection()) {
            const NodeGene n = decode_node(e.gene);
            g.nodes.push_back(n);
            if (e.inserted) {
                new_nodes.push_back(n.id);
                ++r.nodes_added;
            }
        } else if (e.inserted) {
            inserted.push_back(decode_connection(e.gene));
        } else {
            g.connections.push_back(decode_connection(e.gene));
        }
    }
    auto touches_new_node = [&](const ConnectionGene& c) {
        return std::find(new_nodes.begin(), new_nodes.end(), c.src) != new_nodes.end() ||
               std::find(new_nodes.begin(), new_nodes.end(), c.dst) != new_nodes.end();
    };
    // split products reference a fresh node and cannot collide
    std::vector<ConnectionGene> candidates;
    for (const auto& c : inserted) {
        if (touches_new_node(c))
            g.connections.push_back(c);
        else
            candidates.push_back(c);
    }

    std::sort(g.nodes.begin(), g.nodes.end(), [](const NodeGene& x, const NodeGene& y) { return x.id < y.id; });
    std::sort(g.connections.begin(), g.connections.end(), conn_key_less);
    for (const auto& c : candidates) {
        const bool duplicate = std::binary_search(g.connections.begin(), g.connections.end(), c, conn_key_less);
        if (duplicate || detail::creates_cycle(g.connections, c.src, c.dst)) {
            ++r.conns_rejected;
            continue;
        }
        g.connections.insert(std::upper_bound(g.connections.begin(), g.connections.end(), c, conn_key_less), c);
        ++r.conns_added;
    }
    validate(g);
    return r;
}

// ---------------------------------------------------------------------------
// PE array

/// Cycle cost model of one child on one PE.
struct PeCycleModel {
    std::uint64_t load_cycles = 2;           // parents' fitness and control
    std::uint64_t per_added_node = 2;
    std::uint64_t per_added_connection = 1;
};

struct PeResult {
    Genome child;
    std::uint64_t cycles = 0;
    ReproductionCounters counters{};
};

/// Streams one child through a PE: split -> crossover -> perturb -> delete -> add -> merge.
template <UnitSource Rng>
PeResult run_pe(const Genome& a, const Genome& b, GenomeId child_id, const NeatParams& p, ChildLanes<Rng> lanes,
                const PeCycleModel& model = {}) {
    auto pe = make_pe_state(p, std::move(lanes), a.num_inputs, a.num_outputs);
    const auto pairs = split_streams(a, b);
    std::vector<PeEmit> emitted;
    emitted.reserve(pairs.size() + 3);
    for (const auto& pair : pairs) {
        auto g = crossover_stage(pair, pe);
        if (!g)
            continue;
        g = perturb_stage(*g, pe);
        g = delete_stage(*g, pe);
        if (!g)
            continue;
        for (const auto& e : add_stage(*g, pe))
            emitted.push_back(e);
    }
    MergeResult merged = merge_stream(emitted, child_id, a.num_inputs, a.num_outputs);

    PeResult r;
    r.child = std::move(merged.genome);
    r.counters = pe.counters;
    r.counters.conns_added = merged.conns_added;
    r.counters.conns_rejected = merged.conns_rejected;
    const std::uint64_t two_phase = merged.conns_added + merged.conns_rejected;
    r.cycles = model.load_cycles + pairs.size() + model.per_added_node * merged.nodes_added +
               model.per_added_connection * two_phase;
    return r;
}

struct ScheduledChild {
    std::uint32_t pe_id = 0;
    std::size_t entry = 0;  // index into MatingPlan::entries
};

struct PeSchedule {
    std::vector<std::vector<ScheduledChild>> rounds;

    std::size_t scheduled() const {
        std::size_t n = 0;
        for (const auto& r : rounds)
            n += r.size();
        return n;
    }
};

/// Greedy allocation: children grouped by parent pair, largest groups first,
/// packed into rounds of at most `num_pes` so siblings share a round.
inline PeSchedule allocate_pes(const MatingPlan& plan, std::uint32_t num_pes) {
    if (num_pes == 0)
        throw ConfigError("EvE needs at least one PE");
    std::map<std::pair<GenomeId, GenomeId>, std::vector<std::size_t>> groups;
    std::vector<std::pair<GenomeId, GenomeId>> first_seen;
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
        const auto key = std::pair{plan.entries[i].parent_a, plan.entries[i].parent_b};
        auto& members = groups[key];
        if (members.empty())
            first_seen.push_back(key);
        members.push_back(i);
    }
    std::stable_sort(first_seen.begin(), first_seen.end(),
                     [&](const auto& x, const auto& y) { return groups[x].size() > groups[y].size(); });

    PeSchedule s;
    for (const auto& key : first_seen) {
        for (std::size_t entry : groups[key]) {
            if (s.rounds.empty() || s.rounds.back().size() == num_pes)
                s.rounds.emplace_back();
            auto& round = s.rounds.back();
            round.push_back({static_cast<std::uint32_t>(round.size()), entry});
        }
    }
    return s;
}

struct CycleStats {
    std::int64_t eve_cycles = 0;
    std::int64_t genes_streamed = 0;
    std::int64_t ops_crossover = 0;
    std::int64_t ops_mutation = 0;
    std::int64_t stall_cycles = 0;  // idle PE-cycles waiting for the slowest PE in a round
    std::int64_t rounds = 0;
    std::int64_t max_active_pes = 0;

    friend bool operator==(const CycleStats&, const CycleStats&) = default;
};

struct EvolutionPassResult {
    ReproductionOutput output;
    CycleStats cycles;
    PeSchedule schedule;
};

/// Runs the whole mating plan on the PE array. Children come back in plan
/// order regardless of schedule, each seeded from its own child lanes.
inline EvolutionPassResult run_evolution_pass(const Population& parents, const MatingPlan& plan,
                                              std::uint32_t num_pes, const NeatParams& p, std::uint64_t gen_seed,
                                              const PeCycleModel& model = {}) {
    const auto idx = detail::index_by_id(parents);
    EvolutionPassResult r;
    r.schedule = allocate_pes(plan, num_pes);
    r.output.children.resize(plan.entries.size());

    for (const auto& round : r.schedule.rounds) {
        std::uint64_t round_cycles = 0;
        std::vector<std::uint64_t> pe_cycles;
        pe_cycles.reserve(round.size());
        for (const auto& slot : round) {
            const MatingEntry& e = plan.entries[slot.entry];
            PeResult pr = run_pe(parents.genomes[idx.at(e.parent_a)], parents.genomes[idx.at(e.parent_b)],
                                 e.child_id, p, child_lanes(gen_seed, e.child_id), model);
            round_cycles = std::max(round_cycles, pr.cycles);
            pe_cycles.push_back(pr.cycles);
            r.output.counters += pr.counters;
            r.output.children[slot.entry] = std::move(pr.child);
        }
        for (auto c : pe_cycles)
            r.cycles.stall_cycles += static_cast<std::int64_t>(round_cycles - c);
        r.cycles.eve_cycles += static_cast<std::int64_t>(round_cycles);
        r.cycles.max_active_pes = std::max<std::int64_t>(r.cycles.max_active_pes, static_cast<std::int64_t>(round.size()));
        ++r.cycles.rounds;
    }
    r.cycles.genes_streamed = static_cast<std::int64_t>(r.output.counters.genes_streamed);
    r.cycles.ops_crossover = static_cast<std::int64_t>(r.output.counters.crossovers);
    r.cycles.ops_mutation = static_cast<std::int64_t>(r.output.counters.mutations());
    return r;
}

} // namespace genesys
