#pragma once

// Reference NEAT: speciation, fitness sharing, parent selection and the
// gene-by-gene reproduction rules that the streaming engine must reproduce.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "genesys/gene.hpp"
#include "genesys/xorwow.hpp"

namespace genesys {

struct NeatParams {
    double crossover_bias = 0.5;
    double perturb_rate = 0.8;
    double perturb_power = 0.5;
    double replace_rate = 0.1;
    double add_node_prob = 0.03;
    double add_conn_prob = 0.05;
    double delete_node_prob = 0.02;
    double delete_conn_prob = 0.05;
    std::uint32_t max_node_deletions = 2;
    double survival_fraction = 0.2;
    double compat_unmatched = 1.0;  // c_d
    double compat_weight = 0.5;     // c_w
    double compat_threshold = 3.0;  // delta_t
    std::uint32_t species_stagnation = 15;  // 0 disables stagnation removal
    std::uint32_t elitism = 2;
    Activation default_activation = Activation::sigmoid;
    double value_limit = 30.0;  // |bias|, |response|, |weight| clamp before quantization

    void validate() const {
        const std::pair<const char*, double> probs[] = {
            {"crossover_bias", crossover_bias}, {"perturb_rate", perturb_rate},
            {"replace_rate", replace_rate},     {"add_node_prob", add_node_prob},
            {"add_conn_prob", add_conn_prob},   {"delete_node_prob", delete_node_prob},
            {"delete_conn_prob", delete_conn_prob}};
        for (const auto& [name, v] : probs)
            if (!(v >= 0.0 && v <= 1.0))
                throw ConfigError(std::string(name) + " must be a probability in [0,1]");
        if (!(survival_fraction > 0.0 && survival_fraction <= 1.0))
            throw ConfigError("survival_fraction must be in (0,1]");
        if (!(perturb_power >= 0.0) || !(value_limit > 0.0 && value_limit <= 65504.0))
            throw ConfigError("perturb_power must be >= 0 and value_limit in (0, 65504]");
        if (compat_unmatched < 0.0 || compat_weight < 0.0 || compat_threshold < 0.0)
            throw ConfigError("compatibility coefficients must be non-negative");
    }
};

template <typename R>
concept UnitSource = requires(R r) {
    { r.next_unit() } -> std::convertible_to<double>;
};

/// One stream per pipeline stage of a child. The reference walks the genome
/// stage by stage while the engine interleaves stages gene by gene; separate
/// lanes make both orders consume identical sequences.
template <typename Rng>
struct ChildLanes {
    Rng crossover;
    Rng perturb;
    Rng remove;
    Rng add;
};

inline constexpr std::uint64_t kLanesPerChild = 4;
inline constexpr std::uint64_t kSelectorStream = 0xFFFF'FFFF'0000'0001ull;

inline ChildLanes<XorWowState> child_lanes(std::uint64_t gen_seed, GenomeId child_id) {
    const std::uint64_t base = std::uint64_t{child_id} * kLanesPerChild;
    return {seed_stream(gen_seed, base + 0), seed_stream(gen_seed, base + 1), seed_stream(gen_seed, base + 2),
            seed_stream(gen_seed, base + 3)};
}

enum class RealKind { half, single };

/// Perturbation rule for one real attribute. First draw gates mutation with
/// perturb_rate; a second draw picks replacement (replace_rate) over a
/// uniform delta; a third draw supplies the value.
template <UnitSource Rng>
double mutate_real(double value, RealKind kind, const NeatParams& p, Rng& rng, bool* mutated = nullptr,
                   bool* replaced = nullptr) {
    if (!(rng.next_unit() < p.perturb_rate))
        return value;
    double out = 0.0;
    if (rng.next_unit() < p.replace_rate) {
        out = -2.0 + 4.0 * rng.next_unit();
        if (replaced)
            *replaced = true;
    } else {
        out = value + (2.0 * rng.next_unit() - 1.0) * p.perturb_power;
    }
    if (mutated)
        *mutated = true;
    out = std::clamp(out, -p.value_limit, p.value_limit);
    return kind == RealKind::half ? quantize_half(out) : quantize_single(out);
}

struct ReproductionCounters {
    std::uint64_t genes_streamed = 0;  // aligned pairs handled by crossover
    std::uint64_t crossovers = 0;      // genes inherited into the child
    std::uint64_t perturbations = 0;   // real attributes changed (delta or replacement)
    std::uint64_t replacements = 0;
    std::uint64_t node_deletions = 0;
    std::uint64_t conn_deletions = 0;  // probabilistic only
    std::uint64_t dangling_drops = 0;
    std::uint64_t nodes_added = 0;
    std::uint64_t conns_added = 0;     // accepted into the child
    std::uint64_t conns_rejected = 0;  // emitted but dropped as duplicate or cycle-forming

    std::uint64_t mutations() const {
        return perturbations + node_deletions + conn_deletions + nodes_added + conns_added;
    }

    ReproductionCounters& operator+=(const ReproductionCounters& o) {
        genes_streamed += o.genes_streamed;
        crossovers += o.crossovers;
        perturbations += o.perturbations;
        replacements += o.replacements;
        node_deletions += o.node_deletions;
        conn_deletions += o.conn_deletions;
        dangling_drops += o.dangling_drops;
        nodes_added += o.nodes_added;
        conns_added += o.conns_added;
        conns_rejected += o.conns_rejected;
        return *this;
    }
    friend bool operator==(const ReproductionCounters&, const ReproductionCounters&) = default;
};

// ---------------------------------------------------------------------------
// Speciation

/// Key-based compatibility distance c_d*U/N + c_w*mean|dw| over matched keys.
inline double compatibility_distance(const Genome& g1, const Genome& g2, const NeatParams& p) {
    std::size_t unmatched = 0;
    std::size_t matched = 0;
    double diff = 0.0;

    std::size_t i = 0, j = 0;
    while (i < g1.nodes.size() || j < g2.nodes.size()) {
        if (j == g2.nodes.size() || (i < g1.nodes.size() && g1.nodes[i].id < g2.nodes[j].id)) {
            ++unmatched;
            ++i;
        } else if (i == g1.nodes.size() || g2.nodes[j].id < g1.nodes[i].id) {
            ++unmatched;
            ++j;
        } else {
            diff += std::abs(g1.nodes[i].bias - g2.nodes[j].bias);
            ++matched;
            ++i;
            ++j;
        }
    }
    i = j = 0;
    while (i < g1.connections.size() || j < g2.connections.size()) {
        if (j == g2.connections.size() ||
            (i < g1.connections.size() && conn_key_less(g1.connections[i], g2.connections[j]))) {
            ++unmatched;
            ++i;
        } else if (i == g1.connections.size() || conn_key_less(g2.connections[j], g1.connections[i])) {
            ++unmatched;
            ++j;
        } else {
            diff += std::abs(g1.connections[i].weight - g2.connections[j].weight);
            ++matched;
            ++i;
            ++j;
        }
    }
    const double n = static_cast<double>(std::max({g1.gene_count(), g2.gene_count(), std::size_t{1}}));
    const double mean_diff = matched ? diff / static_cast<double>(matched) : 0.0;
    return p.compat_unmatched * static_cast<double>(unmatched) / n + p.compat_weight * mean_diff;
}

struct Species {
    std::uint32_t id = 0;
    Genome representative;
    std::vector<GenomeId> members;
    std::vector<double> best_history;  // best raw fitness per generation the species lived
};

struct SpeciesPartition {
    std::vector<Species> species;
    std::uint32_t next_species_id = 0;

    const Species* species_of(GenomeId id) const {
        for (const auto& s : species)
            if (std::find(s.members.begin(), s.members.end(), id) != s.members.end())
                return &s;
        return nullptr;
    }
};

/// Greedy assignment against the previous generation's representatives;
/// genomes that fit none found new species.
inline SpeciesPartition speciate(const Population& pop, const SpeciesPartition& previous, const NeatParams& p) {
    SpeciesPartition out;
    out.next_species_id = previous.next_species_id;
    for (const auto& s : previous.species) {
        Species carried;
        carried.id = s.id;
        carried.representative = s.representative;
        carried.best_history = s.best_history;
        out.species.push_back(std::move(carried));
    }
    for (const auto& g : pop.genomes) {
        bool placed = false;
        for (auto& s : out.species) {
            if (compatibility_distance(s.representative, g, p) < p.compat_threshold) {
                s.members.push_back(g.genome_id);
                placed = true;
                break;
            }
        }
        if (!placed) {
            Species s;
            s.id = out.next_species_id++;
            s.representative = g;
            s.members.push_back(g.genome_id);
            out.species.push_back(std::move(s));
        }
    }
    std::erase_if(out.species, [](const Species& s) { return s.members.empty(); });

    std::map<GenomeId, const Genome*> by_id;
    for (const auto& g : pop.genomes)
        by_id[g.genome_id] = &g;
    for (auto& s : out.species) {
        s.representative = *by_id.at(s.members.front());
        s.representative.fitness.reset();
    }
    return out;
}

namespace detail {

inline std::map<GenomeId, std::size_t> index_by_id(const Population& pop) {
    std::map<GenomeId, std::size_t> idx;
    for (std::size_t i = 0; i < pop.genomes.size(); ++i)
        idx[pop.genomes[i].genome_id] = i;
    return idx;
}

inline double fitness_of(const Genome& g) {
    if (!g.fitness)
        throw Error("genome " + std::to_string(g.genome_id) + " has no fitness");
    return *g.fitness;
}

} // namespace detail

/// Appends each species' best raw fitness of this generation to its history.
inline void record_species_fitness(SpeciesPartition& part, const Population& pop) {
    const auto idx = detail::index_by_id(pop);
    for (auto& s : part.species) {
        double best = -std::numeric_limits<double>::infinity();
        for (GenomeId m : s.members)
            best = std::max(best, detail::fitness_of(pop.genomes[idx.at(m)]));
        s.best_history.push_back(best);
    }
}

/// No improvement over the pre-window best within the last `window` generations.
inline bool is_stagnant(const Species& s, std::uint32_t window) {
    if (window == 0 || s.best_history.size() <= window)
        return false;
    const auto split = s.best_history.end() - window;
    const double before = *std::max_element(s.best_history.begin(), split);
    const double recent = *std::max_element(split, s.best_history.end());
    return recent <= before;
}

/// Explicit fitness sharing, aligned with pop.genomes.
inline std::vector<double> share_fitness(const SpeciesPartition& part, const Population& pop) {
    const auto idx = detail::index_by_id(pop);
    std::vector<double> adjusted(pop.genomes.size(), 0.0);
    std::vector<bool> seen(pop.genomes.size(), false);
    for (const auto& s : part.species) {
        const double size = static_cast<double>(s.members.size());
        for (GenomeId m : s.members) {
            const std::size_t i = idx.at(m);
            adjusted[i] = detail::fitness_of(pop.genomes[i]) / size;
            seen[i] = true;
        }
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            throw Error("genome " + std::to_string(pop.genomes[i].genome_id) + " is not in any species");
    return adjusted;
}

// ---------------------------------------------------------------------------
// Selection

struct MatingEntry {
    GenomeId child_id = 0;
    GenomeId parent_a = 0;  // fitter parent
    GenomeId parent_b = 0;
    std::uint32_t species_id = 0;

    friend bool operator==(const MatingEntry&, const MatingEntry&) = default;
};

struct MatingPlan {
    std::vector<GenomeId> elites;       // carried unchanged, become child ids 0..elites-1
    std::vector<MatingEntry> entries;   // child ids continue after the elites
    std::vector<GenomeId> eligible;     // every survivor allowed to reproduce
    std::vector<std::uint32_t> removed_species;  // dropped for stagnation

    std::size_t size() const { return entries.size(); }
};

/// Largest-remainder apportionment of `total` seats by weight; ties go to the lower index.
inline std::vector<std::size_t> apportion(std::span<const double> weights, std::size_t total) {
    std::vector<std::size_t> seats(weights.size(), 0);
    if (weights.empty() || total == 0)
        return seats;
    double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> w(weights.begin(), weights.end());
    if (!(sum > 0.0)) {
        std::fill(w.begin(), w.end(), 1.0);
        sum = static_cast<double>(w.size());
    }
    std::vector<std::pair<double, std::size_t>> rema;
    std::size_t given = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double exact = static_cast<double>(total) * w[i] / sum;
        seats[i] = static_cast<std::size_t>(std::floor(exact));
        given += seats[i];
        rema.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; given < total; ++k, ++given)
        ++seats[rema[k % rema.size()].second];
    return seats;
}

inline MatingPlan select_parents(const Population& pop, const SpeciesPartition& part,
                                 std::span<const double> adjusted, const NeatParams& p, XorWowState& rng) {
    if (pop.genomes.empty())
        throw Error("cannot select parents from an empty population");
    if (adjusted.size() != pop.genomes.size())
        throw Error("adjusted fitness size does not match the population");
    const auto idx = detail::index_by_id(pop);
    auto fitness = [&](GenomeId id) { return detail::fitness_of(pop.genomes[idx.at(id)]); };
    auto fitter = [&](GenomeId a, GenomeId b) {
        const double fa = fitness(a), fb = fitness(b);
        return fa != fb ? fa > fb : a < b;
    };

    MatingPlan plan;
    std::vector<GenomeId> ranked;
    for (const auto& g : pop.genomes)
        ranked.push_back(g.genome_id);
    std::sort(ranked.begin(), ranked.end(), fitter);
    const std::size_t elites = std::min<std::size_t>(p.elitism, ranked.size());
    plan.elites.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(elites));
    const GenomeId best = ranked.front();

    std::vector<const Species*> alive;
    for (const auto& s : part.species) {
        const bool holds_best = std::find(s.members.begin(), s.members.end(), best) != s.members.end();
        if (!holds_best && is_stagnant(s, p.species_stagnation))
            plan.removed_species.push_back(s.id);
        else
            alive.push_back(&s);
    }

    // quotas from each species' shared fitness, shifted so the population minimum is zero
    double min_fitness = fitness(best);
    for (const auto& g : pop.genomes)
        min_fitness = std::min(min_fitness, detail::fitness_of(g));
    std::vector<double> weights;
    for (const Species* s : alive) {
        double w = 0.0;
        for (GenomeId m : s->members)
            w += (fitness(m) - min_fitness) / static_cast<double>(s->members.size());
        weights.push_back(w);
    }
    const std::size_t children = pop.genomes.size() - elites;
    const auto quotas = apportion(weights, children);

    GenomeId next_child = static_cast<GenomeId>(elites);
    for (std::size_t si = 0; si < alive.size(); ++si) {
        const Species& s = *alive[si];
        std::vector<GenomeId> members = s.members;
        std::sort(members.begin(), members.end(), [&](GenomeId a, GenomeId b) {
            const double fa = adjusted[idx.at(a)], fb = adjusted[idx.at(b)];
            return fa != fb ? fa > fb : a < b;
        });
        const auto keep = static_cast<std::size_t>(
            std::ceil(p.survival_fraction * static_cast<double>(members.size()) - 1e-9));
        members.resize(std::clamp<std::size_t>(keep, 1, members.size()));
        plan.eligible.insert(plan.eligible.end(), members.begin(), members.end());

        const auto n = static_cast<std::uint32_t>(members.size());
        for (std::size_t c = 0; c < quotas[si]; ++c) {
            GenomeId a = members[rng.next_below(n)];
            GenomeId b = members[rng.next_below(n)];
            if (fitter(b, a))
                std::swap(a, b);
            plan.entries.push_back({next_child++, a, b, s.id});
        }
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Reference reproduction

namespace detail {

/// True if `to` is reachable from `from` over the given connections (any enabled state).
inline bool reachable(const std::vector<ConnectionGene>& conns, NodeId from, NodeId to) {
    std::vector<NodeId> stack{from};
    std::unordered_set<NodeId> seen{from};
    while (!stack.empty()) {
        const NodeId n = stack.back();
        stack.pop_back();
        if (n == to)
            return true;
        auto it = std::lower_bound(conns.begin(), conns.end(), n,
                                   [](const ConnectionGene& c, NodeId v) { return c.src < v; });
        for (; it != conns.end() && it->src == n; ++it)
            if (seen.insert(it->dst).second)
                stack.push_back(it->dst);
    }
    return false;
}

inline bool creates_cycle(const std::vector<ConnectionGene>& sorted_conns, NodeId src, NodeId dst) {
    return src == dst || reachable(sorted_conns, dst, src);
}

} // namespace detail

/// Whole-genome, pass-by-pass reproduction. The streaming engine must match
/// it gene for gene when fed the same lanes.
template <UnitSource Rng>
Genome reproduce_reference(const Genome& a, const Genome& b, GenomeId child_id, const NeatParams& p,
                           ChildLanes<Rng>& lanes, ReproductionCounters* counters = nullptr) {
    if (!is_canonical(a) || !is_canonical(b))
        throw InvalidGenomeError("reproduce_reference requires canonical parents");
    ReproductionCounters local;
    ReproductionCounters& count = counters ? *counters : local;

    Genome child;
    child.genome_id = child_id;
    child.num_inputs = a.num_inputs;
    child.num_outputs = a.num_outputs;

    // (1)(2) crossover: matched keys mix attributes, unmatched genes come from A only
    auto pick = [&] { return lanes.crossover.next_unit() < p.crossover_bias; };
    for (const auto& na : a.nodes) {
        NodeGene n = na;
        if (const NodeGene* nb = b.find_node(na.id)) {
            n.bias = pick() ? na.bias : nb->bias;
            n.response = pick() ? na.response : nb->response;
            n.activation = pick() ? na.activation : nb->activation;
            n.aggregation = pick() ? na.aggregation : nb->aggregation;
        }
        child.nodes.push_back(n);
    }
    for (const auto& ca : a.connections) {
        ConnectionGene c = ca;
        auto it = std::lower_bound(b.connections.begin(), b.connections.end(), ca, conn_key_less);
        if (it != b.connections.end() && it->src == ca.src && it->dst == ca.dst) {
            c.weight = pick() ? ca.weight : it->weight;
            c.enabled = pick() ? ca.enabled : it->enabled;
        }
        child.connections.push_back(c);
    }
    count.crossovers += child.gene_count();
    {
        // aligned pairs = |A ∪ B| keys
        std::size_t only_b = 0;
        for (const auto& nb : b.nodes)
            only_b += a.find_node(nb.id) ? 0 : 1;
        for (const auto& cb : b.connections)
            only_b += std::binary_search(a.connections.begin(), a.connections.end(), cb, conn_key_less) ? 0 : 1;
        count.genes_streamed += a.gene_count() + only_b;
    }

    // (3) perturbation
    auto mutate = [&](double v, RealKind kind) {
        bool mutated = false, replaced = false;
        const double out = mutate_real(v, kind, p, lanes.perturb, &mutated, &replaced);
        count.perturbations += mutated;
        count.replacements += replaced;
        return out;
    };
    for (auto& n : child.nodes) {
        n.bias = mutate(n.bias, RealKind::half);
        n.response = mutate(n.response, RealKind::half);
    }
    for (auto& c : child.connections)
        c.weight = mutate(c.weight, RealKind::single);

    // (4) deletion
    std::vector<NodeId> deleted;
    {
        std::vector<NodeGene> kept;
        for (const auto& n : child.nodes) {
            const double u = lanes.remove.next_unit();
            const bool io = child.is_input(n.id) || child.is_output(n.id);
            if (!io && deleted.size() < p.max_node_deletions && u < p.delete_node_prob) {
                deleted.push_back(n.id);
                ++count.node_deletions;
            } else {
                kept.push_back(n);
            }
        }
        child.nodes = std::move(kept);
    }
    {
        std::vector<ConnectionGene> kept;
        for (const auto& c : child.connections) {
            const bool dangling = std::find(deleted.begin(), deleted.end(), c.src) != deleted.end() ||
                                  std::find(deleted.begin(), deleted.end(), c.dst) != deleted.end();
            if (dangling) {
                ++count.dangling_drops;
                continue;
            }
            if (lanes.remove.next_unit() < p.delete_conn_prob) {
                ++count.conn_deletions;
                continue;
            }
            kept.push_back(c);
        }
        child.connections = std::move(kept);
    }

    // (5)(6) structural additions over the surviving connection list
    NodeId max_id = 0;
    for (const auto& n : child.nodes)
        max_id = std::max(max_id, n.id);
    bool node_added = false;
    bool conn_done = false;
    std::optional<NodeId> latched;
    std::optional<ConnectionGene> candidate;
    std::vector<ConnectionGene> next_conns;
    std::optional<NodeGene> new_node;
    for (const auto& c : child.connections) {
        bool completing = false;
        if (latched) {
            candidate = ConnectionGene{*latched, c.dst, 1.0, true};
            latched.reset();
            conn_done = true;
            completing = true;
        }
        bool split = false;
        if (!completing && !node_added && c.enabled && max_id < kMaxNodeId) {
            if (lanes.add.next_unit() < p.add_node_prob) {
                const NodeId m = static_cast<NodeId>(max_id + 1);
                new_node = NodeGene{m, 0.0, 1.0, p.default_activation, Aggregation::sum};
                next_conns.push_back({c.src, m, 1.0, true});
                next_conns.push_back({m, c.dst, c.weight, true});
                node_added = true;
                split = true;
                ++count.nodes_added;
            }
        }
        if (!split)
            next_conns.push_back(c);
        if (!conn_done && !latched) {
            if (lanes.add.next_unit() >= 1.0 - p.add_conn_prob)
                latched = c.src;
        }
    }
    if (new_node)
        child.nodes.push_back(*new_node);
    std::sort(next_conns.begin(), next_conns.end(), conn_key_less);
    if (candidate) {
        const bool duplicate =
            std::binary_search(next_conns.begin(), next_conns.end(), *candidate, conn_key_less);
        if (duplicate || detail::creates_cycle(next_conns, candidate->src, candidate->dst)) {
            ++count.conns_rejected;
        } else {
            next_conns.push_back(*candidate);
            ++count.conns_added;
        }
    }
    child.connections = std::move(next_conns);

    // (7)
    return canonicalize(std::move(child));
}

// ---------------------------------------------------------------------------
// One generation

struct ReproductionOutput {
    std::vector<Genome> children;  // in plan order
    ReproductionCounters counters;
};

/// Reproduces every planned child with reproduce_reference.
inline ReproductionOutput reproduce_plan_reference(const Population& parents, const MatingPlan& plan,
                                                   const NeatParams& p, std::uint64_t gen_seed) {
    const auto idx = detail::index_by_id(parents);
    ReproductionOutput out;
    out.children.reserve(plan.entries.size());
    for (const auto& e : plan.entries) {
        auto lanes = child_lanes(gen_seed, e.child_id);
        out.children.push_back(reproduce_reference(parents.genomes[idx.at(e.parent_a)],
                                                   parents.genomes[idx.at(e.parent_b)], e.child_id, p, lanes,
                                                   &out.counters));
    }
    return out;
}

struct GenStats {
    ReproductionCounters ops;
    std::size_t species_count = 0;
    std::size_t children = 0;
    std::size_t total_genes = 0;                 // in the next population
    std::map<GenomeId, std::uint32_t> reuse;     // parent id -> child slots it filled
    std::uint32_t max_parent_reuse = 0;
};

struct EvolutionState {
    SpeciesPartition partition;
};

using Reproducer = std::function<ReproductionOutput(const Population&, const MatingPlan&, std::uint64_t)>;

/// speciate -> share -> select -> reproduce. Fitness must be set on every genome of `pop`.
inline std::pair<Population, GenStats> step_generation(const Population& pop, EvolutionState& state,
                                                       const NeatParams& p, std::uint64_t gen_seed,
                                                       const Reproducer& reproduce, MatingPlan* plan_out = nullptr) {
    p.validate();
    for (const auto& g : pop.genomes)
        (void)detail::fitness_of(g);

    SpeciesPartition part = speciate(pop, state.partition, p);
    record_species_fitness(part, pop);
    const auto adjusted = share_fitness(part, pop);
    XorWowState selector = seed_stream(gen_seed, kSelectorStream);
    MatingPlan plan = select_parents(pop, part, adjusted, p, selector);
    ReproductionOutput produced = reproduce(pop, plan, gen_seed);
    if (produced.children.size() != plan.entries.size())
        throw Error("reproducer returned the wrong number of children");

    const auto idx = detail::index_by_id(pop);
    Population next;
    next.generation_index = pop.generation_index + 1;
    for (std::size_t e = 0; e < plan.elites.size(); ++e) {
        Genome g = pop.genomes[idx.at(plan.elites[e])];
        g.genome_id = static_cast<GenomeId>(e);
        g.fitness.reset();
        next.genomes.push_back(std::move(g));
    }
    for (auto& c : produced.children) {
        c.fitness.reset();
        next.genomes.push_back(std::move(c));
    }

    GenStats stats;
    stats.ops = produced.counters;
    stats.species_count = part.species.size();
    stats.children = plan.entries.size();
    stats.total_genes = next.total_genes();
    for (const auto& e : plan.entries) {
        ++stats.reuse[e.parent_a];
        ++stats.reuse[e.parent_b];
    }
    for (const auto& [id, n] : stats.reuse)
        stats.max_parent_reuse = std::max(stats.max_parent_reuse, n);

    std::erase_if(part.species, [&](const Species& s) {
        return std::find(plan.removed_species.begin(), plan.removed_species.end(), s.id) !=
               plan.removed_species.end();
    });
    state.partition = std::move(part);
    if (plan_out)
        *plan_out = std::move(plan);
    return {std::move(next), std::move(stats)};
}

} // namespace genesys
