#include <gtest/gtest.h>

#include <numeric>

#include "genesys/neat.hpp"
#include "support.hpp"

using namespace genesys;
using testing_support::ScriptedDraws;

namespace {

NeatParams no_mutation() {
    NeatParams p;
    p.perturb_rate = 0.0;
    p.add_node_prob = 0.0;
    p.add_conn_prob = 0.0;
    p.delete_node_prob = 0.0;
    p.delete_conn_prob = 0.0;
    return p;
}

Genome two_node(GenomeId id, double w, bool enabled = true) {
    Genome g;
    g.genome_id = id;
    g.num_inputs = 1;
    g.num_outputs = 1;
    g.nodes = {{.id = 0}, {.id = 1, .activation = Activation::sigmoid}};
    g.connections = {{0, 1, w, enabled}};
    return g;
}

Population uniform_population(std::size_t n, double fitness) {
    Population pop;
    for (std::size_t i = 0; i < n; ++i) {
        pop.genomes.push_back(initial_genome(static_cast<GenomeId>(i), 2, 1, Activation::sigmoid));
        pop.genomes.back().fitness = fitness;
    }
    return pop;
}

ReproductionOutput reference_reproducer(const Population& parents, const MatingPlan& plan, std::uint64_t seed,
                                        const NeatParams& p) {
    return reproduce_plan_reference(parents, plan, p, seed);
}

} // namespace

TEST(Compatibility, IdenticalIsZero) {
    const Genome g = initial_genome(0, 3, 1, Activation::sigmoid);
    EXPECT_EQ(compatibility_distance(g, g, {}), 0.0);
}

TEST(Compatibility, OneExtraConnection) {
    // g1: 4 genes; g2 adds one connection with no weight differences
    Genome g1;
    g1.num_inputs = 2;
    g1.num_outputs = 1;
    g1.nodes = {{.id = 0}, {.id = 1}, {.id = 2}};
    g1.connections = {{0, 2, 1.0, true}};
    Genome g2 = g1;
    g2.connections.push_back({1, 2, 1.0, true});
    EXPECT_DOUBLE_EQ(compatibility_distance(g1, g2, {}), 0.2);
    EXPECT_DOUBLE_EQ(compatibility_distance(g2, g1, {}), 0.2);
}

TEST(Compatibility, WeightTerm) {
    // c_w * mean |dw| over matched keys; node biases count as matched attributes
    Genome a = two_node(0, 1.0), b = two_node(1, -1.0);
    // 3 matched keys: two nodes (bias diff 0) and one connection (diff 2)
    EXPECT_DOUBLE_EQ(compatibility_distance(a, b, {}), 0.5 * (2.0 / 3.0));
}

TEST(Compatibility, SymmetricOnFuzzedPairs) {
    XorWowState rng = seed_stream(3, 0);
    for (int i = 0; i < 300; ++i) {
        const Genome a = testing_support::random_genome(rng, 0, 3, 2);
        const Genome b = testing_support::random_genome(rng, 1, 3, 2);
        EXPECT_EQ(compatibility_distance(a, b, {}), compatibility_distance(b, a, {}));
    }
}

TEST(Speciate, IdenticalPopulationOneSpecies) {
    const auto part = speciate(uniform_population(50, 1.0), {}, {});
    ASSERT_EQ(part.species.size(), 1u);
    EXPECT_EQ(part.species[0].members.size(), 50u);
}

TEST(Speciate, TwoClusters) {
    Population pop;
    for (GenomeId i = 0; i < 10; ++i) {
        Genome g = two_node(i, i % 2 ? 20.0 : -20.0);
        g.fitness = 1.0;
        pop.genomes.push_back(g);
    }
    const auto part = speciate(pop, {}, {});
    ASSERT_EQ(part.species.size(), 2u);
    EXPECT_EQ(part.species[0].members, (std::vector<GenomeId>{0, 2, 4, 6, 8}));
    EXPECT_EQ(part.species[1].members, (std::vector<GenomeId>{1, 3, 5, 7, 9}));
}

TEST(Speciate, PartitionCoversEveryGenomeOnce) {
    XorWowState rng = seed_stream(8, 0);
    NeatParams p;
    p.compat_threshold = 0.8;
    const Population pop = testing_support::random_population(rng, 120, 3, 2);
    const auto part = speciate(pop, {}, p);
    std::vector<GenomeId> all;
    for (const auto& s : part.species) {
        EXPECT_FALSE(s.members.empty());
        all.insert(all.end(), s.members.begin(), s.members.end());
    }
    std::sort(all.begin(), all.end());
    std::vector<GenomeId> expect(120);
    std::iota(expect.begin(), expect.end(), 0);
    EXPECT_EQ(all, expect);
}

TEST(ShareFitness, Definition) {
    Population pop;
    for (GenomeId i = 0; i < 3; ++i)
        pop.genomes.push_back(two_node(i, 0.0));
    pop.genomes[0].fitness = 7.0;
    pop.genomes[1].fitness = 4.0;
    pop.genomes[2].fitness = 4.0;
    SpeciesPartition part;
    part.species.push_back({.id = 0, .representative = pop.genomes[0], .members = {0}, .best_history = {}});
    part.species.push_back({.id = 1, .representative = pop.genomes[1], .members = {1, 2}, .best_history = {}});
    EXPECT_EQ(share_fitness(part, pop), (std::vector<double>{7.0, 2.0, 2.0}));

    pop.genomes[2].fitness.reset();
    EXPECT_THROW(share_fitness(part, pop), Error);
}

TEST(Apportion, LargestRemainder) {
    const double w[] = {1.0, 1.0, 1.0};
    EXPECT_EQ(apportion(w, 10), (std::vector<std::size_t>{4, 3, 3}));
    const double z[] = {0.0, 0.0};
    EXPECT_EQ(apportion(z, 5), (std::vector<std::size_t>{3, 2}));
    const double v[] = {0.5, 2.25, 7.0, 0.25};
    const auto s = apportion(v, 148);
    EXPECT_EQ(std::accumulate(s.begin(), s.end(), std::size_t{0}), 148u);
}

TEST(Selection, Population150Counts) {
    Population pop = uniform_population(150, 1.0);
    XorWowState rng = seed_stream(1, kSelectorStream);
    const auto part = speciate(pop, {}, {});
    const auto adj = share_fitness(part, pop);
    const MatingPlan plan = select_parents(pop, part, adj, {}, rng);
    EXPECT_EQ(plan.eligible.size(), 30u);
    EXPECT_EQ(plan.size(), 148u);
    EXPECT_EQ(plan.elites, (std::vector<GenomeId>{0, 1}));
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
        EXPECT_EQ(plan.entries[i].child_id, i + 2);
        EXPECT_LE(plan.entries[i].parent_a, plan.entries[i].parent_b);  // equal fitness: lower id is "fitter"
    }
}

TEST(Selection, QuotasSumToPlanLength) {
    XorWowState rng = seed_stream(12, 0);
    NeatParams p;
    p.compat_threshold = 0.7;
    for (int rep = 0; rep < 10; ++rep) {
        const Population pop = testing_support::random_population(rng, 90, 2, 2);
        const auto part = speciate(pop, {}, p);
        const auto adj = share_fitness(part, pop);
        XorWowState sel = seed_stream(rep, kSelectorStream);
        const auto plan = select_parents(pop, part, adj, p, sel);
        EXPECT_GT(part.species.size(), 1u);
        EXPECT_EQ(plan.size() + plan.elites.size(), pop.genomes.size());
        for (const auto& e : plan.entries) {
            const double fa = *pop.genomes[e.parent_a].fitness, fb = *pop.genomes[e.parent_b].fitness;
            EXPECT_TRUE(fa > fb || (fa == fb && e.parent_a <= e.parent_b));
        }
    }
}

TEST(Selection, ElitesAreGlobalTop) {
    Population pop = uniform_population(10, 1.0);
    pop.genomes[7].fitness = 9.0;
    pop.genomes[3].fitness = 5.0;
    XorWowState rng = seed_stream(1, 0);
    const auto part = speciate(pop, {}, {});
    const auto plan = select_parents(pop, part, share_fitness(part, pop), {}, rng);
    EXPECT_EQ(plan.elites, (std::vector<GenomeId>{7, 3}));
}

TEST(Selection, StagnantSpeciesRemovedUnlessHoldingBest) {
    Species s;
    s.best_history = {5, 5, 5};
    EXPECT_TRUE(is_stagnant(s, 2));
    EXPECT_FALSE(is_stagnant(s, 3));
    EXPECT_FALSE(is_stagnant(s, 0));
    s.best_history = {5, 4, 6};
    EXPECT_FALSE(is_stagnant(s, 2));

    Population pop;
    for (GenomeId i = 0; i < 6; ++i) {
        Genome g = two_node(i, i < 3 ? -20.0 : 20.0);
        g.fitness = i < 3 ? 1.0 : 2.0;
        pop.genomes.push_back(g);
    }
    SpeciesPartition part = speciate(pop, {}, {});
    ASSERT_EQ(part.species.size(), 2u);
    for (auto& sp : part.species)
        sp.best_history = {3, 3, 3, 3};  // both stagnant
    NeatParams p;
    p.species_stagnation = 2;
    XorWowState rng = seed_stream(1, 0);
    const auto plan = select_parents(pop, part, share_fitness(part, pop), p, rng);
    EXPECT_EQ(plan.removed_species, (std::vector<std::uint32_t>{part.species[0].id}));
    for (const auto& e : plan.entries)
        EXPECT_GE(e.parent_b, 3u);
}

TEST(Reference, IdenticalParentsNoMutationIsFixedPoint) {
    XorWowState rng = seed_stream(21, 0);
    const NeatParams p = no_mutation();
    for (int i = 0; i < 100; ++i) {
        const Genome g = testing_support::random_genome(rng, 4, 3, 2);
        auto lanes = child_lanes(i, 9);
        Genome child = reproduce_reference(g, g, 4, p, lanes);
        Genome want = g;
        want.fitness.reset();
        EXPECT_EQ(child, want);
    }
}

TEST(Reference, BiasOneCopiesParentA) {
    XorWowState rng = seed_stream(22, 0);
    NeatParams p = no_mutation();
    p.crossover_bias = 1.0;
    for (int i = 0; i < 100; ++i) {
        Genome a = testing_support::random_genome(rng, 0, 2, 2);
        const Genome b = testing_support::random_genome(rng, 1, 2, 2);
        a.fitness.reset();
        auto lanes = child_lanes(5, 5);
        Genome child = reproduce_reference(a, b, 0, p, lanes);
        EXPECT_EQ(child, a);
    }
}

TEST(Reference, NonCanonicalParentRejected) {
    Genome a = initial_genome(0, 2, 2, Activation::sigmoid);
    std::swap(a.connections[0], a.connections[1]);
    auto lanes = child_lanes(0, 0);
    EXPECT_THROW(reproduce_reference(a, a, 0, {}, lanes), InvalidGenomeError);
}

// Hand trace on 3-gene parents:
//   A: 0 {identity}, 1 {bias 0.5, resp 1, sigmoid, sum}, (0->1, 0.5, on)
//   B: 0 {identity}, 1 {bias -1, resp 2, tanh, max},     (0->1, -1, off)
// crossover draws 0.3,0.7,0.1,0.9 on node 1 -> bias A, response B, activation A, aggregation B;
// connection draws 0.6,0.2 -> weight B, enabled A.
// perturb: node 1 bias gets delta (2*0.75-1)*0.5 = +0.25 -> 0.75; weight replaced by -2+4*0.625 = 0.5.
// add: split 0->1 (draw 0.01 < 0.03) into node 2, 0->2 (1.0), 2->1 (0.5); latch at 0.97 finds no next gene.
TEST(Reference, ScriptedHandTrace) {
    Genome a = two_node(0, 0.5);
    a.nodes[1].bias = 0.5;
    Genome b = two_node(1, -1.0, false);
    b.nodes[1] = {.id = 1, .bias = -1.0, .response = 2.0, .activation = Activation::tanh, .aggregation = Aggregation::max};

    ChildLanes<ScriptedDraws> lanes{
        {0.9, 0.9, 0.9, 0.9, 0.3, 0.7, 0.1, 0.9, 0.6, 0.2},
        {0.9, 0.95, 0.1, 0.5, 0.75, 0.85, 0.2, 0.05, 0.625},
        {0.0, 0.0, 0.5},
        {0.01, 0.97}};
    ReproductionCounters n;
    const Genome child = reproduce_reference(a, b, 3, NeatParams{}, lanes, &n);

    Genome expect;
    expect.genome_id = 3;
    expect.num_inputs = 1;
    expect.num_outputs = 1;
    expect.nodes = {{.id = 0},
                    {.id = 1, .bias = 0.75, .response = 2.0, .activation = Activation::sigmoid, .aggregation = Aggregation::max},
                    {.id = 2, .bias = 0.0, .response = 1.0, .activation = Activation::sigmoid}};
    expect.connections = {{0, 2, 1.0, true}, {2, 1, 0.5, true}};
    EXPECT_EQ(child, expect);
    for (auto* lane : {&lanes.crossover, &lanes.perturb, &lanes.remove, &lanes.add})
        EXPECT_TRUE(lane->draws.empty());
    EXPECT_EQ(n.crossovers, 3u);
    EXPECT_EQ(n.perturbations, 2u);
    EXPECT_EQ(n.replacements, 1u);
    EXPECT_EQ(n.nodes_added, 1u);
    EXPECT_EQ(n.conns_added + n.conns_rejected, 0u);
}

TEST(Reference, NodeDeletionCapAndDanglingDrops) {
    Genome g;
    g.num_inputs = 1;
    g.num_outputs = 1;
    g.nodes = {{.id = 0}, {.id = 1}, {.id = 2}, {.id = 3}, {.id = 4}};
    g.connections = {{0, 2, 1, true}, {0, 3, 1, true}, {0, 4, 1, true}, {2, 1, 1, true}, {3, 1, 1, true}, {4, 1, 1, true}};
    NeatParams p = no_mutation();
    p.delete_node_prob = 0.5;
    p.max_node_deletions = 2;
    // five node draws (all "delete"); only (0,4) and (4,1) survive to draw
    ChildLanes<ScriptedDraws> lanes{{}, {}, {0.1, 0.1, 0.1, 0.1, 0.1, 0.9, 0.9}, {}};
    p.crossover_bias = 1.0;
    lanes.crossover.draws.assign(100, 0.0);
    lanes.perturb.draws.assign(100, 0.5);
    lanes.add.draws.assign(100, 0.5);
    ReproductionCounters n;
    const Genome child = reproduce_reference(g, g, 0, p, lanes, &n);
    EXPECT_EQ(child.nodes.size(), 3u);
    EXPECT_EQ(child.nodes.back().id, 4);
    EXPECT_EQ(child.connections, (std::vector<ConnectionGene>{{0, 4, 1, true}, {4, 1, 1, true}}));
    EXPECT_EQ(n.node_deletions, 2u);
    EXPECT_EQ(n.dangling_drops, 4u);
    EXPECT_TRUE(lanes.remove.draws.empty());
}

TEST(Reference, PerturbBounds) {
    NeatParams p;
    p.perturb_rate = 1.0;
    p.replace_rate = 0.0;
    XorWowState rng = seed_stream(2, 2);
    for (int i = 0; i < 10000; ++i) {
        const double w = mutate_real(1.0, RealKind::single, p, rng);
        ASSERT_GE(w, 0.5);
        ASSERT_LE(w, 1.5);
    }
    p.perturb_power = 0.0;
    for (int i = 0; i < 100; ++i)
        ASSERT_EQ(mutate_real(0.375, RealKind::half, p, rng), 0.375);
    p.perturb_rate = 0.0;
    p.perturb_power = 3.0;
    for (int i = 0; i < 100; ++i)
        ASSERT_EQ(mutate_real(0.375, RealKind::half, p, rng), 0.375);
}

TEST(StepGeneration, Invariants) {
    XorWowState rng = seed_stream(31, 0);
    Population pop = testing_support::random_population(rng, 150, 3, 1);
    EvolutionState state;
    NeatParams p;
    p.add_node_prob = 0.3;
    p.add_conn_prob = 0.5;
    const Reproducer r = [&](const Population& a, const MatingPlan& b, std::uint64_t s) {
        return reference_reproducer(a, b, s, p);
    };
    MatingPlan plan;
    auto [next, stats] = step_generation(pop, state, p, 77, r, &plan);
    EXPECT_EQ(next.genomes.size(), pop.genomes.size());
    std::uint32_t reuse = 0;
    for (const auto& [id, k] : stats.reuse)
        reuse += k;
    EXPECT_EQ(reuse, 2 * stats.children);
    for (std::size_t i = 0; i < next.genomes.size(); ++i) {
        EXPECT_EQ(next.genomes[i].genome_id, i);
        EXPECT_FALSE(next.genomes[i].fitness);
        EXPECT_NO_THROW(validate(next.genomes[i]));
    }
    EXPECT_EQ(stats.total_genes, next.total_genes());

    EvolutionState again;
    auto [next2, stats2] = step_generation(pop, again, p, 77, r);
    EXPECT_EQ(next2.genomes, next.genomes);
}

TEST(StepGeneration, NoMutationChildrenCopyFitterParent) {
    XorWowState rng = seed_stream(32, 0);
    Population pop = testing_support::random_population(rng, 60, 2, 2);
    NeatParams p = no_mutation();
    p.crossover_bias = 1.0;
    EvolutionState state;
    const Reproducer r = [&](const Population& a, const MatingPlan& b, std::uint64_t s) {
        return reference_reproducer(a, b, s, p);
    };
    MatingPlan plan;
    auto [next, stats] = step_generation(pop, state, p, 5, r, &plan);
    for (const auto& e : plan.entries) {
        Genome a = pop.genomes[e.parent_a];
        a.genome_id = e.child_id;
        a.fitness.reset();
        EXPECT_EQ(next.genomes[e.child_id], a);
    }
    EXPECT_EQ(stats.ops.mutations(), 0u);
}

TEST(StepGeneration, SkewedFitnessConcentratesReuse) {
    // one dominant genome in a five-member species: survivors = 1, so it parents every child of that species
    Population pop;
    for (GenomeId i = 0; i < 150; ++i) {
        Genome g = two_node(i, i < 5 ? 1.0 : -20.0);
        g.fitness = i == 0 ? 100.0 : 1.0;
        pop.genomes.push_back(g);
    }
    NeatParams p = no_mutation();
    EvolutionState state;
    const Reproducer r = [&](const Population& a, const MatingPlan& b, std::uint64_t s) {
        return reference_reproducer(a, b, s, p);
    };
    auto [next, stats] = step_generation(pop, state, p, 1, r);
    EXPECT_EQ(stats.species_count, 2u);
    EXPECT_GE(stats.max_parent_reuse, 80u);
}
