#include <gtest/gtest.h>

#include <bit>
#include <cstring>

#include "genesys/population_io.hpp"
#include "support.hpp"

using namespace genesys;

TEST(Codec, NodeExampleWord) {
    NodeGene n{.id = 1, .bias = 0.0, .response = 1.0};
    EXPECT_EQ(encode_gene(n).word, 0x0001'0000'3C00'0000ull);
    EXPECT_EQ(decode_node({0x0001'0000'3C00'0000ull}), n);
}

TEST(Codec, ConnectionExampleWord) {
    ConnectionGene c{.src = 0, .dst = 1, .weight = 1.0, .enabled = true};
    EXPECT_EQ(encode_gene(c).word, 0xC000'0001'3F80'0000ull);
    EXPECT_EQ(decode_connection({0xC000'0001'3F80'0000ull}), c);
}

TEST(Codec, AllZeroNode) {
    NodeGene n{.id = 0, .bias = 0.0, .response = 0.0};
    EXPECT_EQ(encode_gene(n).word, 0u);
    EXPECT_EQ(decode_node({0}), n);
}

// Independent bit assembly: fields placed by shifting hand-computed IEEE bit patterns.
TEST(Codec, FieldPlacement) {
    NodeGene n{.id = 0x7FFF, .bias = -2.0, .response = 0.5, .activation = Activation::relu,
               .aggregation = Aggregation::mean};
    const std::uint64_t expect = (0x7FFFull << 48) | (0xC000ull << 32) | (0x3800ull << 16) | (3ull << 12) | (4ull << 8);
    EXPECT_EQ(encode_gene(n).word, expect);

    ConnectionGene c{.src = 5, .dst = 0x7FFF, .weight = -0.25, .enabled = false};
    std::uint32_t wbits;
    const float wf = -0.25f;
    std::memcpy(&wbits, &wf, 4);
    const std::uint64_t cexpect = (1ull << 63) | (5ull << 47) | (0x7FFFull << 32) | wbits;
    EXPECT_EQ(encode_gene(c).word, cexpect);
}

TEST(Codec, MalformedWords) {
    EXPECT_THROW(decode_node({0xFull << 12}), MalformedGeneError);   // activation 15
    EXPECT_THROW(decode_node({0x7ull << 8}), MalformedGeneError);    // aggregation 7
    EXPECT_THROW(decode_node({0x01}), MalformedGeneError);           // reserved bits
    EXPECT_THROW(decode_gene({(1ull << 63) | 0x7F80'0000ull}), MalformedGeneError);  // +inf weight
    EXPECT_THROW(decode_connection({0x0001'0000'3C00'0000ull}), MalformedGeneError);
}

TEST(Codec, OutOfRangeValues) {
    EXPECT_THROW(encode_gene(NodeGene{.id = 1, .bias = 0.1}), EncodingRangeError);  // not binary16-exact
    EXPECT_THROW(encode_gene(NodeGene{.id = 1, .bias = 1e6}), EncodingRangeError);
    EXPECT_THROW(encode_gene(ConnectionGene{.src = 0, .dst = 1, .weight = 0.1}), EncodingRangeError);
    EXPECT_NO_THROW(encode_gene(ConnectionGene{.src = 0, .dst = 1, .weight = quantize_single(0.1)}));
    EXPECT_THROW(encode_gene(NodeGene{.id = 1, .activation = static_cast<Activation>(9)}), EncodingRangeError);
}

TEST(Codec, FuzzedRoundTrip) {
    XorWowState rng = seed_stream(42, 0);
    for (int i = 0; i < 20000; ++i) {
        const std::uint16_t hb = static_cast<std::uint16_t>(rng.next_word());
        const std::uint16_t hr = static_cast<std::uint16_t>(rng.next_word());
        if ((hb & 0x7C00) == 0x7C00 || (hr & 0x7C00) == 0x7C00)
            continue;  // inf/nan are not valid attributes
        NodeGene n{.id = static_cast<NodeId>(rng.next_below(kMaxNodeId + 1)),
                   .bias = half_bits_to_float(hb),
                   .response = half_bits_to_float(hr),
                   .activation = static_cast<Activation>(rng.next_below(kActivationCount)),
                   .aggregation = static_cast<Aggregation>(rng.next_below(kAggregationCount))};
        const auto w = encode_gene(n);
        ASSERT_EQ(decode_node(w), n);
        // -0.0 == 0.0 compares equal; the word itself must also survive
        ASSERT_EQ(encode_gene(decode_node(w)).word, w.word);

        const std::uint32_t fb = rng.next_word();
        if ((fb & 0x7F80'0000u) == 0x7F80'0000u)
            continue;
        ConnectionGene c{.src = static_cast<NodeId>(rng.next_below(kMaxNodeId + 1)),
                         .dst = static_cast<NodeId>(rng.next_below(kMaxNodeId + 1)),
                         .weight = std::bit_cast<float>(fb),
                         .enabled = (rng.next_word() & 1u) != 0};
        const auto cw = encode_gene(c);
        ASSERT_EQ(decode_connection(cw), c);
        ASSERT_EQ(encode_gene(decode_connection(cw)).word, cw.word);
    }
}

TEST(Half, KnownPatterns) {
    EXPECT_EQ(float_to_half_bits(1.0f), 0x3C00);
    EXPECT_EQ(float_to_half_bits(-2.0f), 0xC000);
    EXPECT_EQ(float_to_half_bits(65504.0f), 0x7BFF);
    EXPECT_EQ(float_to_half_bits(1e6f), 0x7C00);
    EXPECT_EQ(float_to_half_bits(0x1p-24f), 0x0001);  // smallest subnormal
    EXPECT_EQ(float_to_half_bits(0x1p-25f), 0x0000);  // ties to even
    EXPECT_EQ(float_to_half_bits(1.0f + 0x1p-11f), 0x3C00);  // halfway, rounds to even
    EXPECT_EQ(float_to_half_bits(1.0f + 0x1p-11f + 0x1p-20f), 0x3C01);
    EXPECT_EQ(half_bits_to_float(0x0001), 0x1p-24f);
    EXPECT_EQ(half_bits_to_float(0x3555), 0.333251953125f);
    EXPECT_EQ(quantize_half(0.1), 0.0999755859375);
}

TEST(Half, EveryFiniteHalfRoundTrips) {
    for (std::uint32_t b = 0; b < 0x10000; ++b) {
        if ((b & 0x7C00) == 0x7C00)
            continue;
        const float f = half_bits_to_float(static_cast<std::uint16_t>(b));
        ASSERT_EQ(float_to_half_bits(f), b) << b;
    }
}

TEST(Canonical, SortsAndDeduplicates) {
    Genome g;
    g.num_inputs = 2;
    g.num_outputs = 2;
    for (NodeId i : {3, 1, 2, 0})
        g.nodes.push_back({.id = i});
    g.connections = {{2, 3, 0.5, true}, {0, 1, 1.0, true}, {0, 1, 2.0, false}, {0, 9, 1.0, true}};
    const Genome c = canonicalize(g);
    ASSERT_EQ(c.connections.size(), 2u);
    EXPECT_EQ(c.connections[0], (ConnectionGene{0, 1, 1.0, true}));  // first duplicate kept
    EXPECT_EQ(c.connections[1], (ConnectionGene{2, 3, 0.5, true}));
    EXPECT_EQ(c.nodes.front().id, 0);
    EXPECT_EQ(canonicalize(c), c);
}

TEST(Canonical, MissingIoNode) {
    Genome g;
    g.num_inputs = 2;
    g.num_outputs = 1;
    g.nodes = {{.id = 0}, {.id = 2}};
    EXPECT_THROW(canonicalize(g), InvalidGenomeError);
}

TEST(Canonical, IdempotentOnFuzzedGenomes) {
    XorWowState rng = seed_stream(5, 0);
    for (int i = 0; i < 200; ++i) {
        Genome g = testing_support::random_genome(rng, 0, 3, 2);
        std::reverse(g.connections.begin(), g.connections.end());
        const Genome once = canonicalize(g);
        EXPECT_TRUE(is_canonical(once));
        EXPECT_EQ(canonicalize(once), once);
    }
}

TEST(Footprint, Arithmetic) {
    Population pop;
    EXPECT_EQ(footprint_bytes(pop), 0u);
    for (GenomeId i = 0; i < 150; ++i) {
        Genome g = initial_genome(i, 2, 3, Activation::sigmoid);  // 5 nodes + 6 connections = 11 genes
        g.connections.pop_back();
        pop.genomes.push_back(g);
    }
    EXPECT_EQ(pop.total_genes(), 1500u);
    EXPECT_EQ(footprint_bytes(pop), 16800u);
}

TEST(PopulationFile, SingleGenomeSize) {
    Population pop;
    pop.genomes.push_back(initial_genome(7, 4, 1, Activation::sigmoid));
    const auto bytes = serialize_population(pop);
    EXPECT_EQ(bytes.size(), 8u + 32u + 8u * 9u);
    EXPECT_EQ(std::memcmp(bytes.data(), "GENE", 4), 0);
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[6], 1);
}

TEST(PopulationFile, FuzzedRoundTrip) {
    XorWowState rng = seed_stream(11, 0);
    for (int rep = 0; rep < 20; ++rep) {
        Population pop = testing_support::random_population(rng, 1 + rng.next_below(40), 3, 2);
        pop.genomes[0].fitness.reset();
        const auto bytes = serialize_population(pop);
        EXPECT_EQ(bytes.size(), kFileHeaderBytes + footprint_bytes(pop));
        const Population back = deserialize_population(bytes);
        EXPECT_EQ(back.genomes, pop.genomes);
    }
}

TEST(PopulationFile, Errors) {
    Population pop;
    pop.genomes.push_back(initial_genome(0, 2, 1, Activation::sigmoid));
    auto bytes = serialize_population(pop);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(deserialize_population(bad_magic), FormatError);

    auto truncated = bytes;
    truncated.resize(truncated.size() - 3);
    EXPECT_THROW(deserialize_population(truncated), FormatError);

    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(deserialize_population(trailing), FormatError);

    auto malformed = bytes;
    malformed[8 + 32 + 8 + 1] = 0xF0;  // activation nibble of the second node word
    try {
        deserialize_population(malformed);
        FAIL() << "no error";
    } catch (const MalformedGeneError& e) {
        EXPECT_NE(std::string(e.what()).find("byte offset 48"), std::string::npos) << e.what();
    }

    Population dup;
    dup.genomes = {pop.genomes[0], pop.genomes[0]};
    EXPECT_THROW(deserialize_population(serialize_population(dup)), InvalidGenomeError);
}
