#pragma once

// Genes, genomes and the 64-bit gene word.
//
// Node word:        [63]=0 | [62:48] id | [47:32] bias f16 | [31:16] response f16
//                   | [15:12] activation | [11:8] aggregation | [7:0] zero
// Connection word:  [63]=1 | [62] enabled | [61:47] src | [46:32] dst | [31:0] weight f32

#include <algorithm>
#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "genesys/errors.hpp"
#include "genesys/half.hpp"

namespace genesys {

using NodeId = std::uint16_t;
using GenomeId = std::uint32_t;

inline constexpr std::uint32_t kMaxNodeId = (1u << 15) - 1;

enum class Activation : std::uint8_t { identity = 0, sigmoid = 1, tanh = 2, relu = 3 };
enum class Aggregation : std::uint8_t { sum = 0, product = 1, max = 2, min = 3, mean = 4 };

inline constexpr std::uint8_t kActivationCount = 4;
inline constexpr std::uint8_t kAggregationCount = 5;

inline const char* to_string(Activation a) {
    switch (a) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    }
    return "?";
}

inline const char* to_string(Aggregation a) {
    switch (a) {
    case Aggregation::sum: return "sum";
    case Aggregation::product: return "product";
    case Aggregation::max: return "max";
    case Aggregation::min: return "min";
    case Aggregation::mean: return "mean";
    }
    return "?";
}

struct NodeGene {
    NodeId id = 0;
    double bias = 0.0;
    double response = 1.0;
    Activation activation = Activation::identity;
    Aggregation aggregation = Aggregation::sum;

    friend bool operator==(const NodeGene&, const NodeGene&) = default;
};

struct ConnectionGene {
    NodeId src = 0;
    NodeId dst = 0;
    double weight = 0.0;
    bool enabled = true;

    friend bool operator==(const ConnectionGene&, const ConnectionGene&) = default;
};

using Gene = std::variant<NodeGene, ConnectionGene>;

/// Ordering key shared by both gene kinds: all node keys sort before all connection keys.
struct GeneKey {
    bool connection = false;
    NodeId first = 0;   // node id, or connection source
    NodeId second = 0;  // connection destination

    friend auto operator<=>(const GeneKey&, const GeneKey&) = default;
};

inline GeneKey key_of(const NodeGene& n) { return {false, n.id, 0}; }
inline GeneKey key_of(const ConnectionGene& c) { return {true, c.src, c.dst}; }
inline GeneKey key_of(const Gene& g) {
    return std::visit([](const auto& x) { return key_of(x); }, g);
}

inline std::string to_string(const GeneKey& k) {
    if (!k.connection)
        return "node " + std::to_string(k.first);
    return "conn " + std::to_string(k.first) + "->" + std::to_string(k.second);
}

struct EncodedGene {
    std::uint64_t word = 0;

    bool is_connection() const { return (word >> 63) != 0; }
    friend bool operator==(const EncodedGene&, const EncodedGene&) = default;
};

struct Genome {
    GenomeId genome_id = 0;
    std::vector<NodeGene> nodes;
    std::vector<ConnectionGene> connections;
    std::uint16_t num_inputs = 0;
    std::uint16_t num_outputs = 0;
    std::optional<double> fitness;

    std::size_t gene_count() const { return nodes.size() + connections.size(); }
    bool is_input(NodeId id) const { return id < num_inputs; }
    bool is_output(NodeId id) const { return id >= num_inputs && id < num_inputs + num_outputs; }

    const NodeGene* find_node(NodeId id) const {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                                   [](const NodeGene& n, NodeId v) { return n.id < v; });
        return (it != nodes.end() && it->id == id) ? &*it : nullptr;
    }

    friend bool operator==(const Genome&, const Genome&) = default;
};

struct Population {
    std::uint32_t generation_index = 0;
    std::vector<Genome> genomes;

    std::size_t total_genes() const {
        std::size_t n = 0;
        for (const auto& g : genomes)
            n += g.gene_count();
        return n;
    }

    friend bool operator==(const Population&, const Population&) = default;
};

// ---------------------------------------------------------------------------
// Codec

namespace detail {

inline std::uint16_t half_field(double v, const char* what) {
    if (!std::isfinite(v))
        throw EncodingRangeError(std::string(what) + " is not finite");
    const auto bits = float_to_half_bits(static_cast<float>(v));
    if (static_cast<double>(half_bits_to_float(bits)) != v)
        throw EncodingRangeError(std::string(what) + " is not representable in binary16");
    return bits;
}

inline std::uint32_t single_field(double v) {
    if (!std::isfinite(v))
        throw EncodingRangeError("weight is not finite");
    const auto f = static_cast<float>(v);
    if (static_cast<double>(f) != v || !std::isfinite(f))
        throw EncodingRangeError("weight is not representable in binary32");
    return std::bit_cast<std::uint32_t>(f);
}

inline void check_id(std::uint32_t id, const char* what) {
    if (id > kMaxNodeId)
        throw EncodingRangeError(std::string(what) + " exceeds 15 bits");
}

} // namespace detail

inline EncodedGene encode_gene(const NodeGene& n) {
    detail::check_id(n.id, "node id");
    const auto act = static_cast<std::uint8_t>(n.activation);
    const auto agg = static_cast<std::uint8_t>(n.aggregation);
    if (act >= kActivationCount || agg >= kAggregationCount)
        throw EncodingRangeError("undefined activation/aggregation code");
    std::uint64_t w = 0;
    w |= static_cast<std::uint64_t>(n.id) << 48;
    w |= static_cast<std::uint64_t>(detail::half_field(n.bias, "bias")) << 32;
    w |= static_cast<std::uint64_t>(detail::half_field(n.response, "response")) << 16;
    w |= static_cast<std::uint64_t>(act) << 12;
    w |= static_cast<std::uint64_t>(agg) << 8;
    return {w};
}

inline EncodedGene encode_gene(const ConnectionGene& c) {
    detail::check_id(c.src, "connection source");
    detail::check_id(c.dst, "connection destination");
    std::uint64_t w = 1ull << 63;
    if (c.enabled)
        w |= 1ull << 62;
    w |= static_cast<std::uint64_t>(c.src) << 47;
    w |= static_cast<std::uint64_t>(c.dst) << 32;
    w |= detail::single_field(c.weight);
    return {w};
}

inline EncodedGene encode_gene(const Gene& g) {
    return std::visit([](const auto& x) { return encode_gene(x); }, g);
}

inline NodeGene decode_node(EncodedGene e) {
    const std::uint64_t w = e.word;
    if (w >> 63)
        throw MalformedGeneError("expected a node gene, found a connection gene");
    if ((w & 0xFFu) != 0)
        throw MalformedGeneError("node gene reserved bits are not zero");
    const auto act = static_cast<std::uint8_t>((w >> 12) & 0xFu);
    const auto agg = static_cast<std::uint8_t>((w >> 8) & 0xFu);
    if (act >= kActivationCount)
        throw MalformedGeneError("undefined activation code " + std::to_string(act));
    if (agg >= kAggregationCount)
        throw MalformedGeneError("undefined aggregation code " + std::to_string(agg));
    NodeGene n;
    n.id = static_cast<NodeId>((w >> 48) & kMaxNodeId);
    n.bias = half_bits_to_float(static_cast<std::uint16_t>(w >> 32));
    n.response = half_bits_to_float(static_cast<std::uint16_t>(w >> 16));
    if (!std::isfinite(n.bias) || !std::isfinite(n.response))
        throw MalformedGeneError("non-finite node attribute");
    n.activation = static_cast<Activation>(act);
    n.aggregation = static_cast<Aggregation>(agg);
    return n;
}

inline ConnectionGene decode_connection(EncodedGene e) {
    const std::uint64_t w = e.word;
    if (!(w >> 63))
        throw MalformedGeneError("expected a connection gene, found a node gene");
    ConnectionGene c;
    c.enabled = ((w >> 62) & 1u) != 0;
    c.src = static_cast<NodeId>((w >> 47) & kMaxNodeId);
    c.dst = static_cast<NodeId>((w >> 32) & kMaxNodeId);
    const float weight = std::bit_cast<float>(static_cast<std::uint32_t>(w));
    if (!std::isfinite(weight))
        throw MalformedGeneError("non-finite connection weight");
    c.weight = weight;
    return c;
}

inline Gene decode_gene(EncodedGene e) {
    if (e.is_connection())
        return decode_connection(e);
    return decode_node(e);
}

// ---------------------------------------------------------------------------
// Canonical order

inline bool conn_key_less(const ConnectionGene& a, const ConnectionGene& b) {
    return std::pair{a.src, a.dst} < std::pair{b.src, b.dst};
}

inline bool is_canonical(const Genome& g) {
    for (std::size_t i = 1; i < g.nodes.size(); ++i)
        if (!(g.nodes[i - 1].id < g.nodes[i].id))
            return false;
    for (std::size_t i = 1; i < g.connections.size(); ++i)
        if (!conn_key_less(g.connections[i - 1], g.connections[i]))
            return false;
    return true;
}

/// Checks every structural invariant of a genome; throws InvalidGenomeError on the first violation.
inline void validate(const Genome& g) {
    if (!is_canonical(g))
        throw InvalidGenomeError("genome " + std::to_string(g.genome_id) + " is not in canonical order");
    const std::uint32_t io = std::uint32_t{g.num_inputs} + g.num_outputs;
    for (std::uint32_t id = 0; id < io; ++id)
        if (!g.find_node(static_cast<NodeId>(id)))
            throw InvalidGenomeError("genome " + std::to_string(g.genome_id) + " is missing I/O node " +
                                     std::to_string(id));
    for (const auto& c : g.connections)
        if (!g.find_node(c.src) || !g.find_node(c.dst))
            throw InvalidGenomeError("genome " + std::to_string(g.genome_id) + " has dangling connection " +
                                     std::to_string(c.src) + "->" + std::to_string(c.dst));
}

/// Sorts both clusters, drops duplicate keys (first occurrence wins) and dangling connections.
inline Genome canonicalize(Genome g) {
    std::stable_sort(g.nodes.begin(), g.nodes.end(),
                     [](const NodeGene& a, const NodeGene& b) { return a.id < b.id; });
    g.nodes.erase(std::unique(g.nodes.begin(), g.nodes.end(),
                              [](const NodeGene& a, const NodeGene& b) { return a.id == b.id; }),
                  g.nodes.end());

    std::stable_sort(g.connections.begin(), g.connections.end(), conn_key_less);
    g.connections.erase(std::unique(g.connections.begin(), g.connections.end(),
                                    [](const ConnectionGene& a, const ConnectionGene& b) {
                                        return a.src == b.src && a.dst == b.dst;
                                    }),
                        g.connections.end());
    std::erase_if(g.connections,
                  [&](const ConnectionGene& c) { return !g.find_node(c.src) || !g.find_node(c.dst); });

    validate(g);
    return g;
}

// ---------------------------------------------------------------------------
// Footprint

inline constexpr std::size_t kGenomeHeaderBytes = 32;
inline constexpr std::size_t kGeneBytes = 8;

inline std::size_t footprint_bytes(const Genome& g) {
    return kGenomeHeaderBytes + kGeneBytes * g.gene_count();
}

inline std::size_t footprint_bytes(const Population& pop) {
    std::size_t total = 0;
    for (const auto& g : pop.genomes)
        total += footprint_bytes(g);
    return total;
}

/// Input/output nodes fully connected with zero weights; the NEAT starting topology.
inline Genome initial_genome(GenomeId id, std::uint16_t num_inputs, std::uint16_t num_outputs,
                             Activation output_activation) {
    if (std::uint32_t{num_inputs} + num_outputs > kMaxNodeId)
        throw EncodingRangeError("too many input/output nodes");
    Genome g;
    g.genome_id = id;
    g.num_inputs = num_inputs;
    g.num_outputs = num_outputs;
    for (std::uint32_t i = 0; i < std::uint32_t{num_inputs} + num_outputs; ++i) {
        NodeGene n;
        n.id = static_cast<NodeId>(i);
        n.activation = i < num_inputs ? Activation::identity : output_activation;
        g.nodes.push_back(n);
    }
    for (std::uint32_t s = 0; s < num_inputs; ++s)
        for (std::uint32_t d = num_inputs; d < std::uint32_t{num_inputs} + num_outputs; ++d)
            g.connections.push_back({static_cast<NodeId>(s), static_cast<NodeId>(d), 0.0, true});
    return g;
}

} // namespace genesys
