#pragma once

// Population file:
//   "GENE" | u16 version (=1) | u16 genome count
//   per genome: 32-byte header
//     u32 genome_id | u16 num_inputs | u16 num_outputs | u32 node count | u32 connection count
//     | f64 fitness (NaN when absent) | 8 bytes zero padding
//   then node words, then connection words (u64 each).
// Every multi-byte field is little-endian.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "genesys/gene.hpp"

namespace genesys {

inline constexpr std::array<char, 4> kPopulationMagic{'G', 'E', 'N', 'E'};
inline constexpr std::uint16_t kPopulationVersion = 1;
inline constexpr std::size_t kFileHeaderBytes = 8;

namespace detail {

class ByteWriter {
public:
    explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

    template <typename T>
    void put(T value) {
        static_assert(std::is_unsigned_v<T>);
        for (std::size_t i = 0; i < sizeof(T); ++i)
            out_.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
    }
    void pad(std::size_t n) { out_.insert(out_.end(), n, 0); }

private:
    std::vector<std::uint8_t>& out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

    template <typename T>
    T get(const char* what) {
        static_assert(std::is_unsigned_v<T>);
        if (in_.size() - pos_ < sizeof(T))
            throw FormatError(std::string("truncated stream reading ") + what + " at offset " +
                              std::to_string(pos_));
        T value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            value |= static_cast<T>(static_cast<T>(in_[pos_ + i]) << (8 * i));
        pos_ += sizeof(T);
        return value;
    }
    void skip(std::size_t n, const char* what) {
        if (in_.size() - pos_ < n)
            throw FormatError(std::string("truncated stream reading ") + what + " at offset " +
                              std::to_string(pos_));
        pos_ += n;
    }
    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::vector<std::uint8_t> serialize_population(const Population& pop) {
    if (pop.genomes.size() > std::numeric_limits<std::uint16_t>::max())
        throw FormatError("population too large for a 16-bit genome count");
    std::vector<std::uint8_t> bytes;
    bytes.reserve(kFileHeaderBytes + footprint_bytes(pop));
    detail::ByteWriter out(bytes);
    for (char c : kPopulationMagic)
        out.put(static_cast<std::uint8_t>(c));
    out.put(kPopulationVersion);
    out.put(static_cast<std::uint16_t>(pop.genomes.size()));
    for (const auto& g : pop.genomes) {
        out.put(static_cast<std::uint32_t>(g.genome_id));
        out.put(g.num_inputs);
        out.put(g.num_outputs);
        out.put(static_cast<std::uint32_t>(g.nodes.size()));
        out.put(static_cast<std::uint32_t>(g.connections.size()));
        const double fitness = g.fitness.value_or(std::numeric_limits<double>::quiet_NaN());
        out.put(std::bit_cast<std::uint64_t>(fitness));
        out.pad(8);
        for (const auto& n : g.nodes)
            out.put(encode_gene(n).word);
        for (const auto& c : g.connections)
            out.put(encode_gene(c).word);
    }
    return bytes;
}

/// Parses a population; decode failures carry the byte offset of the offending word.
inline Population deserialize_population(std::span<const std::uint8_t> bytes) {
    detail::ByteReader in(bytes);
    for (char c : kPopulationMagic)
        if (in.get<std::uint8_t>("magic") != static_cast<std::uint8_t>(c))
            throw FormatError("bad magic: not a population file");
    const auto version = in.get<std::uint16_t>("version");
    if (version != kPopulationVersion)
        throw FormatError("unsupported population file version " + std::to_string(version));
    const auto count = in.get<std::uint16_t>("genome count");

    Population pop;
    pop.genomes.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Genome g;
        g.genome_id = in.get<std::uint32_t>("genome id");
        g.num_inputs = in.get<std::uint16_t>("num_inputs");
        g.num_outputs = in.get<std::uint16_t>("num_outputs");
        const auto node_count = in.get<std::uint32_t>("node count");
        const auto conn_count = in.get<std::uint32_t>("connection count");
        const double fitness = std::bit_cast<double>(in.get<std::uint64_t>("fitness"));
        if (!std::isnan(fitness))
            g.fitness = fitness;
        in.skip(8, "header padding");
        if (std::uint64_t{node_count} + conn_count > in.remaining() / kGeneBytes)
            throw FormatError("truncated stream: genome " + std::to_string(i) + " declares more genes than remain");

        auto read_word = [&](const char* what) {
            const std::size_t at = in.offset();
            EncodedGene e{in.get<std::uint64_t>(what)};
            return std::pair{e, at};
        };
        for (std::uint32_t k = 0; k < node_count; ++k) {
            auto [e, at] = read_word("node word");
            try {
                g.nodes.push_back(decode_node(e));
            } catch (const MalformedGeneError& err) {
                throw MalformedGeneError("malformed gene at byte offset " + std::to_string(at) + " (genome " +
                                         std::to_string(i) + ", node word " + std::to_string(k) + "): " + err.what());
            }
        }
        for (std::uint32_t k = 0; k < conn_count; ++k) {
            auto [e, at] = read_word("connection word");
            try {
                g.connections.push_back(decode_connection(e));
            } catch (const MalformedGeneError& err) {
                throw MalformedGeneError("malformed gene at byte offset " + std::to_string(at) + " (genome " +
                                         std::to_string(i) + ", connection word " + std::to_string(k) +
                                         "): " + err.what());
            }
        }
        validate(g);
        for (const auto& prev : pop.genomes)
            if (prev.genome_id == g.genome_id)
                throw InvalidGenomeError("duplicate genome id " + std::to_string(g.genome_id));
        pop.genomes.push_back(std::move(g));
    }
    if (in.remaining() != 0)
        throw FormatError("trailing bytes after last genome");
    return pop;
}

inline void write_population_file(const std::string& path, const Population& pop) {
    const auto bytes = serialize_population(pop);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Population read_population_file(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    return deserialize_population(bytes);
}

} // namespace genesys
