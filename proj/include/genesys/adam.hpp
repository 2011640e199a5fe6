#pragma once

// Inference over irregular evolved networks: levelize the DAG, pack each
// frontier into a dense matrix-vector product, run it on a modeled systolic
// array.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "genesys/gene.hpp"
#include "genesys/memsys.hpp"

namespace genesys {

struct FanIn {
    NodeId src = 0;
    double weight = 0.0;

    friend bool operator==(const FanIn&, const FanIn&) = default;
};

struct LevelPlan {
    std::vector<std::vector<NodeId>> frontiers;
    std::vector<std::vector<FanIn>> fan_in;  // indexed like Genome::nodes; enabled connections only

    std::size_t depth() const { return frontiers.size(); }
};

namespace detail {

inline std::size_t node_position(const Genome& g, NodeId id) {
    const NodeGene* n = g.find_node(id);
    if (!n)
        throw InvalidGenomeError("connection references missing node " + std::to_string(id));
    return static_cast<std::size_t>(n - g.nodes.data());
}

} // namespace detail

/// Longest-path leveling over enabled connections. Inputs are not placed in
/// any frontier; a non-input node with no non-input sources lands in frontier 0.
inline LevelPlan levelize(const Genome& g) {
    const std::size_t n = g.nodes.size();
    LevelPlan plan;
    plan.fan_in.resize(n);
    std::vector<std::vector<std::size_t>> consumers(n);
    std::vector<std::size_t> pending(n, 0);
    for (const auto& c : g.connections) {
        if (!c.enabled || g.is_input(c.dst))
            continue;
        const std::size_t d = detail::node_position(g, c.dst);
        const std::size_t s = detail::node_position(g, c.src);
        plan.fan_in[d].push_back({c.src, c.weight});
        if (!g.is_input(c.src)) {
            consumers[s].push_back(d);
            ++pending[d];
        }
    }

    std::vector<std::size_t> level(n, 0);
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (!g.is_input(g.nodes[i].id) && pending[i] == 0)
            ready.push_back(i);
    std::size_t placed = 0;
    std::size_t non_inputs = 0;
    for (const auto& node : g.nodes)
        non_inputs += g.is_input(node.id) ? 0 : 1;

    while (!ready.empty()) {
        const std::size_t i = ready.back();
        ready.pop_back();
        ++placed;
        if (plan.frontiers.size() <= level[i])
            plan.frontiers.resize(level[i] + 1);
        plan.frontiers[level[i]].push_back(g.nodes[i].id);
        for (std::size_t d : consumers[i]) {
            level[d] = std::max(level[d], level[i] + 1);
            if (--pending[d] == 0)
                ready.push_back(d);
        }
    }
    if (placed != non_inputs)
        throw CyclicGenomeError("genome " + std::to_string(g.genome_id) + " has a cycle among enabled connections");
    for (auto& f : plan.frontiers)
        std::sort(f.begin(), f.end());
    return plan;
}

/// Dense operands of one frontier's sum-aggregation nodes.
struct PackedMvm {
    std::size_t m = 0;                 // rows: frontier nodes
    std::size_t k = 0;                 // columns: distinct sources
    std::vector<double> matrix;        // row-major m*k
    std::vector<double> vector;        // k source activations
    std::vector<NodeId> row_node;
    std::vector<NodeId> col_source;

    double at(std::size_t r, std::size_t c) const { return matrix[r * k + c]; }
};

struct MvmResult {
    std::vector<double> pre_activation;
    std::uint64_t cycles = 0;
    std::uint64_t mac_count = 0;
};

/// Declared tile-latency model: each rows x cols tile costs rows + cols cycles.
inline std::uint64_t systolic_cycles(std::size_t m, std::size_t k, std::uint32_t rows, std::uint32_t cols) {
    if (m == 0 || k == 0)
        return 0;
    const std::uint64_t row_tiles = (m + rows - 1) / rows;
    const std::uint64_t col_tiles = (k + cols - 1) / cols;
    return row_tiles * col_tiles * (std::uint64_t{rows} + cols);
}

inline MvmResult systolic_mvm(const PackedMvm& p, std::uint32_t rows, std::uint32_t cols) {
    if (p.matrix.size() != p.m * p.k || p.vector.size() != p.k)
        throw Error("systolic_mvm: dimension mismatch (" + std::to_string(p.m) + "x" + std::to_string(p.k) +
                    " matrix, " + std::to_string(p.vector.size()) + "-vector)");
    if (rows == 0 || cols == 0)
        throw ConfigError("systolic array dimensions must be >= 1");
    MvmResult r;
    r.pre_activation.assign(p.m, 0.0);
    for (std::size_t i = 0; i < p.m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < p.k; ++j)
            acc += p.matrix[i * p.k + j] * p.vector[j];
        r.pre_activation[i] = acc;
    }
    r.cycles = systolic_cycles(p.m, p.k, rows, cols);
    r.mac_count = static_cast<std::uint64_t>(p.m) * p.k;
    return r;
}

inline double activate(Activation a, double x) {
    switch (a) {
    case Activation::identity: return x;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
    }
    throw Error("unknown activation code " + std::to_string(static_cast<int>(a)));
}

/// Scalar aggregation of fan-in terms; an empty fan-in aggregates to 0.
inline double aggregate(Aggregation a, std::span<const double> terms) {
    if (terms.empty())
        return 0.0;
    switch (a) {
    case Aggregation::sum: {
        double s = 0.0;
        for (double t : terms)
            s += t;
        return s;
    }
    case Aggregation::product: {
        double s = 1.0;
        for (double t : terms)
            s *= t;
        return s;
    }
    case Aggregation::max: return *std::max_element(terms.begin(), terms.end());
    case Aggregation::min: return *std::min_element(terms.begin(), terms.end());
    case Aggregation::mean: {
        double s = 0.0;
        for (double t : terms)
            s += t;
        return s / static_cast<double>(terms.size());
    }
    }
    throw Error("unknown aggregation code " + std::to_string(static_cast<int>(a)));
}

/// out = act(bias + response * aggregated)
inline double apply_node(const NodeGene& node, double aggregated) {
    return activate(node.activation, node.bias + node.response * aggregated);
}

/// Packs the sum-aggregation nodes of a frontier. `activations` is indexed by node id.
inline PackedMvm pack_frontier(std::span<const NodeId> frontier, const Genome& g, const LevelPlan& plan,
                               std::span<const double> activations, std::span<const char> known) {
    PackedMvm p;
    for (NodeId id : frontier) {
        const NodeGene* n = g.find_node(id);
        if (!n)
            throw InvalidGenomeError("frontier references missing node " + std::to_string(id));
        if (n->aggregation != Aggregation::sum)
            continue;
        p.row_node.push_back(id);
        for (const auto& f : plan.fan_in[detail::node_position(g, id)])
            p.col_source.push_back(f.src);
    }
    std::sort(p.col_source.begin(), p.col_source.end());
    p.col_source.erase(std::unique(p.col_source.begin(), p.col_source.end()), p.col_source.end());
    p.m = p.row_node.size();
    p.k = p.col_source.size();
    p.matrix.assign(p.m * p.k, 0.0);
    p.vector.resize(p.k);
    for (std::size_t c = 0; c < p.k; ++c) {
        const NodeId s = p.col_source[c];
        if (s >= known.size() || !known[s])
            throw Error("pack_frontier: activation of source node " + std::to_string(s) + " not computed");
        p.vector[c] = activations[s];
    }
    for (std::size_t r = 0; r < p.m; ++r) {
        for (const auto& f : plan.fan_in[detail::node_position(g, p.row_node[r])]) {
            const auto c = static_cast<std::size_t>(
                std::lower_bound(p.col_source.begin(), p.col_source.end(), f.src) - p.col_source.begin());
            p.matrix[r * p.k + c] = f.weight;
        }
    }
    return p;
}

struct InferResult {
    std::vector<double> outputs;  // in output-id order
    std::uint64_t cycles = 0;
    std::uint64_t mac_count = 0;   // enabled fan-in edges of sum nodes
    std::uint64_t array_macs = 0;  // m*k over packed tiles, padding included
};

/// A genome lowered once into packed frontiers, reusable across observations.
class CompiledNetwork {
public:
    CompiledNetwork() = default;

    CompiledNetwork(const Genome& g, const HwConfig& hw) {
        const LevelPlan plan = levelize(g);
        num_inputs_ = g.num_inputs;
        num_outputs_ = g.num_outputs;
        NodeId max_id = 0;
        for (const auto& n : g.nodes)
            max_id = std::max(max_id, n.id);
        slots_ = std::size_t{max_id} + 1;

        std::vector<char> known(slots_, 0);
        std::vector<double> zeros(slots_, 0.0);
        for (std::size_t i = 0; i < num_inputs_; ++i)
            known[i] = 1;
        for (const auto& f : plan.frontiers) {
            Stage st;
            // values are irrelevant here; only the packing layout is kept
            st.packed = pack_frontier(f, g, plan, zeros, known);
            for (NodeId id : st.packed.row_node)
                st.packed_nodes.push_back(*g.find_node(id));
            for (NodeId id : f) {
                const NodeGene& n = *g.find_node(id);
                if (n.aggregation != Aggregation::sum)
                    st.scalar.push_back({n, plan.fan_in[detail::node_position(g, id)]});
                mac_count_ += n.aggregation == Aggregation::sum ? plan.fan_in[detail::node_position(g, id)].size() : 0;
            }
            for (NodeId id : f)
                known[id] = 1;
            cycles_ += systolic_cycles(st.packed.m, st.packed.k, hw.systolic_rows, hw.systolic_cols) +
                       hw.vectorize_cycles_per_node * f.size();
            array_macs_ += static_cast<std::uint64_t>(st.packed.m) * st.packed.k;
            stages_.push_back(std::move(st));
        }
        depth_ = plan.depth();
    }

    /// Output activations for one observation; `values` is caller-owned scratch.
    void run(std::span<const double> observation, std::vector<double>& values, std::span<double> outputs) const {
        if (observation.size() != num_inputs_)
            throw Error("observation length " + std::to_string(observation.size()) + " != num_inputs " +
                        std::to_string(num_inputs_));
        values.assign(slots_, 0.0);
        std::copy(observation.begin(), observation.end(), values.begin());
        std::vector<double> terms;
        for (const auto& st : stages_) {
            const PackedMvm& p = st.packed;
            for (std::size_t r = 0; r < p.m; ++r) {
                double acc = 0.0;
                const double* row = p.matrix.data() + r * p.k;
                for (std::size_t c = 0; c < p.k; ++c)
                    acc += row[c] * values[p.col_source[c]];
                values[p.row_node[r]] = apply_node(st.packed_nodes[r], acc);
            }
            for (const auto& [node, fan] : st.scalar) {
                terms.clear();
                for (const auto& f : fan)
                    terms.push_back(f.weight * values[f.src]);
                values[node.id] = apply_node(node, aggregate(node.aggregation, terms));
            }
        }
        for (std::size_t o = 0; o < num_outputs_; ++o)
            outputs[o] = values[num_inputs_ + o];
    }

    std::uint64_t cycles_per_inference() const { return cycles_; }
    std::uint64_t macs_per_inference() const { return mac_count_; }
    std::uint64_t array_macs_per_inference() const { return array_macs_; }
    std::size_t depth() const { return depth_; }
    std::size_t num_inputs() const { return num_inputs_; }
    std::size_t num_outputs() const { return num_outputs_; }

private:
    struct ScalarNode {
        NodeGene node;
        std::vector<FanIn> fan_in;
    };
    struct Stage {
        PackedMvm packed;  // matrix holds weights; vector unused
        std::vector<NodeGene> packed_nodes;
        std::vector<ScalarNode> scalar;
    };

    std::vector<Stage> stages_;
    std::size_t slots_ = 0;
    std::size_t num_inputs_ = 0;
    std::size_t num_outputs_ = 0;
    std::size_t depth_ = 0;
    std::uint64_t cycles_ = 0;
    std::uint64_t mac_count_ = 0;
    std::uint64_t array_macs_ = 0;
};

/// Frontier by frontier: pack, multiply on the array, activate.
inline InferResult infer(const Genome& g, std::span<const double> observation, const HwConfig& hw = {}) {
    if (observation.size() != g.num_inputs)
        throw Error("observation length " + std::to_string(observation.size()) + " != num_inputs " +
                    std::to_string(g.num_inputs));
    const LevelPlan plan = levelize(g);
    NodeId max_id = 0;
    for (const auto& n : g.nodes)
        max_id = std::max(max_id, n.id);
    std::vector<double> values(std::size_t{max_id} + 1, 0.0);
    std::vector<char> known(values.size(), 0);
    for (std::size_t i = 0; i < g.num_inputs; ++i) {
        values[i] = observation[i];
        known[i] = 1;
    }

    InferResult r;
    std::vector<double> terms;
    for (const auto& f : plan.frontiers) {
        const PackedMvm p = pack_frontier(f, g, plan, values, known);
        const MvmResult mvm = systolic_mvm(p, hw.systolic_rows, hw.systolic_cols);
        r.cycles += mvm.cycles + hw.vectorize_cycles_per_node * f.size();
        r.array_macs += mvm.mac_count;
        for (std::size_t i = 0; i < p.m; ++i) {
            const NodeGene& n = *g.find_node(p.row_node[i]);
            values[n.id] = apply_node(n, mvm.pre_activation[i]);
            r.mac_count += plan.fan_in[detail::node_position(g, n.id)].size();
        }
        for (NodeId id : f) {
            const NodeGene& n = *g.find_node(id);
            if (n.aggregation == Aggregation::sum)
                continue;
            terms.clear();
            for (const auto& fi : plan.fan_in[detail::node_position(g, id)])
                terms.push_back(fi.weight * values[fi.src]);
            values[id] = apply_node(n, aggregate(n.aggregation, terms));
        }
        for (NodeId id : f)
            known[id] = 1;
    }
    r.outputs.resize(g.num_outputs);
    for (std::size_t o = 0; o < g.num_outputs; ++o)
        r.outputs[o] = values[g.num_inputs + o];
    return r;
}

} // namespace genesys
