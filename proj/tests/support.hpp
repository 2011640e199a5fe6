#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <stdexcept>

#include "genesys/adam.hpp"
#include "genesys/neat.hpp"
#include "genesys/xorwow.hpp"

namespace testing_support {

using namespace genesys;

/// Replays a fixed list of unit draws; throws when exhausted.
struct ScriptedDraws {
    std::deque<double> draws;
    std::size_t consumed = 0;

    ScriptedDraws() = default;
    ScriptedDraws(std::initializer_list<double> d) : draws(d) {}

    double next_unit() {
        if (draws.empty())
            throw std::runtime_error("scripted draws exhausted");
        const double u = draws.front();
        draws.pop_front();
        ++consumed;
        return u;
    }
};

/// Same constant forever.
struct ConstantDraws {
    double value = 0.5;
    double next_unit() { return value; }
};

inline ChildLanes<ConstantDraws> constant_lanes(double v) { return {{v}, {v}, {v}, {v}}; }

/// Random valid feed-forward genome: hidden ids above the I/O block, edges only
/// from lower to higher topological rank, weights/bias already quantized.
inline Genome random_genome(XorWowState& rng, GenomeId id, std::uint16_t ni, std::uint16_t no,
                            std::uint32_t max_hidden = 6, double edge_prob = 0.4, bool mixed_aggregation = false) {
    Genome g;
    g.genome_id = id;
    g.num_inputs = ni;
    g.num_outputs = no;
    const std::uint32_t hidden = rng.next_below(max_hidden + 1);
    std::vector<NodeId> ids;
    for (std::uint32_t i = 0; i < std::uint32_t{ni} + no; ++i)
        ids.push_back(static_cast<NodeId>(i));
    NodeId next = static_cast<NodeId>(ni + no);
    for (std::uint32_t h = 0; h < hidden; ++h) {
        next = static_cast<NodeId>(next + 1 + rng.next_below(3));
        ids.push_back(next);
    }
    for (NodeId n : ids) {
        NodeGene node;
        node.id = n;
        if (!g.is_input(n)) {
            node.bias = quantize_half(4.0 * rng.next_unit() - 2.0);
            node.response = quantize_half(0.5 + rng.next_unit());
            node.activation = static_cast<Activation>(rng.next_below(kActivationCount));
            node.aggregation = mixed_aggregation ? static_cast<Aggregation>(rng.next_below(kAggregationCount))
                                                 : Aggregation::sum;
        }
        g.nodes.push_back(node);
    }
    // rank: inputs < hidden (random order) < outputs
    std::vector<NodeId> order;
    for (NodeId i = 0; i < ni; ++i)
        order.push_back(i);
    std::vector<NodeId> hid(ids.begin() + ni + no, ids.end());
    for (std::size_t i = hid.size(); i > 1; --i)
        std::swap(hid[i - 1], hid[rng.next_below(static_cast<std::uint32_t>(i))]);
    order.insert(order.end(), hid.begin(), hid.end());
    for (NodeId o = ni; o < ni + no; ++o)
        order.push_back(o);
    for (std::size_t a = 0; a < order.size(); ++a)
        for (std::size_t b = a + 1; b < order.size(); ++b) {
            if (b < ni || g.is_output(order[a]))
                continue;
            if (rng.next_unit() < edge_prob)
                g.connections.push_back({order[a], order[b], quantize_single(4.0 * rng.next_unit() - 2.0),
                                         rng.next_unit() < 0.9});
        }
    std::sort(g.connections.begin(), g.connections.end(), conn_key_less);
    validate(g);
    return g;
}

inline Population random_population(XorWowState& rng, std::size_t n, std::uint16_t ni, std::uint16_t no) {
    Population pop;
    for (std::size_t i = 0; i < n; ++i) {
        pop.genomes.push_back(random_genome(rng, static_cast<GenomeId>(i), ni, no));
        pop.genomes.back().fitness = 10.0 * rng.next_unit();
    }
    return pop;
}

// Memoized recursive evaluation straight off the connection list; shares no
// code with levelize/pack.
inline std::vector<double> scalar_oracle(const Genome& g, const std::vector<double>& obs) {
    std::map<NodeId, double> memo;
    std::function<double(NodeId)> value = [&](NodeId id) -> double {
        if (id < g.num_inputs)
            return obs[id];
        if (auto it = memo.find(id); it != memo.end())
            return it->second;
        const NodeGene* n = g.find_node(id);
        std::vector<double> terms;
        for (const auto& c : g.connections)
            if (c.enabled && c.dst == id)
                terms.push_back(c.weight * value(c.src));
        double agg = 0.0;
        if (!terms.empty()) {
            switch (n->aggregation) {
            case Aggregation::sum: for (double t : terms) agg += t; break;
            case Aggregation::mean: for (double t : terms) agg += t; agg /= static_cast<double>(terms.size()); break;
            case Aggregation::product: agg = 1.0; for (double t : terms) agg *= t; break;
            case Aggregation::max: agg = -INFINITY; for (double t : terms) agg = std::max(agg, t); break;
            case Aggregation::min: agg = INFINITY; for (double t : terms) agg = std::min(agg, t); break;
            }
        }
        const double x = n->bias + n->response * agg;
        double out = x;
        switch (n->activation) {
        case Activation::identity: break;
        case Activation::sigmoid: out = 1.0 / (1.0 + std::exp(-x)); break;
        case Activation::tanh: out = std::tanh(x); break;
        case Activation::relu: out = std::max(0.0, x); break;
        }
        memo[id] = out;
        return out;
    };
    std::vector<double> outs;
    for (NodeId o = g.num_inputs; o < g.num_inputs + g.num_outputs; ++o)
        outs.push_back(value(o));
    return outs;
}

} // namespace testing_support
