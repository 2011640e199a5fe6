#pragma once

// Experiment driver: evaluate -> select -> reproduce until the target fitness
// or the generation budget is reached, emitting one GenRecord per generation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "genesys/adam.hpp"
#include "genesys/environments.hpp"
#include "genesys/eve.hpp"
#include "genesys/memsys.hpp"
#include "genesys/neat.hpp"
#include "genesys/population_io.hpp"

namespace genesys {

enum class ReproductionPath : std::uint8_t { reference, eve, compare };

inline const char* to_string(ReproductionPath p) {
    switch (p) {
    case ReproductionPath::reference: return "reference";
    case ReproductionPath::eve: return "eve";
    case ReproductionPath::compare: return "both-with-compare";
    }
    return "?";
}

inline ReproductionPath parse_reproduction_path(const std::string& s) {
    if (s == "reference")
        return ReproductionPath::reference;
    if (s == "eve")
        return ReproductionPath::eve;
    if (s == "both-with-compare" || s == "compare")
        return ReproductionPath::compare;
    throw ConfigError("unknown reproduction path '" + s + "' (expected reference, eve or both-with-compare)");
}

inline Activation parse_activation(const std::string& s) {
    for (std::uint8_t c = 0; c < kActivationCount; ++c)
        if (s == to_string(static_cast<Activation>(c)))
            return static_cast<Activation>(c);
    throw ConfigError("unknown activation '" + s + "'");
}

struct RunConfig {
    std::string env = "xor";
    std::size_t episodes = 1;
    std::optional<double> target_fitness;  // overrides the environment's target
    std::size_t population_size = 150;
    std::uint32_t max_generations = 300;
    std::uint64_t seed = 1;
    ReproductionPath path = ReproductionPath::eve;
    bool write_populations = true;
    NeatParams neat;
    HwConfig hw;

    double target() const { return target_fitness.value_or(env_spec(env).target_fitness); }

    void validate() const {
        (void)env_spec(env);
        if (population_size < 2)
            throw ConfigError("population_size must be >= 2");
        if (population_size > 65535)
            throw ConfigError("population_size must fit a 16-bit genome count");
        if (max_generations < 1)
            throw ConfigError("max_generations must be >= 1");
        if (episodes < 1)
            throw ConfigError("episodes must be >= 1");
        neat.validate();
        hw.validate();
    }
};

namespace detail {

using nlohmann::json;

template <typename T>
void read_field(const json& section, const char* key, T& out) {
    if (auto it = section.find(key); it != section.end())
        out = it->get<T>();
}

inline void reject_unknown(const json& section, const char* name, std::initializer_list<const char*> known) {
    if (!section.is_object())
        throw ConfigError(std::string("config section '") + name + "' must be an object");
    for (const auto& [key, value] : section.items()) {
        bool ok = false;
        for (const char* k : known)
            ok = ok || key == k;
        if (!ok)
            throw ConfigError(std::string("unknown key '") + key + "' in config section '" + name + "'");
    }
}

} // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    using detail::read_field;
    using detail::reject_unknown;
    RunConfig c;
    try {
        reject_unknown(j, "<root>", {"neat", "hw", "env", "run"});
        if (auto it = j.find("neat"); it != j.end()) {
            const auto& s = *it;
            reject_unknown(s, "neat",
                           {"crossover_bias", "perturb_rate", "perturb_power", "replace_rate", "add_node_prob",
                            "add_conn_prob", "delete_node_prob", "delete_conn_prob", "max_node_deletions",
                            "survival_fraction", "compat_unmatched", "compat_weight", "compat_threshold",
                            "species_stagnation", "elitism", "default_activation", "value_limit"});
            auto& n = c.neat;
            read_field(s, "crossover_bias", n.crossover_bias);
            read_field(s, "perturb_rate", n.perturb_rate);
            read_field(s, "perturb_power", n.perturb_power);
            read_field(s, "replace_rate", n.replace_rate);
            read_field(s, "add_node_prob", n.add_node_prob);
            read_field(s, "add_conn_prob", n.add_conn_prob);
            read_field(s, "delete_node_prob", n.delete_node_prob);
            read_field(s, "delete_conn_prob", n.delete_conn_prob);
            read_field(s, "max_node_deletions", n.max_node_deletions);
            read_field(s, "survival_fraction", n.survival_fraction);
            read_field(s, "compat_unmatched", n.compat_unmatched);
            read_field(s, "compat_weight", n.compat_weight);
            read_field(s, "compat_threshold", n.compat_threshold);
            read_field(s, "species_stagnation", n.species_stagnation);
            read_field(s, "elitism", n.elitism);
            read_field(s, "value_limit", n.value_limit);
            if (auto a = s.find("default_activation"); a != s.end())
                n.default_activation = parse_activation(a->get<std::string>());
        }
        if (auto it = j.find("hw"); it != j.end()) {
            const auto& s = *it;
            reject_unknown(s, "hw",
                           {"num_eve_pes", "systolic_rows", "systolic_cols", "sram_bytes", "sram_banks", "noc_mode",
                            "energy_table", "clock_hz", "vectorize_cycles_per_node"});
            auto& h = c.hw;
            read_field(s, "num_eve_pes", h.num_eve_pes);
            read_field(s, "systolic_rows", h.systolic_rows);
            read_field(s, "systolic_cols", h.systolic_cols);
            read_field(s, "sram_bytes", h.sram_bytes);
            read_field(s, "sram_banks", h.sram_banks);
            read_field(s, "clock_hz", h.clock_hz);
            read_field(s, "vectorize_cycles_per_node", h.vectorize_cycles_per_node);
            if (auto m = s.find("noc_mode"); m != s.end())
                h.noc_mode = parse_noc_mode(m->get<std::string>());
            if (auto e = s.find("energy_table"); e != s.end()) {
                reject_unknown(*e, "hw.energy_table",
                               {"sram_read_word", "sram_write_word", "noc_hop", "pe_gene_op", "mac_op"});
                read_field(*e, "sram_read_word", h.energy_table.sram_read_word);
                read_field(*e, "sram_write_word", h.energy_table.sram_write_word);
                read_field(*e, "noc_hop", h.energy_table.noc_hop);
                read_field(*e, "pe_gene_op", h.energy_table.pe_gene_op);
                read_field(*e, "mac_op", h.energy_table.mac_op);
            }
        }
        if (auto it = j.find("env"); it != j.end()) {
            const auto& s = *it;
            reject_unknown(s, "env", {"name", "episodes", "target_fitness"});
            read_field(s, "name", c.env);
            read_field(s, "episodes", c.episodes);
            if (auto t = s.find("target_fitness"); t != s.end() && !t->is_null())
                c.target_fitness = t->get<double>();
        }
        if (auto it = j.find("run"); it != j.end()) {
            const auto& s = *it;
            reject_unknown(s, "run",
                           {"population_size", "max_generations", "seed", "reproduction", "write_populations"});
            read_field(s, "population_size", c.population_size);
            read_field(s, "max_generations", c.max_generations);
            read_field(s, "seed", c.seed);
            read_field(s, "write_populations", c.write_populations);
            if (auto r = s.find("reproduction"); r != s.end())
                c.path = parse_reproduction_path(r->get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    c.validate();
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Records

struct GenRecord {
    std::uint32_t generation = 0;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
    std::size_t species_count = 0;
    std::size_t total_genes = 0;
    std::uint64_t crossovers = 0;
    std::uint64_t mutations_perturb = 0;
    std::uint64_t mutations_delete_node = 0;
    std::uint64_t mutations_delete_conn = 0;
    std::uint64_t mutations_add_node = 0;
    std::uint64_t mutations_add_conn = 0;
    std::size_t footprint_bytes = 0;
    std::int64_t sram_reads_p2p = 0;
    std::int64_t sram_reads_mcast = 0;
    std::int64_t dram_reads = 0;
    std::int64_t eve_cycles = 0;
    std::uint64_t adam_cycles = 0;
    std::uint64_t mac_count = 0;
    double energy_total = 0.0;
    std::uint32_t max_parent_reuse = 0;
};

inline constexpr const char* kGenRecordHeader =
    "generation,best_fitness,mean_fitness,species_count,total_genes,crossovers,mutations_perturb,"
    "mutations_delete_node,mutations_delete_conn,mutations_add_node,mutations_add_conn,footprint_bytes,"
    "sram_reads_p2p,sram_reads_mcast,dram_reads,eve_cycles,adam_cycles,mac_count,energy_total,max_parent_reuse";

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string to_csv_row(const GenRecord& r) {
    std::ostringstream o;
    o << r.generation << ',' << format_real(r.best_fitness) << ',' << format_real(r.mean_fitness) << ','
      << r.species_count << ',' << r.total_genes << ',' << r.crossovers << ',' << r.mutations_perturb << ','
      << r.mutations_delete_node << ',' << r.mutations_delete_conn << ',' << r.mutations_add_node << ','
      << r.mutations_add_conn << ',' << r.footprint_bytes << ',' << r.sram_reads_p2p << ',' << r.sram_reads_mcast
      << ',' << r.dram_reads << ',' << r.eve_cycles << ',' << r.adam_cycles << ',' << r.mac_count << ','
      << format_real(r.energy_total) << ',' << r.max_parent_reuse;
    return o.str();
}

inline std::string records_csv(const std::vector<GenRecord>& records) {
    std::string out = std::string(kGenRecordHeader) + "\n";
    for (const auto& r : records)
        out += to_csv_row(r) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Runs

struct RunResult {
    std::vector<GenRecord> records;
    bool converged = false;
    std::optional<std::uint32_t> convergence_generation;
    double best_fitness = 0.0;
    Population final_population;
};

inline Population initial_population(const RunConfig& c) {
    const EnvSpec spec = env_spec(c.env);
    Population pop;
    for (std::size_t i = 0; i < c.population_size; ++i)
        pop.genomes.push_back(initial_genome(static_cast<GenomeId>(i), static_cast<std::uint16_t>(spec.observation_size),
                                             static_cast<std::uint16_t>(spec.action_size), c.neat.default_activation));
    return pop;
}

/// Human-readable gene-by-gene diff of two child lists.
inline std::string diff_children(const std::vector<Genome>& eve, const std::vector<Genome>& ref) {
    std::ostringstream o;
    if (eve.size() != ref.size())
        o << "child count differs: eve " << eve.size() << " vs reference " << ref.size() << "\n";
    for (std::size_t i = 0; i < std::min(eve.size(), ref.size()); ++i) {
        if (eve[i] == ref[i])
            continue;
        const Genome& a = eve[i];
        const Genome& b = ref[i];
        o << "child " << a.genome_id << " differs (eve " << a.gene_count() << " genes, reference " << b.gene_count()
          << " genes)\n";
        std::vector<EncodedGene> wa, wb;
        for (const auto& n : a.nodes) wa.push_back(encode_gene(n));
        for (const auto& c : a.connections) wa.push_back(encode_gene(c));
        for (const auto& n : b.nodes) wb.push_back(encode_gene(n));
        for (const auto& c : b.connections) wb.push_back(encode_gene(c));
        for (std::size_t k = 0; k < std::max(wa.size(), wb.size()); ++k) {
            const auto x = k < wa.size() ? wa[k].word : 0;
            const auto y = k < wb.size() ? wb[k].word : 0;
            if (x != y) {
                char line[96];
                std::snprintf(line, sizeof line, "  word %zu: eve %016llx reference %016llx\n", k,
                              static_cast<unsigned long long>(x), static_cast<unsigned long long>(y));
                o << line;
            }
        }
    }
    return o.str();
}

struct RunOptions {
    std::string out_dir;  // empty: nothing written
};

inline RunResult run_evolve(const RunConfig& config, const RunOptions& opts = {}) {
    config.validate();
    const double target = config.target();
    auto env = make_environment(config.env);

    if (!opts.out_dir.empty())
        std::filesystem::create_directories(opts.out_dir);

    RunResult result;
    Population pop = initial_population(config);
    EvolutionState state;

    for (std::uint32_t gen = 0; gen < config.max_generations; ++gen) {
        pop.generation_index = gen;
        GenRecord rec;
        rec.generation = gen;

        // inference for every genome; evaluation order does not affect results
        const std::uint64_t eval_seed = derive_seed(config.seed, 2 * std::uint64_t{gen});
        double sum = 0.0;
        double best = -std::numeric_limits<double>::infinity();
        for (auto& g : pop.genomes) {
            const FitnessResult f = evaluate_fitness(g, *env, config.episodes, eval_seed, config.hw);
            g.fitness = f.fitness;
            sum += f.fitness;
            best = std::max(best, f.fitness);
            rec.adam_cycles += f.adam_cycles;
            rec.mac_count += f.mac_count;
        }
        rec.best_fitness = best;
        rec.mean_fitness = sum / static_cast<double>(pop.genomes.size());
        rec.total_genes = pop.total_genes();
        rec.footprint_bytes = footprint_bytes(pop);
        result.best_fitness = gen == 0 ? best : std::max(result.best_fitness, best);

        if (!opts.out_dir.empty() && config.write_populations) {
            char name[32];
            std::snprintf(name, sizeof name, "gen_%04u.pop", gen);
            write_population_file((std::filesystem::path(opts.out_dir) / name).string(), pop);
        }

        const bool converged = best >= target;
        const bool last = gen + 1 == config.max_generations;
        if (converged || last) {
            rec.species_count = speciate(pop, state.partition, config.neat).species.size();
            std::int64_t adam = static_cast<std::int64_t>(rec.mac_count);
            rec.energy_total = account_energy({}, {}, adam, config.hw).total;
            result.records.push_back(rec);
            if (converged) {
                result.converged = true;
                result.convergence_generation = gen;
            }
            break;
        }

        const std::uint64_t gen_seed = derive_seed(config.seed, 2 * std::uint64_t{gen} + 1);
        CycleStats cycles;
        PeSchedule schedule;
        std::vector<Genome> eve_children;
        const Reproducer reproducer = [&](const Population& parents, const MatingPlan& plan, std::uint64_t s) {
            if (config.path == ReproductionPath::reference) {
                schedule = allocate_pes(plan, config.hw.num_eve_pes);
                return reproduce_plan_reference(parents, plan, config.neat, s);
            }
            EvolutionPassResult pass = run_evolution_pass(parents, plan, config.hw.num_eve_pes, config.neat, s);
            cycles = pass.cycles;
            schedule = std::move(pass.schedule);
            if (config.path == ReproductionPath::compare) {
                ReproductionOutput ref = reproduce_plan_reference(parents, plan, config.neat, s);
                if (ref.children != pass.output.children)
                    throw CompareMismatchError("generation " + std::to_string(gen) +
                                               ": EvE and reference children differ\n" +
                                               diff_children(pass.output.children, ref.children));
            }
            return std::move(pass.output);
        };

        MatingPlan plan;
        auto [next, stats] = step_generation(pop, state, config.neat, gen_seed, reproducer, &plan);

        std::vector<Genome> children(next.genomes.begin() + static_cast<std::ptrdiff_t>(plan.elites.size()),
                                     next.genomes.end());
        const MemStats p2p = plan_fetch(schedule, plan, pop, children, NocMode::p2p, config.hw);
        const MemStats mcast = plan_fetch(schedule, plan, pop, children, NocMode::multicast, config.hw);
        const MemStats& active = config.hw.noc_mode == NocMode::p2p ? p2p : mcast;

        rec.species_count = stats.species_count;
        rec.crossovers = stats.ops.crossovers;
        rec.mutations_perturb = stats.ops.perturbations;
        rec.mutations_delete_node = stats.ops.node_deletions;
        rec.mutations_delete_conn = stats.ops.conn_deletions;
        rec.mutations_add_node = stats.ops.nodes_added;
        rec.mutations_add_conn = stats.ops.conns_added;
        rec.sram_reads_p2p = p2p.sram_reads;
        rec.sram_reads_mcast = mcast.sram_reads;
        rec.dram_reads = active.dram_reads;
        rec.eve_cycles = cycles.eve_cycles;
        rec.energy_total = account_energy(cycles, active, static_cast<std::int64_t>(rec.mac_count), config.hw).total;
        rec.max_parent_reuse = stats.max_parent_reuse;
        result.records.push_back(rec);

        pop = std::move(next);
    }
    result.final_population = pop;

    if (!opts.out_dir.empty()) {
        const std::filesystem::path dir(opts.out_dir);
        std::ofstream(dir / "stats.csv", std::ios::binary) << records_csv(result.records);
        nlohmann::ordered_json summary;
        summary["env"] = config.env;
        summary["seed"] = config.seed;
        summary["reproduction"] = to_string(config.path);
        summary["noc_mode"] = to_string(config.hw.noc_mode);
        summary["num_eve_pes"] = config.hw.num_eve_pes;
        summary["population_size"] = config.population_size;
        summary["target_fitness"] = target;
        summary["converged"] = result.converged;
        summary["generations"] = result.records.size();
        summary["convergence_generation"] =
            result.convergence_generation ? nlohmann::ordered_json(*result.convergence_generation) : nullptr;
        summary["best_fitness"] = result.best_fitness;
        std::ofstream(dir / "summary.json", std::ios::binary) << summary.dump(2) << "\n";
    }
    return result;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepAxis : std::uint8_t { pe_count, noc_mode, population };

inline SweepAxis parse_sweep_axis(const std::string& s) {
    if (s == "pe_count")
        return SweepAxis::pe_count;
    if (s == "noc_mode")
        return SweepAxis::noc_mode;
    if (s == "population")
        return SweepAxis::population;
    throw ConfigError("unknown sweep axis '" + s + "' (expected pe_count, noc_mode or population)");
}

inline const char* to_string(SweepAxis a) {
    switch (a) {
    case SweepAxis::pe_count: return "pe_count";
    case SweepAxis::noc_mode: return "noc_mode";
    case SweepAxis::population: return "population";
    }
    return "?";
}

struct SweepPoint {
    std::string value;
    RunResult result;
};

inline RunConfig apply_sweep_value(RunConfig c, SweepAxis axis, const std::string& value) {
    try {
        switch (axis) {
        case SweepAxis::pe_count: c.hw.num_eve_pes = static_cast<std::uint32_t>(std::stoul(value)); break;
        case SweepAxis::noc_mode: c.hw.noc_mode = parse_noc_mode(value); break;
        case SweepAxis::population: c.population_size = std::stoul(value); break;
        }
    } catch (const std::logic_error&) {
        throw ConfigError("bad sweep value '" + value + "' for axis " + to_string(axis));
    }
    c.validate();
    return c;
}

/// Repeats one fixed-seed run per axis value.
inline std::vector<SweepPoint> run_sweep(const RunConfig& config, SweepAxis axis, const std::vector<std::string>& values) {
    if (values.empty())
        throw ConfigError("sweep needs at least one value");
    std::vector<SweepPoint> points;
    for (const auto& v : values)
        points.push_back({v, run_evolve(apply_sweep_value(config, axis, v))});
    return points;
}

inline std::string sweep_csv(SweepAxis axis, const std::vector<SweepPoint>& points) {
    std::string out = std::string("sweep_axis,sweep_value,") + kGenRecordHeader + "\n";
    for (const auto& p : points)
        for (const auto& r : p.result.records)
            out += std::string(to_string(axis)) + "," + p.value + "," + to_csv_row(r) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Inspection

inline bool is_initial_topology(const Genome& g) {
    if (g.nodes.size() != std::size_t{g.num_inputs} + g.num_outputs)
        return false;
    if (g.connections.size() != std::size_t{g.num_inputs} * g.num_outputs)
        return false;
    for (const auto& c : g.connections)
        if (!g.is_input(c.src) || !g.is_output(c.dst) || c.weight != 0.0 || !c.enabled)
            return false;
    return true;
}

/// Decodes a population file and reports genes, invariants and levelization depth.
inline std::string inspect(const std::string& path) {
    const Population pop = read_population_file(path);
    std::ostringstream o;
    o << "population file " << path << ": " << pop.genomes.size() << " genome(s), " << pop.total_genes()
      << " genes, footprint " << footprint_bytes(pop) << " bytes\n";
    for (const auto& g : pop.genomes) {
        std::size_t enabled = 0;
        for (const auto& c : g.connections)
            enabled += c.enabled;
        o << "genome " << g.genome_id << ": inputs " << g.num_inputs << ", outputs " << g.num_outputs << ", nodes "
          << g.nodes.size() << ", connections " << g.connections.size() << " (" << enabled << " enabled)";
        if (g.fitness)
            o << ", fitness " << format_real(*g.fitness);
        try {
            o << ", depth " << levelize(g).depth();
        } catch (const CyclicGenomeError&) {
            o << ", depth n/a (cyclic)";
        }
        o << ", invariants ok";
        if (is_initial_topology(g))
            o << ", initial topology (inputs fully connected to outputs, zero weights)";
        o << "\n";
        for (const auto& n : g.nodes) {
            char line[160];
            std::snprintf(line, sizeof line, "  %016llx node %u bias %g response %g %s %s\n",
                          static_cast<unsigned long long>(encode_gene(n).word), n.id, n.bias, n.response,
                          to_string(n.activation), to_string(n.aggregation));
            o << line;
        }
        for (const auto& c : g.connections) {
            char line[160];
            std::snprintf(line, sizeof line, "  %016llx conn %u->%u weight %.9g %s\n",
                          static_cast<unsigned long long>(encode_gene(c).word), c.src, c.dst, c.weight,
                          c.enabled ? "enabled" : "disabled");
            o << line;
        }
    }
    return o.str();
}

} // namespace genesys
