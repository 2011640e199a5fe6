// genesys: evolve / sweep / inspect front end.
//
//   genesys evolve --config xor.json --seed 7 --out runs/xor7
//   genesys sweep --config xor.json --axis pe_count --values 16,32,64 --out sweep.csv
//   genesys inspect runs/xor7/gen_0000.pop
//
// Exit status: 0 success (evolve: target reached), 2 generation budget
// exhausted, 1 any error.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "genesys/harness.hpp"

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');)
        if (!item.empty())
            out.push_back(item);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"GeneSys neuroevolution accelerator simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir, axis, values, genome_file, reproduction;
    std::uint64_t seed = 0;

    auto* evolve = app.add_subcommand("evolve", "run evolution until the target fitness or the generation budget");
    evolve->add_option("--config", config_path, "JSON config")->required();
    auto* seed_opt = evolve->add_option("--seed", seed, "overrides run.seed");
    evolve->add_option("--out", out_dir, "run directory")->required();
    evolve->add_option("--reproduction", reproduction, "reference | eve | both-with-compare");

    std::string sweep_out;
    std::uint64_t sweep_seed = 0;
    auto* sweep = app.add_subcommand("sweep", "repeat a fixed-seed run across one hardware/population axis");
    sweep->add_option("--config", config_path, "JSON config")->required();
    sweep->add_option("--axis", axis, "pe_count | noc_mode | population")->required();
    sweep->add_option("--values", values, "comma-separated axis values")->required();
    auto* sweep_seed_opt = sweep->add_option("--seed", sweep_seed, "overrides run.seed");
    sweep->add_option("--out", sweep_out, "combined CSV (default stdout)");

    auto* insp = app.add_subcommand("inspect", "decode and validate a population file");
    insp->add_option("genome-file", genome_file, "population file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*evolve) {
            genesys::RunConfig c = genesys::load_config(config_path);
            if (*seed_opt)
                c.seed = seed;
            if (!reproduction.empty())
                c.path = genesys::parse_reproduction_path(reproduction);
            const auto r = genesys::run_evolve(c, {out_dir});
            std::cout << c.env << " seed " << c.seed << ": " << r.records.size() << " generation(s), best fitness "
                      << genesys::format_real(r.best_fitness)
                      << (r.converged ? ", target reached\n" : ", budget exhausted\n");
            return r.converged ? 0 : 2;
        }
        if (*sweep) {
            genesys::RunConfig c = genesys::load_config(config_path);
            if (*sweep_seed_opt)
                c.seed = sweep_seed;
            const auto ax = genesys::parse_sweep_axis(axis);
            const auto csv = genesys::sweep_csv(ax, genesys::run_sweep(c, ax, split_list(values)));
            if (sweep_out.empty()) {
                std::cout << csv;
            } else {
                std::ofstream out(sweep_out, std::ios::binary);
                if (!out)
                    throw genesys::Error("cannot write " + sweep_out);
                out << csv;
            }
            return 0;
        }
        if (*insp) {
            std::cout << genesys::inspect(genome_file);
            return 0;
        }
    } catch (const genesys::CompareMismatchError& e) {
        if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            std::ofstream(std::filesystem::path(out_dir) / "compare_diff.txt") << e.what();
        }
        std::cerr << "error: " << e.what();
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
