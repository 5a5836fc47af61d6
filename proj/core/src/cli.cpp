#include "proxyforge/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "proxyforge/bench.hpp"
#include "proxyforge/search.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace proxyforge::cli {

namespace {

constexpr int kOk = 0;
constexpr int kUsageError = 1;
constexpr int kDataError = 2;

SearchConfig load_search_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("config JSON parse failure: " + std::string(e.what()));
    }
    SearchConfig config;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "population_size") {
                config.population_size = value.get<std::size_t>();
            } else if (key == "generations") {
                config.generations = value.get<std::size_t>();
            } else if (key == "crossover_rate") {
                config.crossover_rate = value.get<double>();
            } else if (key == "mutation_rate") {
                config.mutation_rate = value.get<double>();
            } else if (key == "selection_ratio") {
                config.selection_ratio = value.get<double>();
            } else if (key == "fitness_sample_size") {
                config.fitness_sample_size = value.get<std::size_t>();
            } else if (key == "unary_depth") {
                config.unary_depth = value.get<std::size_t>();
            } else if (key == "seed") {
                config.seed = value.get<std::uint64_t>();
            } else if (key == "rps_enabled") {
                config.rps_enabled = value.get<bool>();
            } else if (key == "max_regen_attempts") {
                config.max_regen_attempts = value.get<std::size_t>();
            } else {
                throw std::invalid_argument("unknown config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("config value has the wrong type: " + std::string(e.what()));
    }
    return config;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << text;
    if (!out) throw DataError("write failed: " + path);
}

int run_search_command(const std::string& bench_path, const std::string& config_path,
                       const std::string& out_path, bool random) {
    SearchConfig config;
    if (!config_path.empty()) config = load_search_config(config_path);
    validate(config);
    const BenchmarkFile bench = load_benchmark(bench_path);
    if (bench.entries.empty()) throw DataError("benchmark has no entries: " + bench_path);
    if (config.fitness_sample_size > bench.entries.size()) {
        std::cerr << "warning: fitness sample size " << config.fitness_sample_size
                  << " clamped to benchmark size " << bench.entries.size() << "\n";
    }
    const FitnessContext ctx(bench);
    const SearchReport report = random ? random_search(config, ctx) : run_search(config, ctx);
    write_text(out_path, to_json(report) + "\n");
    std::cout << "best " << report.best_expression << " fitness " << report.best_fitness << "\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"zero-cost proxy discovery over toy transformers"};
    app.require_subcommand(1);

    // bench build
    auto* bench_cmd = app.add_subcommand("bench", "benchmark files");
    bench_cmd->require_subcommand(1);
    auto* bench_build = bench_cmd->add_subcommand("build", "train the toy benchmark");
    std::size_t n_archs = 108;
    std::size_t steps = 300;
    std::uint64_t seed = 42;
    std::string out_path;
    bench_build->add_option("--n", n_archs, "number of architectures (<= full grid)");
    bench_build->add_option("--steps", steps, "SGD steps per architecture");
    bench_build->add_option("--seed", seed, "master seed");
    bench_build->add_option("--out", out_path, "output benchmark JSON")->required();

    // search run / search random
    auto* search_cmd = app.add_subcommand("search", "proxy search");
    search_cmd->require_subcommand(1);
    std::string bench_path, config_path, search_out;
    auto add_search_options = [&](CLI::App* cmd) {
        cmd->add_option("--bench", bench_path, "benchmark JSON")->required();
        cmd->add_option("--config", config_path, "search config JSON (flat object)");
        cmd->add_option("--out", search_out, "output report JSON")->required();
    };
    auto* search_run = search_cmd->add_subcommand("run", "genetic-programming search");
    add_search_options(search_run);
    auto* search_random = search_cmd->add_subcommand("random", "random-search baseline");
    add_search_options(search_random);

    // proxy eval
    auto* proxy_cmd = app.add_subcommand("proxy", "proxy scoring");
    proxy_cmd->require_subcommand(1);
    auto* proxy_eval = proxy_cmd->add_subcommand("eval", "score one proxy over a benchmark");
    std::string proxy_target, proxy_bench, proxy_out;
    proxy_eval->add_option("--proxy", proxy_target, "proxy id or expression string")->required();
    proxy_eval->add_option("--bench", proxy_bench, "benchmark JSON")->required();
    proxy_eval->add_option("--out", proxy_out, "output eval report JSON")->required();

    // report
    auto* report_cmd = app.add_subcommand("report", "correlation table from eval reports");
    std::vector<std::string> report_inputs;
    std::string csv_path;
    report_cmd->add_option("--in", report_inputs, "eval report JSON paths")->required();
    report_cmd->add_option("--csv", csv_path, "output CSV path")->required();

    std::vector<const char*> argv_ptrs;
    argv_ptrs.reserve(args.size());
    for (const std::string& a : args) argv_ptrs.push_back(a.c_str());
    try {
        if (argv_ptrs.empty()) throw CLI::CallForHelp();
        app.parse(static_cast<int>(argv_ptrs.size()), argv_ptrs.data());
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    }

    try {
        if (bench_build->parsed()) {
            const BenchmarkFile bench = build_benchmark(n_archs, steps, seed);
            save_benchmark(bench, out_path);
            std::size_t flagged = 0;
            for (const BenchEntry& e : bench.entries) flagged += e.flagged ? 1 : 0;
            std::cout << "wrote " << bench.entries.size() << " entries (" << flagged
                      << " flagged) to " << out_path << "\n";
            return kOk;
        }
        if (search_run->parsed()) {
            return run_search_command(bench_path, config_path, search_out, /*random=*/false);
        }
        if (search_random->parsed()) {
            return run_search_command(bench_path, config_path, search_out, /*random=*/true);
        }
        if (proxy_eval->parsed()) {
            const BenchmarkFile bench = load_benchmark(proxy_bench);
            const EvalReport report = eval_proxy(proxy_target, bench);
            save_eval_report(report, proxy_out);
            std::cout << "wrote eval report for '" << proxy_target << "' to " << proxy_out << "\n";
            return kOk;
        }
        if (report_cmd->parsed()) {
            std::vector<EvalReport> reports;
            for (const std::string& path : report_inputs) {
                reports.push_back(load_eval_report(path));
            }
            write_text(csv_path, report_csv(reports));
            std::cout << "wrote " << reports.size() << " rows to " << csv_path << "\n";
            return kOk;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    }
    std::cerr << "error: no subcommand\n";
    return kUsageError;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    args.reserve(static_cast<std::size_t>(argc));
    for (int i = 0; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace proxyforge::cli
