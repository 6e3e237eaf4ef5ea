#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fal/runner.hpp"

namespace fs = std::filesystem;

namespace {

// --set key.path=value plus any leftover --key.path=value flags.
std::vector<std::pair<std::string, std::string>> collect_overrides(
    const std::vector<std::string>& sets, const std::vector<std::string>& extras) {
    std::vector<std::pair<std::string, std::string>> out;
    auto split = [&](const std::string& kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("override must look like key.path=value: " + kv);
        out.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    };
    for (const auto& kv : sets) split(kv);
    for (const auto& extra : extras) {
        if (extra.rfind("--", 0) != 0 || extra.find('=') == std::string::npos)
            throw CLI::ValidationError("unrecognized argument: " + extra);
        split(extra.substr(2));
    }
    return out;
}

void print_result_brief(const fal::ExperimentResult& result) {
    int ok = 0;
    for (const auto& run : result.runs)
        if (!run.failed) ok++;
    std::cout << fal::strategy_label(result.config.al) << ": " << ok << "/" << result.runs.size()
              << " seeds";
    if (ok > 0) {
        const auto series = fal::accuracy_series(result);
        std::cout << ", mean acc by round:";
        for (const auto& round : series.rounds) {
            double mean = 0.0;
            for (double a : round) mean += a;
            std::cout << " " << fal::fmt_g(round.empty() ? 0.0 : mean / round.size());
        }
    }
    std::cout << "\n";
    for (const auto& run : result.runs)
        if (run.failed)
            std::cerr << "  seed " << run.seed << " failed: " << run.error << "\n";
}

std::vector<fal::ExperimentResult> load_results_under(const std::string& root) {
    std::vector<std::string> paths;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file() && entry.path().filename() == "summary.json")
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    std::vector<fal::ExperimentResult> results;
    for (const auto& p : paths) results.push_back(fal::load_result(p));
    return results;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated active learning simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;

    auto add_config_opts = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--set", sets, "override a config field, e.g. --set partition.alpha=0.1");
        sub->allow_extras();
    };

    auto* partition_cmd =
        app.add_subcommand("partition", "partition a dataset and emit the client-by-class matrix");
    std::string partition_out = "partition.csv";
    uint64_t partition_seed = 0;
    bool partition_seed_given = false;
    add_config_opts(partition_cmd);
    partition_cmd->add_option("--out", partition_out, "output CSV path");
    partition_cmd->add_option("--seed", partition_seed, "partition seed")
        ->each([&](const std::string&) { partition_seed_given = true; });

    auto* run_cmd = app.add_subcommand("run", "run a single experiment config");
    std::string run_out_dir;
    add_config_opts(run_cmd);
    run_cmd->add_option("--out", run_out_dir, "override the config's output_dir");

    auto* grid_cmd = app.add_subcommand("grid", "run every *.json config in a directory");
    std::string grid_dir;
    int grid_threads = 1;
    grid_cmd->add_option("--dir", grid_dir, "directory of config files")->required();
    grid_cmd->add_option("--threads", grid_threads, "parallel experiment count");
    grid_cmd->add_option("--set", sets, "override applied to every config");
    grid_cmd->allow_extras();

    auto* compare_cmd = app.add_subcommand("compare", "paired t-scores and winning rate for two runs");
    std::string compare_a, compare_b, compare_out;
    double compare_threshold = -1.0;
    compare_cmd->add_option("--a", compare_a, "first run directory (or summary.json)")->required();
    compare_cmd->add_option("--b", compare_b, "second run directory (or summary.json)")->required();
    compare_cmd->add_option("--threshold", compare_threshold, "t-score win threshold");
    compare_cmd->add_option("--out", compare_out, "write the comparison as JSON");

    auto* report_cmd = app.add_subcommand("report", "aggregate runs into CSVs and a penalty matrix");
    std::string report_root, report_out = "report";
    report_cmd->add_option("--root", report_root, "directory scanned for summary.json files")
        ->required();
    report_cmd->add_option("--out", report_out, "report output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (partition_cmd->parsed()) {
            auto overrides = collect_overrides(sets, partition_cmd->remaining());
            fal::ExperimentConfig cfg = fal::load_config_file(config_path, overrides);
            uint64_t seed = partition_seed_given ? partition_seed
                                                 : (cfg.seeds.empty() ? 0 : cfg.seeds.front());
            auto data = fal::build_datasets(cfg, seed);
            fal::PartitionConfig part = cfg.partition;
            part.seed = fal::derive_seed(seed, "partition");
            fal::ClientSplit split = fal::partition_dirichlet(data.train, part);
            std::ofstream out(partition_out);
            if (!out) throw fal::IoError("cannot write " + partition_out);
            fal::write_partition_csv(out, data.train, split);
            std::cout << "wrote " << partition_out << " (" << part.num_clients << " clients x "
                      << data.train.num_classes << " classes, " << data.train.size()
                      << " examples)\n";
        } else if (run_cmd->parsed()) {
            auto overrides = collect_overrides(sets, run_cmd->remaining());
            fal::ExperimentConfig cfg = fal::load_config_file(config_path, overrides);
            if (!run_out_dir.empty()) cfg.output_dir = run_out_dir;
            fal::ExperimentResult result = fal::run_experiment(cfg);
            auto dir = fal::write_result(result);
            print_result_brief(result);
            std::cout << "results in " << dir.string() << "\n";
        } else if (grid_cmd->parsed()) {
            auto overrides = collect_overrides(sets, grid_cmd->remaining());
            std::vector<std::string> files;
            for (const auto& entry : fs::directory_iterator(grid_dir))
                if (entry.is_regular_file() && entry.path().extension() == ".json")
                    files.push_back(entry.path().string());
            std::sort(files.begin(), files.end());
            if (files.empty()) throw fal::IoError("no .json configs in " + grid_dir);
            std::vector<fal::ExperimentConfig> configs;
            std::vector<std::string> out_dirs;
            for (const auto& f : files) {
                fal::ExperimentConfig cfg = fal::load_config_file(f, overrides);
                if (cfg.output_dir == "out") cfg.output_dir = fs::path(f).stem().string();
                for (const auto& seen : out_dirs)
                    if (seen == cfg.output_dir)
                        throw std::invalid_argument("grid: duplicate output_dir " + cfg.output_dir);
                out_dirs.push_back(cfg.output_dir);
                configs.push_back(std::move(cfg));
            }
            auto results = fal::run_grid(configs, grid_threads);
            for (const auto& r : results) {
                fal::write_result(r);
                print_result_brief(r);
            }
        } else if (compare_cmd->parsed()) {
            auto resolve = [](const std::string& p) {
                return fs::is_directory(p) ? (fs::path(p) / "summary.json").string() : p;
            };
            fal::ExperimentResult a = fal::load_result(resolve(compare_a));
            fal::ExperimentResult b = fal::load_result(resolve(compare_b));
            std::optional<double> threshold;
            if (compare_threshold > 0.0) threshold = compare_threshold;
            fal::CompareReport rep = fal::compare_results(a, b, threshold);
            std::cout << rep.strategy_i << " vs " << rep.strategy_j
                      << " (threshold " << fal::fmt_g(rep.threshold) << ")\n";
            for (size_t r = 0; r < rep.t_scores.size(); ++r)
                std::cout << "  round " << (r + 1) << ": t = " << fal::fmt_g(rep.t_scores[r]) << "\n";
            std::cout << "winning rate " << rep.strategy_i << ": " << fal::fmt_g(rep.win_ij)
                      << ", " << rep.strategy_j << ": " << fal::fmt_g(rep.win_ji) << "\n";
            if (!compare_out.empty()) {
                fal::json j;
                j["strategy_i"] = rep.strategy_i;
                j["strategy_j"] = rep.strategy_j;
                j["threshold"] = rep.threshold;
                j["t_scores"] = fal::json::array();
                for (double t : rep.t_scores)
                    j["t_scores"].push_back(std::isinf(t) ? fal::json(t > 0 ? "inf" : "-inf")
                                                          : fal::json(t));
                j["win_ij"] = rep.win_ij;
                j["win_ji"] = rep.win_ji;
                std::ofstream out(compare_out);
                out << j.dump(2) << "\n";
            }
        } else if (report_cmd->parsed()) {
            auto results = load_results_under(report_root);
            if (results.empty()) throw fal::IoError("no summary.json found under " + report_root);
            fal::write_report(results, report_out);
            std::cout << "report for " << results.size() << " runs in " << report_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
