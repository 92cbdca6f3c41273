// Command-line front end: runs a scenario file end to end and summarizes
// result CSVs.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mmsense/mmsense.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed_override,
            const std::string& algorithms_csv, bool dump_periodograms) {
    mmsense::ScenarioConfig cfg = mmsense::load_scenario(config_path);
    if (seed_override) cfg.master_seed = *seed_override;
    if (!algorithms_csv.empty()) {
        cfg.algorithms.clear();
        std::istringstream ss(algorithms_csv);
        for (std::string tok; std::getline(ss, tok, ',');)
            cfg.algorithms.push_back(mmsense::parse_algorithm(tok));
        cfg.validate();
    }

    mmsense::RunOptions options;
    if (dump_periodograms) {
        const std::string dump_dir = out_dir + "/periodograms";
        std::filesystem::create_directories(dump_dir);
        options.dump_dir = dump_dir;
    }

    const auto records = mmsense::run_scenario(cfg, options);
    mmsense::write_outputs(records, cfg.algorithms, out_dir);

    for (mmsense::Algorithm alg : cfg.algorithms) {
        const auto errs = mmsense::positioning_errors(records, alg);
        if (errs.empty()) {
            std::cout << mmsense::algorithm_name(alg)
                      << ": no fused steps\n";
            continue;
        }
        const auto cdf = mmsense::make_cdf(errs);
        std::printf("%s: steps=%zu median=%.3f m p90=%.3f m\n",
                    mmsense::algorithm_name(alg).c_str(), cdf.samples.size(),
                    cdf.percentile(0.5), cdf.percentile(0.9));
    }
    return 0;
}

struct StepsCsv {
    std::vector<std::string> header;
    // per algorithm: column -> values
    std::map<std::string, std::vector<std::vector<double>>> rows;
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) out.push_back(tok);
    return out;
}

int cmd_summarize(const std::string& in_dir, const std::string& metric,
                  double percentile) {
    const std::string path = in_dir + "/steps.csv";
    std::ifstream in(path);
    if (!in) {
        std::cerr << "error: cannot open " << path << "\n";
        return 1;
    }
    std::string line;
    if (!std::getline(in, line)) {
        std::cerr << "error: empty file " << path << "\n";
        return 1;
    }
    const auto header = split_csv_line(line);
    std::vector<std::size_t> metric_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (metric == "positioning" && header[i] == "pos_error_m")
            metric_cols.push_back(i);
        if (metric == "distance" &&
            header[i].rfind("fused_dist_err_", 0) == 0)
            metric_cols.push_back(i);
    }
    if (metric_cols.empty()) {
        std::cerr << "error: metric columns not found in " << path << "\n";
        return 1;
    }

    std::map<std::string, std::vector<double>> samples;
    while (std::getline(in, line)) {
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) continue;
        const std::string& alg = cells[1];
        for (std::size_t col : metric_cols) {
            const double v = std::strtod(cells[col].c_str(), nullptr);
            if (!std::isnan(v)) samples[alg].push_back(v);
        }
    }
    if (samples.empty()) {
        std::cerr << "error: no samples in " << path << "\n";
        return 1;
    }
    for (auto& [alg, vals] : samples) {
        const auto cdf = mmsense::make_cdf(vals);
        std::printf("%s %s p%g: %.4f m (n=%zu)\n", alg.c_str(),
                    metric.c_str(), percentile * 100.0,
                    cdf.percentile(percentile), cdf.samples.size());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cooperative multi-monostatic OFDM sensing simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir, algorithms_csv;
    std::uint64_t seed = 0;
    bool seed_set = false, dump = false;
    auto* run = app.add_subcommand("run", "run a scenario and write CSVs");
    run->add_option("--config", config_path, "scenario file")->required();
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--seed", seed, "override master seed")
        ->each([&](const std::string&) { seed_set = true; });
    run->add_option("--algorithms", algorithms_csv,
                    "comma-separated subset: ml,map,nlls");
    run->add_flag("--dump-periodograms", dump,
                  "write per-step periodogram maps");

    std::string in_dir, metric = "positioning";
    double pct = 90.0;
    auto* summarize =
        app.add_subcommand("summarize", "percentiles from steps.csv");
    summarize->add_option("--in", in_dir, "results directory")->required();
    summarize->add_option("--metric", metric, "positioning|distance")
        ->check(CLI::IsMember({"positioning", "distance"}));
    summarize->add_option("--percentile", pct, "percentile in [0,100]")
        ->check(CLI::Range(0.0, 100.0));

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(config_path, out_dir,
                           seed_set ? std::optional<std::uint64_t>(seed)
                                    : std::nullopt,
                           algorithms_csv, dump);
        return cmd_summarize(in_dir, metric, pct / 100.0);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
