#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmsense/echo.hpp"
#include "mmsense/fusion.hpp"
#include "mmsense/periodogram.hpp"
#include "mmsense/scene.hpp"

namespace mmsense {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Full simulation scenario. See scenarios/street_k2.cfg for the file
/// schema: one `key value...` entry per line, `#` comments, repeated `bs`
/// and `scatterer` lines.
struct ScenarioConfig {
    // Waveform
    double carrier_freq_hz = 3.5e9;
    double scs_hz = 30e3;
    double bandwidth_hz = 20e6;
    int num_symbols = 500;
    std::optional<double> cp_duration_s;  // default T_s / 14

    // Scene
    std::vector<BsConfig> bss;
    std::vector<Scatterer> scatterers;
    Trajectory trajectory;
    double rcs_dbsm = 7.0;
    double noise_figure_db = 8.0;

    // Measurement stage
    int pad_factor_n = 4;
    int pad_factor_m = 2;
    double threshold_db = 13.0;
    int window_bins = 5;

    // Fusion stage
    SearchRegion search_region;
    std::optional<double> fixed_z;
    double epsilon_m = 1e-3;
    int grid_starts_per_axis = 20;
    int max_iterations = 200;
    double convergence_tol_m = 1e-4;
    std::vector<Algorithm> algorithms = {Algorithm::ML, Algorithm::MAP,
                                         Algorithm::NLLS};

    std::uint64_t master_seed = 1;

    int num_subcarriers() const {
        return static_cast<int>(std::floor(bandwidth_hz / scs_hz));
    }

    OfdmParams ofdm_params() const {
        OfdmParams p;
        p.num_subcarriers = num_subcarriers();
        p.scs_hz = scs_hz;
        p.num_symbols = num_symbols;
        p.cp_duration_s =
            cp_duration_s.value_or((1.0 / scs_hz) / 14.0);
        p.carrier_freq_hz = carrier_freq_hz;
        return p;
    }

    MeasurementConfig measurement_config() const {
        MeasurementConfig mc;
        mc.pad_n = pad_factor_n * num_subcarriers();
        mc.pad_m = pad_factor_m * num_symbols;
        mc.threshold_factor = db_to_linear(threshold_db);
        mc.window_bins = window_bins;
        return mc;
    }

    FusionConfig fusion_config(Algorithm alg) const {
        FusionConfig fc;
        fc.algorithm = alg;
        fc.epsilon_m = epsilon_m;
        fc.search_region = search_region;
        fc.fixed_z = fixed_z;
        fc.grid_starts_per_axis = grid_starts_per_axis;
        fc.max_iterations = max_iterations;
        fc.convergence_tol_m = convergence_tol_m;
        return fc;
    }

    void validate() const {
        if (scs_hz <= 0.0) throw ConfigError("scs_hz must be positive");
        if (bandwidth_hz < scs_hz)
            throw ConfigError("bandwidth_hz must be at least scs_hz");
        if (num_symbols < 1) throw ConfigError("num_symbols must be >= 1");
        if (bss.size() < 2)
            throw ConfigError("at least 2 BSs required for fusion runs");
        for (std::size_t i = 0; i < bss.size(); ++i)
            for (std::size_t j = i + 1; j < bss.size(); ++j)
                if (bss[i].id == bss[j].id)
                    throw ConfigError("duplicate BS id " +
                                      std::to_string(bss[i].id));
        if (trajectory.step_interval_s <= 0.0)
            throw ConfigError("step_interval_s must be positive");
        if (trajectory.num_steps < 1)
            throw ConfigError("num_steps must be >= 1");
        if (std::abs(trajectory.direction.norm() - 1.0) > 1e-9)
            throw ConfigError("traj_direction must be a unit vector");
        if (pad_factor_n < 1 || pad_factor_m < 1)
            throw ConfigError("pad factors must be >= 1");
        if (epsilon_m <= 0.0) throw ConfigError("epsilon_m must be positive");
        if (grid_starts_per_axis < 2)
            throw ConfigError("grid_starts_per_axis must be >= 2");
        if (search_region.min.x > search_region.max.x ||
            search_region.min.y > search_region.max.y ||
            search_region.min.z > search_region.max.z)
            throw ConfigError("search_region is empty");
        if (algorithms.empty())
            throw ConfigError("at least one fusion algorithm required");
    }
};

namespace detail {

inline double parse_double(const std::string& tok, int line_no) {
    try {
        std::size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line_no) +
                          ": invalid number '" + tok + "'");
    }
}

}  // namespace detail

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);

    ScenarioConfig cfg;
    cfg.algorithms.clear();
    bool saw_algorithms = false;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;

        std::vector<std::string> args;
        for (std::string tok; ss >> tok;) args.push_back(tok);
        auto want = [&](std::size_t n) {
            if (args.size() != n)
                throw ConfigError("line " + std::to_string(line_no) + ": '" +
                                  key + "' expects " + std::to_string(n) +
                                  " value(s)");
        };
        auto num = [&](std::size_t i) {
            return detail::parse_double(args.at(i), line_no);
        };

        if (key == "carrier_freq_hz") { want(1); cfg.carrier_freq_hz = num(0); }
        else if (key == "scs_hz") { want(1); cfg.scs_hz = num(0); }
        else if (key == "bandwidth_hz") { want(1); cfg.bandwidth_hz = num(0); }
        else if (key == "num_symbols") { want(1); cfg.num_symbols = static_cast<int>(num(0)); }
        else if (key == "cp_duration_s") { want(1); cfg.cp_duration_s = num(0); }
        else if (key == "noise_figure_db") { want(1); cfg.noise_figure_db = num(0); }
        else if (key == "rcs_dbsm") { want(1); cfg.rcs_dbsm = num(0); }
        else if (key == "master_seed") { want(1); cfg.master_seed = static_cast<std::uint64_t>(num(0)); }
        else if (key == "pad_factor_n") { want(1); cfg.pad_factor_n = static_cast<int>(num(0)); }
        else if (key == "pad_factor_m") { want(1); cfg.pad_factor_m = static_cast<int>(num(0)); }
        else if (key == "threshold_db") { want(1); cfg.threshold_db = num(0); }
        else if (key == "window_bins") { want(1); cfg.window_bins = static_cast<int>(num(0)); }
        else if (key == "bs") {
            want(6);
            BsConfig bs;
            bs.id = static_cast<int>(num(0));
            bs.position = {num(1), num(2), num(3)};
            bs.tx_power_dbm = num(4);
            bs.antenna_gain_dbi = num(5);
            cfg.bss.push_back(bs);
        }
        else if (key == "scatterer") {
            want(4);
            cfg.scatterers.push_back({{num(0), num(1), num(2)}, num(3)});
        }
        else if (key == "traj_start") { want(3); cfg.trajectory.start = {num(0), num(1), num(2)}; }
        else if (key == "traj_direction") { want(3); cfg.trajectory.direction = {num(0), num(1), num(2)}; }
        else if (key == "traj_speed_mps") { want(1); cfg.trajectory.speed_mps = num(0); }
        else if (key == "step_interval_s") { want(1); cfg.trajectory.step_interval_s = num(0); }
        else if (key == "num_steps") { want(1); cfg.trajectory.num_steps = static_cast<int>(num(0)); }
        else if (key == "search_region") {
            want(6);
            cfg.search_region.min = {num(0), num(2), num(4)};
            cfg.search_region.max = {num(1), num(3), num(5)};
        }
        else if (key == "fixed_z") { want(1); cfg.fixed_z = num(0); }
        else if (key == "epsilon_m") { want(1); cfg.epsilon_m = num(0); }
        else if (key == "grid_starts_per_axis") { want(1); cfg.grid_starts_per_axis = static_cast<int>(num(0)); }
        else if (key == "max_iterations") { want(1); cfg.max_iterations = static_cast<int>(num(0)); }
        else if (key == "convergence_tol_m") { want(1); cfg.convergence_tol_m = num(0); }
        else if (key == "algorithms") {
            saw_algorithms = true;
            for (const std::string& a : args)
                cfg.algorithms.push_back(parse_algorithm(a));
        }
        else {
            throw ConfigError("line " + std::to_string(line_no) +
                              ": unknown key '" + key + "'");
        }
    }
    if (!saw_algorithms)
        cfg.algorithms = {Algorithm::ML, Algorithm::MAP, Algorithm::NLLS};
    cfg.validate();
    return cfg;
}

}  // namespace mmsense
