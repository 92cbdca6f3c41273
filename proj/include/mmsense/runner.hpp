#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mmsense/random.hpp"
#include "mmsense/scenario.hpp"

namespace mmsense {

struct StepBsRecord {
    double d_true = 0.0;
    double d_hat = 0.0;
    double weight = 0.0;  // normalized across detected BSs, 0 if undetected
    double sigma2 = 0.0;
    bool detected = false;
};

struct StepAlgRecord {
    Algorithm algorithm = Algorithm::NLLS;
    bool fused = false;  // false when no BS detected (fusion skipped)
    Vec3 estimate;
    double pos_error_m = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> fused_dist_err_m;  // per BS
};

struct StepRecord {
    int step = 0;
    Vec3 true_position;
    std::vector<StepBsRecord> bs;
    std::vector<StepAlgRecord> algs;
};

struct RunOptions {
    std::optional<std::string> dump_dir;  // per-step periodogram dumps
};

/// Runs the full two-stage pipeline over the trajectory: per-BS echo
/// synthesis and measurement, then fusion with every configured algorithm.
/// Deterministic for a fixed master seed.
inline std::vector<StepRecord> run_scenario(const ScenarioConfig& cfg,
                                            const RunOptions& options = {}) {
    cfg.validate();
    const OfdmParams params = cfg.ofdm_params();
    const MeasurementConfig meas_base = cfg.measurement_config();
    const Vec3 velocity = cfg.trajectory.velocity();

    std::vector<StepRecord> records;
    records.reserve(cfg.trajectory.num_steps);

    for (int step = 0; step < cfg.trajectory.num_steps; ++step) {
        StepRecord rec;
        rec.step = step;
        rec.true_position = step_trajectory(cfg.trajectory, step);
        const TargetState target{rec.true_position, velocity, cfg.rcs_dbsm};

        std::vector<BsMeasurement> measurements;
        for (const BsConfig& bs : cfg.bss) {
            std::vector<PathComponent> paths;
            paths.push_back(los_path(bs, target, cfg.carrier_freq_hz));
            for (const PathComponent& p :
                 nlos_paths(bs, target, cfg.scatterers, cfg.carrier_freq_hz))
                paths.push_back(p);

            const auto symbol_seed = derive_seed(
                cfg.master_seed, {static_cast<std::uint64_t>(bs.id),
                                  static_cast<std::uint64_t>(step), 0});
            const auto noise_seed = derive_seed(
                cfg.master_seed, {static_cast<std::uint64_t>(bs.id),
                                  static_cast<std::uint64_t>(step), 1});
            const SymbolGrid symbols = make_symbols(params, symbol_seed);
            const double noise_std = noise_std_from_budget(
                params, cfg.noise_figure_db, bs.tx_power_dbm);
            const ComplexGrid raw = synthesize_received(
                params, paths, symbols, noise_std, noise_seed);
            const RxGrid rx = zero_force(raw, symbols, params);

            MeasurementConfig mc = meas_base;
            if (options.dump_dir)
                mc.dump_prefix = *options.dump_dir + "/step" +
                                 std::to_string(step) + "_bs" +
                                 std::to_string(bs.id);
            measurements.push_back(measure(rx, bs, mc));

            StepBsRecord bs_rec;
            bs_rec.d_true = distance(rec.true_position, bs.position);
            bs_rec.detected = measurements.back().detected;
            bs_rec.d_hat = measurements.back().range_m;
            bs_rec.sigma2 = measurements.back().variance_m2;
            rec.bs.push_back(bs_rec);
        }

        const bool any_detected =
            std::any_of(measurements.begin(), measurements.end(),
                        [](const BsMeasurement& m) {
                            return m.detected && m.weight > 0.0;
                        });
        if (any_detected) {
            double total = 0.0;
            for (const BsMeasurement& m : measurements)
                if (m.detected && m.weight > 0.0) total += m.weight;
            for (std::size_t k = 0; k < measurements.size(); ++k)
                if (measurements[k].detected && measurements[k].weight > 0.0)
                    rec.bs[k].weight = measurements[k].weight / total;
        }

        for (Algorithm alg : cfg.algorithms) {
            StepAlgRecord alg_rec;
            alg_rec.algorithm = alg;
            if (any_detected) {
                const PositionEstimate est =
                    estimate_position(measurements, cfg.fusion_config(alg));
                alg_rec.fused = true;
                alg_rec.estimate = est.position;
                alg_rec.pos_error_m =
                    distance(est.position, rec.true_position);
                for (const BsConfig& bs : cfg.bss)
                    alg_rec.fused_dist_err_m.push_back(std::abs(
                        distance(est.position, bs.position) -
                        distance(rec.true_position, bs.position)));
            } else {
                alg_rec.fused_dist_err_m.assign(
                    cfg.bss.size(), std::numeric_limits<double>::quiet_NaN());
            }
            rec.algs.push_back(alg_rec);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

/// Empirical CDF over a metric's samples.
struct CdfSummary {
    std::vector<double> samples;  // sorted ascending

    /// Value at index ceil(p * n) - 1 of the sorted samples.
    double percentile(double p) const {
        if (samples.empty())
            throw std::invalid_argument("percentile of empty CDF");
        const auto n = samples.size();
        auto idx = static_cast<std::size_t>(
            std::ceil(p * static_cast<double>(n)));
        if (idx > 0) --idx;
        if (idx >= n) idx = n - 1;
        return samples[idx];
    }
};

inline CdfSummary make_cdf(std::vector<double> samples) {
    samples.erase(std::remove_if(samples.begin(), samples.end(),
                                 [](double v) { return std::isnan(v); }),
                  samples.end());
    if (samples.empty())
        throw std::invalid_argument("no samples for CDF summary");
    std::sort(samples.begin(), samples.end());
    return CdfSummary{std::move(samples)};
}

inline std::vector<double> positioning_errors(
    const std::vector<StepRecord>& records, Algorithm alg) {
    std::vector<double> out;
    for (const StepRecord& rec : records)
        for (const StepAlgRecord& a : rec.algs)
            if (a.algorithm == alg && a.fused) out.push_back(a.pos_error_m);
    return out;
}

/// Post-fusion distance errors |d_hat_{k,alg} - d*_k|, pooled over BSs.
inline std::vector<double> fused_distance_errors(
    const std::vector<StepRecord>& records, Algorithm alg) {
    std::vector<double> out;
    for (const StepRecord& rec : records)
        for (const StepAlgRecord& a : rec.algs)
            if (a.algorithm == alg && a.fused)
                out.insert(out.end(), a.fused_dist_err_m.begin(),
                           a.fused_dist_err_m.end());
    return out;
}

/// Raw single-BS distance errors |d_hat_k - d*_k| (detected steps only).
inline std::vector<double> raw_distance_errors(
    const std::vector<StepRecord>& records, std::size_t bs_index) {
    std::vector<double> out;
    for (const StepRecord& rec : records)
        if (bs_index < rec.bs.size() && rec.bs[bs_index].detected)
            out.push_back(
                std::abs(rec.bs[bs_index].d_hat - rec.bs[bs_index].d_true));
    return out;
}

namespace detail {

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace detail

inline std::string steps_csv_header(std::size_t num_bs) {
    std::string h =
        "step,algorithm,true_x,true_y,true_z,est_x,est_y,est_z,pos_error_m";
    for (std::size_t k = 1; k <= num_bs; ++k) {
        const std::string i = std::to_string(k);
        h += ",d_true_" + i + ",d_hat_" + i + ",w_" + i + ",sigma2_" + i +
             ",detected_" + i + ",fused_dist_err_" + i;
    }
    return h;
}

inline std::string steps_csv(const std::vector<StepRecord>& records) {
    const std::size_t num_bs = records.empty() ? 0 : records.front().bs.size();
    std::string out = steps_csv_header(num_bs) + "\n";
    for (const StepRecord& rec : records)
        for (const StepAlgRecord& a : rec.algs) {
            constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
            out += std::to_string(rec.step) + "," + algorithm_name(a.algorithm);
            for (double v : {rec.true_position.x, rec.true_position.y,
                             rec.true_position.z})
                out += "," + detail::format_number(v);
            for (double v : {a.estimate.x, a.estimate.y, a.estimate.z,
                             a.pos_error_m})
                out += "," + detail::format_number(a.fused ? v : kNaN);
            for (std::size_t k = 0; k < rec.bs.size(); ++k) {
                const StepBsRecord& b = rec.bs[k];
                out += "," + detail::format_number(b.d_true);
                out += "," + detail::format_number(b.d_hat);
                out += "," + detail::format_number(b.weight);
                out += "," + detail::format_number(b.sigma2);
                out += std::string(",") + (b.detected ? "1" : "0");
                out += "," + detail::format_number(a.fused_dist_err_m[k]);
            }
            out += "\n";
        }
    return out;
}

/// Writes steps.csv plus per-metric, per-algorithm CDF files.
inline void write_outputs(const std::vector<StepRecord>& records,
                          const std::vector<Algorithm>& algorithms,
                          const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec && !fs::is_directory(out_dir))
        throw std::runtime_error("cannot create output directory " + out_dir);

    auto write_file = [&](const std::string& name, const std::string& body) {
        const std::string path = out_dir + "/" + name;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + path);
        f << body;
        if (!f) throw std::runtime_error("write failed for " + path);
    };

    write_file("steps.csv", steps_csv(records));

    for (Algorithm alg : algorithms) {
        const struct {
            const char* name;
            std::vector<double> samples;
        } metrics[] = {
            {"positioning", positioning_errors(records, alg)},
            {"distance", fused_distance_errors(records, alg)},
        };
        for (const auto& metric : metrics) {
            if (metric.samples.empty()) continue;
            CdfSummary cdf = make_cdf(metric.samples);
            std::string body = "error,cum_prob\n";
            const auto n = cdf.samples.size();
            for (std::size_t i = 0; i < n; ++i)
                body += detail::format_number(cdf.samples[i]) + "," +
                        detail::format_number(static_cast<double>(i + 1) /
                                              static_cast<double>(n)) +
                        "\n";
            write_file("cdf_" + std::string(metric.name) + "_" +
                           algorithm_name(alg) + ".csv",
                       body);
        }
    }
}

}  // namespace mmsense
