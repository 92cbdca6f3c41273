#pragma once

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmsense/echo.hpp"
#include "mmsense/scene.hpp"

namespace mmsense {

/// Range-Doppler map A(n, m): rows index the delay/range bin n,
/// columns the Doppler/velocity bin m.
struct PeriodogramMap {
    Eigen::MatrixXd values;      // N' x M'
    double range_bin_m = 0.0;    // c0 / (2 df N')
    double velocity_bin_mps = 0.0;  // c0 / (2 fc T M')
};

struct PeakDetection {
    int range_bin = 0;    // n-hat
    int doppler_bin = 0;  // m-hat
    double peak_value = 0.0;
    bool detected = false;
};

/// Gaussian fit of the delay profile around the detected peak.
struct ProfileFit {
    double amplitude = 0.0;
    double mean_bins = 0.0;   // fractional range bin
    double variance_m2 = 0.0;
};

/// Per-BS output of the measurement stage, input to fusion.
struct BsMeasurement {
    Vec3 bs_position;
    double range_m = 0.0;
    double velocity_mps = 0.0;
    double variance_m2 = 0.0;
    double weight = 0.0;  // pre-normalization
    bool detected = false;
};

struct FitDegenerateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Zero-padded 2D periodogram: forward DFT over the symbol axis (Doppler),
/// inverse DFT over the subcarrier axis (delay), magnitude squared.
inline PeriodogramMap compute_periodogram(const RxGrid& grid, int pad_n,
                                          int pad_m) {
    const int n_sub = grid.params.num_subcarriers;
    const int m_sym = grid.params.num_symbols;
    if (pad_n < n_sub || pad_m < m_sym)
        throw std::invalid_argument("periodogram padding smaller than grid");

    // Buffer layout: row-major [m][n], m = 0..pad_m-1, n = 0..pad_n-1.
    std::vector<std::complex<double>> buf(
        static_cast<std::size_t>(pad_m) * pad_n, {0.0, 0.0});
    for (int m = 0; m < m_sym; ++m)
        for (int n = 0; n < n_sub; ++n)
            buf[static_cast<std::size_t>(m) * pad_n + n] =
                grid.samples(m, n);

    auto* data = reinterpret_cast<fftw_complex*>(buf.data());
    // Forward transforms of length pad_m along the symbol axis (stride pad_n).
    fftw_plan plan_sym = fftw_plan_many_dft(
        1, &pad_m, pad_n, data, nullptr, pad_n, 1, data, nullptr, pad_n, 1,
        FFTW_FORWARD, FFTW_ESTIMATE);
    // Backward transforms of length pad_n along the subcarrier axis.
    fftw_plan plan_sub = fftw_plan_many_dft(
        1, &pad_n, pad_m, data, nullptr, 1, pad_n, data, nullptr, 1, pad_n,
        FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_execute(plan_sym);
    fftw_execute(plan_sub);
    fftw_destroy_plan(plan_sym);
    fftw_destroy_plan(plan_sub);

    PeriodogramMap map;
    map.values.resize(pad_n, pad_m);
    for (int m = 0; m < pad_m; ++m)
        for (int n = 0; n < pad_n; ++n)
            map.values(n, m) =
                std::norm(buf[static_cast<std::size_t>(m) * pad_n + n]);
    map.range_bin_m = kSpeedOfLight / (2.0 * grid.params.scs_hz * pad_n);
    map.velocity_bin_mps =
        kSpeedOfLight / (2.0 * grid.params.carrier_freq_hz *
                         grid.params.total_symbol_duration_s() * pad_m);
    return map;
}

/// Argmax with a median-based noise-floor threshold test.
inline PeakDetection detect_peak(const PeriodogramMap& map,
                                 double threshold_factor) {
    PeakDetection peak;
    Eigen::Index n_idx = 0, m_idx = 0;
    peak.peak_value = map.values.maxCoeff(&n_idx, &m_idx);
    peak.range_bin = static_cast<int>(n_idx);
    peak.doppler_bin = static_cast<int>(m_idx);

    std::vector<double> flat(map.values.data(),
                             map.values.data() + map.values.size());
    auto mid = flat.begin() + flat.size() / 2;
    std::nth_element(flat.begin(), mid, flat.end());
    const double median = *mid;

    peak.detected =
        peak.peak_value > 0.0 && peak.peak_value >= threshold_factor * median;
    return peak;
}

/// Range and velocity from the peak bins. Doppler bins above M'/2 wrap to
/// negative velocities.
inline std::pair<double, double> bins_to_range_velocity(
    const PeakDetection& peak, const OfdmParams& params, int pad_n,
    int pad_m) {
    if (!peak.detected)
        throw std::logic_error("bins_to_range_velocity on non-detection");
    const double range =
        peak.range_bin * kSpeedOfLight / (2.0 * params.scs_hz * pad_n);
    int m = peak.doppler_bin;
    if (m > pad_m / 2) m -= pad_m;
    const double velocity =
        m * kSpeedOfLight /
        (2.0 * params.carrier_freq_hz * params.total_symbol_duration_s() *
         pad_m);
    return {range, velocity};
}

/// Least-squares Gaussian fit (log domain) to the delay profile
/// A(., m-hat) over +-window_bins around the peak.
inline ProfileFit fit_gaussian_profile(const PeriodogramMap& map,
                                       const PeakDetection& peak,
                                       int window_bins) {
    if (!peak.detected)
        throw std::logic_error("fit_gaussian_profile on non-detection");
    const int n_total = static_cast<int>(map.values.rows());
    const int lo = std::max(0, peak.range_bin - window_bins);
    const int hi = std::min(n_total - 1, peak.range_bin + window_bins);

    std::vector<double> xs, ys;
    for (int n = lo; n <= hi; ++n) {
        const double v = map.values(n, peak.doppler_bin);
        if (v > 0.0 && v > peak.peak_value * 1e-12) {
            xs.push_back(static_cast<double>(n));
            ys.push_back(std::log(v));
        }
    }
    if (xs.size() < 3)
        throw FitDegenerateError("fewer than 3 usable samples in fit window");

    // ln A = alpha n^2 + beta n + c  with alpha = -1/(2 s^2).
    Eigen::MatrixXd design(xs.size(), 3);
    Eigen::VectorXd rhs(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        design(i, 0) = xs[i] * xs[i];
        design(i, 1) = xs[i];
        design(i, 2) = 1.0;
        rhs(i) = ys[i];
    }
    Eigen::Vector3d coef =
        design.colPivHouseholderQr().solve(rhs);
    const double alpha = coef(0), beta = coef(1), c = coef(2);

    ProfileFit fit;
    if (alpha < 0.0) {
        const double s2_bins = -1.0 / (2.0 * alpha);
        fit.mean_bins = -beta / (2.0 * alpha);
        fit.amplitude = std::exp(c - beta * beta / (4.0 * alpha));
        fit.variance_m2 = s2_bins * map.range_bin_m * map.range_bin_m;
    } else {
        // Degenerate curvature: fall back to a single-bin spread.
        fit.mean_bins = static_cast<double>(peak.range_bin);
        fit.amplitude = peak.peak_value;
        fit.variance_m2 = map.range_bin_m * map.range_bin_m;
    }
    return fit;
}

struct MeasurementConfig {
    int pad_n = 0;  // absolute N' (>= N_s)
    int pad_m = 0;  // absolute M' (>= M)
    double threshold_factor = db_to_linear(13.0);
    int window_bins = 5;
    std::optional<std::string> dump_prefix;  // debug map dump
};

/// Writes a map as flat row-major (range-major) 64-bit floats plus a text
/// sidecar with the dimensions and bin scales.
inline void dump_periodogram(const PeriodogramMap& map,
                             const std::string& prefix) {
    std::ofstream bin(prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open " + prefix + ".bin");
    const int n_rows = static_cast<int>(map.values.rows());
    const int m_cols = static_cast<int>(map.values.cols());
    for (int n = 0; n < n_rows; ++n)
        for (int m = 0; m < m_cols; ++m) {
            const double v = map.values(n, m);
            bin.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    std::ofstream txt(prefix + ".txt");
    if (!txt) throw std::runtime_error("cannot open " + prefix + ".txt");
    txt << "pad_n " << n_rows << "\n"
        << "pad_m " << m_cols << "\n"
        << "range_bin_m " << map.range_bin_m << "\n"
        << "velocity_bin_mps " << map.velocity_bin_mps << "\n";
}

/// Full per-BS measurement pipeline: periodogram, peak detection, bin
/// mapping and Gaussian profile fit. Non-detection is a valid outcome.
inline BsMeasurement measure(const RxGrid& grid, const BsConfig& bs,
                             const MeasurementConfig& config) {
    PeriodogramMap map =
        compute_periodogram(grid, config.pad_n, config.pad_m);
    if (config.dump_prefix) dump_periodogram(map, *config.dump_prefix);

    BsMeasurement meas;
    meas.bs_position = bs.position;
    PeakDetection peak = detect_peak(map, config.threshold_factor);
    if (!peak.detected) return meas;

    auto [range, velocity] =
        bins_to_range_velocity(peak, grid.params, config.pad_n, config.pad_m);
    ProfileFit fit;
    try {
        fit = fit_gaussian_profile(map, peak, config.window_bins);
    } catch (const FitDegenerateError&) {
        // Near-delta peak (e.g. an on-grid path without padding): treat it
        // as a single-bin spread with the peak value as amplitude.
        fit.amplitude = peak.peak_value;
        fit.mean_bins = static_cast<double>(peak.range_bin);
        fit.variance_m2 = map.range_bin_m * map.range_bin_m;
    }

    meas.detected = true;
    meas.range_m = range;
    meas.velocity_mps = velocity;
    meas.variance_m2 = fit.variance_m2;
    meas.weight = fit.amplitude;
    return meas;
}

}  // namespace mmsense
