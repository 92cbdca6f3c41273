#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "mmsense/constants.hpp"
#include "mmsense/scene.hpp"

namespace mmsense {

using ComplexGrid = Eigen::MatrixXcd;  // rows = OFDM symbols m, cols = subcarriers n

struct OfdmParams {
    int num_subcarriers = 0;   // N_s
    double scs_hz = 0.0;       // subcarrier spacing
    int num_symbols = 0;       // M
    double cp_duration_s = 0.0;
    double carrier_freq_hz = 0.0;

    double symbol_duration_s() const { return 1.0 / scs_hz; }
    double total_symbol_duration_s() const {
        return cp_duration_s + symbol_duration_s();
    }
    double bandwidth_hz() const { return num_subcarriers * scs_hz; }
};

/// Unit-modulus modulation symbols c_{m,n}.
struct SymbolGrid {
    ComplexGrid symbols;
};

/// Post-ZF received grid of one BS.
struct RxGrid {
    ComplexGrid samples;
    OfdmParams params;
};

struct ModelViolationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Pseudorandom QPSK symbol grid, deterministic per seed.
inline SymbolGrid make_symbols(const OfdmParams& params, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> quadrant(0, 3);
    SymbolGrid grid;
    grid.symbols.resize(params.num_symbols, params.num_subcarriers);
    for (int m = 0; m < params.num_symbols; ++m)
        for (int n = 0; n < params.num_subcarriers; ++n)
            grid.symbols(m, n) =
                std::polar(1.0, kPi / 4.0 + quadrant(rng) * kPi / 2.0);
    return grid;
}

/// Received subcarrier/symbol grid before ZF: each entry is the modulation
/// symbol times the superposition of per-path phase ramps, plus circular
/// Gaussian noise of total std `noise_std`. Symbol-to-symbol Doppler phase
/// advances by the full symbol duration including the CP.
inline ComplexGrid synthesize_received(const OfdmParams& params,
                                       const std::vector<PathComponent>& paths,
                                       const SymbolGrid& symbols,
                                       double noise_std, std::uint64_t seed) {
    const int m_count = params.num_symbols;
    const int n_count = params.num_subcarriers;
    if (symbols.symbols.rows() != m_count || symbols.symbols.cols() != n_count)
        throw std::invalid_argument("symbol grid dimensions mismatch params");
    for (const PathComponent& p : paths)
        if (p.delay_s >= params.cp_duration_s)
            throw ModelViolationError(
                "path delay exceeds CP duration; phase-ramp model invalid");

    ComplexGrid channel = ComplexGrid::Zero(m_count, n_count);
    const double t_sym = params.total_symbol_duration_s();
    for (const PathComponent& p : paths) {
        Eigen::VectorXcd doppler_ramp(m_count);
        for (int m = 0; m < m_count; ++m)
            doppler_ramp(m) =
                std::polar(1.0, 2.0 * kPi * m * t_sym * p.doppler_hz);
        Eigen::RowVectorXcd delay_ramp(n_count);
        for (int n = 0; n < n_count; ++n)
            delay_ramp(n) =
                std::polar(1.0, -2.0 * kPi * n * p.delay_s * params.scs_hz);
        channel.noalias() += p.gain * (doppler_ramp * delay_ramp);
    }

    ComplexGrid raw = symbols.symbols.cwiseProduct(channel);
    if (noise_std > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0,
                                               noise_std / std::sqrt(2.0));
        for (int n = 0; n < n_count; ++n)
            for (int m = 0; m < m_count; ++m)
                raw(m, n) += std::complex<double>(gauss(rng), gauss(rng));
    }
    return raw;
}

/// Removes the modulation symbols by element-wise division.
inline RxGrid zero_force(const ComplexGrid& raw, const SymbolGrid& symbols,
                         const OfdmParams& params) {
    if (raw.rows() != symbols.symbols.rows() ||
        raw.cols() != symbols.symbols.cols())
        throw std::invalid_argument("raw/symbol grid dimensions mismatch");
    RxGrid out;
    out.params = params;
    out.samples.resize(raw.rows(), raw.cols());
    for (Eigen::Index n = 0; n < raw.cols(); ++n)
        for (Eigen::Index m = 0; m < raw.rows(); ++m) {
            const std::complex<double> c = symbols.symbols(m, n);
            if (std::abs(c) < 1e-12)
                throw std::domain_error(
                    "near-zero modulation symbol; ZF division hazard");
            out.samples(m, n) = raw(m, n) / c;
        }
    return out;
}

/// Per-sample noise amplitude in the unit-transmit-amplitude normalization:
/// thermal noise power k_B T0 B scaled by the noise figure, referenced to
/// the transmit power.
inline double noise_std_from_budget(const OfdmParams& params,
                                    double noise_figure_db,
                                    double tx_power_dbm) {
    const double bandwidth = params.bandwidth_hz();
    const double noise_power_w = kBoltzmann * kRefTemperature * bandwidth *
                                 db_to_linear(noise_figure_db);
    return std::sqrt(noise_power_w / dbm_to_watts(tx_power_dbm));
}

}  // namespace mmsense
