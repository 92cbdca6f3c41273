#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

#include "mmsense/constants.hpp"
#include "mmsense/geometry.hpp"

namespace mmsense {

struct BsConfig {
    int id = 0;
    Vec3 position;
    double tx_power_dbm = 23.0;
    double antenna_gain_dbi = 0.0;
};

struct TargetState {
    Vec3 position;
    Vec3 velocity;      // m/s
    double rcs_dbsm = 0.0;
};

/// Point scatterer producing one single-bounce NLOS echo per BS.
struct Scatterer {
    Vec3 position;
    double reflection_loss_db = 0.0;  // extra attenuation on the bounced path
};

/// One propagation path of the echo: round-trip delay, Doppler shift and
/// complex amplitude relative to unit transmit amplitude.
struct PathComponent {
    double delay_s = 0.0;
    double doppler_hz = 0.0;
    std::complex<double> gain;
};

/// Constant-velocity target track sampled at a fixed interval.
struct Trajectory {
    Vec3 start;
    Vec3 direction;          // unit vector
    double speed_mps = 0.0;
    double step_interval_s = 0.02;
    int num_steps = 1;

    Vec3 velocity() const { return direction * speed_mps; }
};

struct DegenerateGeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

// Amplitude factor sqrt(G^2 lambda^2 sigma / (4 pi)^3), i.e. the monostatic
// radar equation with transmit power normalized out and the 1/d^2 spreading
// handled by the caller.
inline double radar_amplitude_factor(const BsConfig& bs, double rcs_dbsm,
                                     double carrier_freq_hz) {
    const double lambda = kSpeedOfLight / carrier_freq_hz;
    const double g = db_to_linear(bs.antenna_gain_dbi);
    const double sigma = db_to_linear(rcs_dbsm);
    const double four_pi_cubed = 64.0 * kPi * kPi * kPi;
    return std::sqrt(g * g * lambda * lambda * sigma / four_pi_cubed);
}

}  // namespace detail

/// Direct (LOS) round-trip echo path from a BS to the target and back.
inline PathComponent los_path(const BsConfig& bs, const TargetState& target,
                              double carrier_freq_hz) {
    const Vec3 sep = target.position - bs.position;
    const double d = sep.norm();
    if (d <= 0.0)
        throw DegenerateGeometryError("BS and target positions coincide");

    const Vec3 u = sep / d;  // BS -> target
    // Radial speed toward the BS, positive when approaching.
    const double v_radial = -target.velocity.dot(u);

    PathComponent p;
    p.delay_s = 2.0 * d / kSpeedOfLight;
    p.doppler_hz = 2.0 * v_radial * carrier_freq_hz / kSpeedOfLight;
    const double amp =
        detail::radar_amplitude_factor(bs, target.rcs_dbsm, carrier_freq_hz) /
        (d * d);
    p.gain = std::polar(amp, -2.0 * kPi * carrier_freq_hz * p.delay_s);
    return p;
}

/// Single-bounce NLOS paths BS -> target -> scatterer -> BS, one per
/// scatterer. The reciprocal route has the same length and is merged into
/// the same component.
inline std::vector<PathComponent> nlos_paths(
    const BsConfig& bs, const TargetState& target,
    const std::vector<Scatterer>& scatterers, double carrier_freq_hz) {
    const Vec3 bt = target.position - bs.position;
    const double d_bt = bt.norm();
    if (d_bt <= 0.0)
        throw DegenerateGeometryError("BS and target positions coincide");

    std::vector<PathComponent> paths;
    paths.reserve(scatterers.size());
    for (const Scatterer& sc : scatterers) {
        const Vec3 ts = sc.position - target.position;
        const double d_ts = ts.norm();
        const double d_sb = (bs.position - sc.position).norm();
        if (d_ts <= 0.0 || d_sb <= 0.0)
            throw DegenerateGeometryError(
                "scatterer coincides with BS or target");

        PathComponent p;
        p.delay_s = (d_bt + d_ts + d_sb) / kSpeedOfLight;
        // Rate of change of the total path length; only the target moves.
        const Vec3 u_bt = bt / d_bt;
        const Vec3 u_st = (target.position - sc.position) / d_ts;
        const double dpath_dt =
            target.velocity.dot(u_bt) + target.velocity.dot(u_st);
        p.doppler_hz = -carrier_freq_hz * dpath_dt / kSpeedOfLight;

        // Spreading over the outbound leg and the two-segment return leg,
        // matching the LOS 1/d^2 law when the scatterer sits at the target.
        const double amp =
            detail::radar_amplitude_factor(bs, target.rcs_dbsm,
                                           carrier_freq_hz) *
            std::pow(10.0, -sc.reflection_loss_db / 20.0) /
            (d_bt * (d_ts + d_sb));
        p.gain = std::polar(amp, -2.0 * kPi * carrier_freq_hz * p.delay_s);
        paths.push_back(p);
    }
    return paths;
}

/// Target position at a given trajectory step.
inline Vec3 step_trajectory(const Trajectory& traj, int step) {
    if (step < 0 || step >= traj.num_steps)
        throw std::out_of_range("trajectory step out of range");
    return traj.start +
           traj.direction * (traj.speed_mps * traj.step_interval_s * step);
}

}  // namespace mmsense
