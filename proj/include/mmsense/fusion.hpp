#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmsense/constants.hpp"
#include "mmsense/geometry.hpp"
#include "mmsense/periodogram.hpp"

namespace mmsense {

enum class Algorithm { ML, MAP, NLLS };

inline std::string algorithm_name(Algorithm alg) {
    switch (alg) {
        case Algorithm::ML: return "ml";
        case Algorithm::MAP: return "map";
        case Algorithm::NLLS: return "nlls";
    }
    throw std::logic_error("unknown algorithm");
}

inline Algorithm parse_algorithm(const std::string& name) {
    if (name == "ml") return Algorithm::ML;
    if (name == "map") return Algorithm::MAP;
    if (name == "nlls") return Algorithm::NLLS;
    throw std::invalid_argument("unknown fusion algorithm: " + name);
}

/// Axis-aligned search box in meters.
struct SearchRegion {
    Vec3 min;
    Vec3 max;

    bool contains(const Vec3& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
               p.z >= min.z && p.z <= max.z;
    }
    Vec3 clamp(const Vec3& p) const {
        return {std::clamp(p.x, min.x, max.x), std::clamp(p.y, min.y, max.y),
                std::clamp(p.z, min.z, max.z)};
    }
};

struct FusionConfig {
    Algorithm algorithm = Algorithm::NLLS;
    double epsilon_m = 1e-3;  // MAP prior stabilizer
    SearchRegion search_region;
    std::optional<double> fixed_z;
    int grid_starts_per_axis = 20;
    int max_iterations = 200;
    double convergence_tol_m = 1e-4;
};

struct PositionEstimate {
    Vec3 position;
    double objective_value = 0.0;
    Algorithm algorithm = Algorithm::NLLS;
    bool converged = false;
    int num_measurements_used = 0;
};

struct NoMeasurementError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingularGradientError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Drops non-detections and scales the remaining weights to sum to 1.
inline std::vector<BsMeasurement> normalize_weights(
    const std::vector<BsMeasurement>& measurements) {
    std::vector<BsMeasurement> out;
    double total = 0.0;
    for (const BsMeasurement& m : measurements)
        if (m.detected && m.weight > 0.0) {
            out.push_back(m);
            total += m.weight;
        }
    if (out.empty())
        throw NoMeasurementError("no detected measurement with positive weight");
    for (BsMeasurement& m : out) m.weight /= total;
    return out;
}

struct ObjectiveValue {
    double value = 0.0;
    Vec3 gradient;
};

namespace detail {

inline double range_to(const Vec3& x, const BsMeasurement& m) {
    const double r = (x - m.bs_position).norm();
    if (r < 1e-12)
        throw SingularGradientError("evaluation point coincides with a BS");
    return r;
}

}  // namespace detail

/// Weighted Gaussian log-likelihood of the range residuals. The
/// normalization constant is the sigma-free 1/sqrt(2 pi).
inline ObjectiveValue ll_objective(
    const Vec3& x, const std::vector<BsMeasurement>& measurements) {
    static const double kLogNorm = std::log(1.0 / std::sqrt(2.0 * kPi));
    ObjectiveValue out;
    for (const BsMeasurement& m : measurements) {
        const double r = detail::range_to(x, m);
        const double resid = m.range_m - r;
        out.value += m.weight * (kLogNorm -
                                 resid * resid / (2.0 * m.variance_m2));
        out.gradient += (m.weight * resid / m.variance_m2 / r) *
                        (x - m.bs_position);
    }
    return out;
}

/// Log-MAP: log-likelihood plus the 1/(r + epsilon) range prior.
inline ObjectiveValue lmap_objective(
    const Vec3& x, const std::vector<BsMeasurement>& measurements,
    double epsilon_m) {
    ObjectiveValue out = ll_objective(x, measurements);
    for (const BsMeasurement& m : measurements) {
        const double r = detail::range_to(x, m);
        out.value -= m.weight * std::log(r + epsilon_m);
        out.gradient += (-m.weight / (r + epsilon_m) / r) *
                        (x - m.bs_position);
    }
    return out;
}

/// Weighted squared range residuals (minimized).
inline ObjectiveValue nlls_objective(
    const Vec3& x, const std::vector<BsMeasurement>& measurements) {
    ObjectiveValue out;
    for (const BsMeasurement& m : measurements) {
        const double r = detail::range_to(x, m);
        const double resid = m.range_m - r;
        out.value += m.weight * resid * resid;
        out.gradient += (2.0 * m.weight * (r - m.range_m) / r) *
                        (x - m.bs_position);
    }
    return out;
}

namespace detail {

// Objective recast as a minimization problem (ML/MAP negated).
inline ObjectiveValue minimization_objective(
    const Vec3& x, const std::vector<BsMeasurement>& measurements,
    const FusionConfig& config) {
    ObjectiveValue v;
    switch (config.algorithm) {
        case Algorithm::ML:
            v = ll_objective(x, measurements);
            v.value = -v.value;
            v.gradient = -v.gradient;
            break;
        case Algorithm::MAP:
            v = lmap_objective(x, measurements, config.epsilon_m);
            v.value = -v.value;
            v.gradient = -v.gradient;
            break;
        case Algorithm::NLLS:
            v = nlls_objective(x, measurements);
            break;
    }
    return v;
}

inline bool near_any_bs(const Vec3& p,
                        const std::vector<BsMeasurement>& measurements) {
    for (const BsMeasurement& m : measurements)
        if ((p - m.bs_position).norm() < 1e-6) return true;
    return false;
}

}  // namespace detail

/// Multi-start gradient descent (ascent for ML/MAP) over the search region:
/// deterministic lattice seeding, Armijo backtracking line search, clamping
/// to the region, best converged point wins.
inline PositionEstimate estimate_position(
    const std::vector<BsMeasurement>& raw_measurements,
    const FusionConfig& config) {
    const std::vector<BsMeasurement> measurements =
        normalize_weights(raw_measurements);
    const SearchRegion& region = config.search_region;
    if (region.min.x > region.max.x || region.min.y > region.max.y ||
        region.min.z > region.max.z)
        throw std::invalid_argument("empty search region");

    const int n_axis = config.grid_starts_per_axis;
    auto axis_value = [n_axis](double lo, double hi, int i) {
        return n_axis > 1 ? lo + (hi - lo) * i / (n_axis - 1)
                          : 0.5 * (lo + hi);
    };

    struct Start {
        Vec3 point;
        double value;
    };
    std::vector<Start> starts;
    const bool flat = config.fixed_z.has_value();
    const int nz = flat ? 1 : n_axis;
    for (int ix = 0; ix < n_axis; ++ix)
        for (int iy = 0; iy < n_axis; ++iy)
            for (int iz = 0; iz < nz; ++iz) {
                Vec3 p{axis_value(region.min.x, region.max.x, ix),
                       axis_value(region.min.y, region.max.y, iy),
                       flat ? *config.fixed_z
                            : axis_value(region.min.z, region.max.z, iz)};
                if (detail::near_any_bs(p, measurements)) continue;
                starts.push_back(
                    {p, detail::minimization_objective(p, measurements, config)
                            .value});
            }
    if (starts.empty()) throw std::invalid_argument("no usable lattice start");

    constexpr int kRefinedStarts = 5;
    const int refine_count =
        std::min<int>(kRefinedStarts, static_cast<int>(starts.size()));
    std::partial_sort(starts.begin(), starts.begin() + refine_count,
                      starts.end(),
                      [](const Start& a, const Start& b) {
                          return a.value < b.value;
                      });

    auto project = [&](Vec3 p) {
        p = region.clamp(p);
        if (flat) p.z = *config.fixed_z;
        return p;
    };

    Vec3 best_point = starts.front().point;
    double best_value = starts.front().value;
    bool best_converged = false;

    for (int s = 0; s < refine_count; ++s) {
        Vec3 x = starts[s].point;
        ObjectiveValue cur =
            detail::minimization_objective(x, measurements, config);
        bool converged = false;
        double t_init = 1.0;
        for (int it = 0; it < config.max_iterations; ++it) {
            Vec3 dir = -cur.gradient;
            if (flat) dir.z = 0.0;
            const double gnorm = dir.norm();
            if (gnorm == 0.0) {
                converged = true;
                break;
            }
            // Armijo backtracking on the projected step; the initial step
            // adapts to the previously accepted one.
            double t = t_init;
            bool accepted = false;
            Vec3 x_new;
            ObjectiveValue next;
            while (t > 1e-14) {
                x_new = project(x + dir * t);
                const Vec3 step = x_new - x;
                if (step.norm() > 0.0) {
                    next = detail::minimization_objective(x_new, measurements,
                                                          config);
                    if (next.value <=
                        cur.value + 1e-4 * cur.gradient.dot(step)) {
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if (!accepted) {
                converged = true;  // no descent step available
                break;
            }
            t_init = std::min(2.0 * t, 1e6);
            const double step_norm = (x_new - x).norm();
            x = x_new;
            cur = next;
            if (step_norm < config.convergence_tol_m) {
                converged = true;
                break;
            }
        }
        // Compass-search polish: axis moves with a shrinking step make the
        // point stationary to well below the tolerance even where the
        // gradient phase zigzags.
        {
            double h = 1.0;
            const double h_min = config.convergence_tol_m * 1e-2;
            int evals = 0;
            while (h > h_min && evals < 20000) {
                bool improved = false;
                for (int axis = 0; axis < (flat ? 2 : 3); ++axis)
                    for (double sgn : {1.0, -1.0}) {
                        Vec3 p = x;
                        (axis == 0 ? p.x : axis == 1 ? p.y : p.z) += sgn * h;
                        p = project(p);
                        if ((p - x).norm() == 0.0) continue;
                        const ObjectiveValue v =
                            detail::minimization_objective(p, measurements,
                                                           config);
                        ++evals;
                        if (v.value < cur.value) {
                            x = p;
                            cur = v;
                            improved = true;
                        }
                    }
                if (!improved) h *= 0.5;
            }
            if (h <= h_min) converged = true;
        }
        if (cur.value < best_value) {
            best_value = cur.value;
            best_point = x;
            best_converged = converged;
        } else if (cur.value == best_value && converged) {
            best_converged = true;
        }
    }

    PositionEstimate est;
    est.position = project(best_point);
    est.algorithm = config.algorithm;
    est.converged = best_converged;
    est.num_measurements_used = static_cast<int>(measurements.size());
    // Report the objective in its natural sense (max for ML/MAP).
    est.objective_value = config.algorithm == Algorithm::NLLS
                              ? best_value
                              : -best_value;
    return est;
}

}  // namespace mmsense
