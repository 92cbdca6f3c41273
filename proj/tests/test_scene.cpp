#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "mmsense/scene.hpp"

using namespace mmsense;
using Catch::Approx;

namespace {

BsConfig make_bs(Vec3 pos) { return BsConfig{1, pos, 23.0, 0.0}; }

}  // namespace

TEST_CASE("los_path delay is round-trip distance over c0") {
    const BsConfig bs = make_bs({0, 0, 0});
    const TargetState target{{150, 0, 0}, {0, 0, 0}, 7.0};
    const PathComponent p = los_path(bs, target, 3.5e9);
    CHECK(p.delay_s == Approx(300.0 / kSpeedOfLight).epsilon(1e-15));
    CHECK(p.delay_s == Approx(1.0e-6).epsilon(1e-3));
}

TEST_CASE("los_path doppler") {
    const BsConfig bs = make_bs({0, 0, 0});

    SECTION("perpendicular velocity gives zero doppler") {
        const TargetState target{{100, 0, 0}, {0, 12.0, 0}, 7.0};
        CHECK(los_path(bs, target, 3.5e9).doppler_hz ==
              Approx(0.0).margin(1e-12));
    }
    SECTION("approaching at 50 km/h at 3.5 GHz") {
        // Oracle: 2 v_r f_c / c0 evaluated directly.
        const double v_r = 13.89;
        const double expected = 2.0 * v_r * 3.5e9 / kSpeedOfLight;
        const TargetState target{{100, 0, 0}, {-v_r, 0, 0}, 7.0};
        const PathComponent p = los_path(bs, target, 3.5e9);
        CHECK(p.doppler_hz == Approx(expected).epsilon(1e-12));
        CHECK(p.doppler_hz == Approx(324.3243697611632).epsilon(1e-12));
    }
    SECTION("sign flips when velocity is negated") {
        const TargetState fwd{{80, 30, 5}, {3, -4, 1}, 7.0};
        const TargetState rev{{80, 30, 5}, {-3, 4, -1}, 7.0};
        CHECK(los_path(bs, fwd, 3.5e9).doppler_hz ==
              Approx(-los_path(bs, rev, 3.5e9).doppler_hz));
    }
}

TEST_CASE("los_path gain follows the d^-4 law") {
    const BsConfig bs = make_bs({0, 0, 0});
    const TargetState near{{100, 0, 0}, {}, 7.0};
    const TargetState far{{200, 0, 0}, {}, 7.0};
    const double g_near = std::norm(los_path(bs, near, 3.5e9).gain);
    const double g_far = std::norm(los_path(bs, far, 3.5e9).gain);
    CHECK(g_near / g_far == Approx(16.0).epsilon(1e-9));
}

TEST_CASE("los_path gain magnitude matches the radar equation") {
    const BsConfig bs{1, {0, 0, 0}, 23.0, 3.0};
    const TargetState target{{120, 50, 2}, {}, 7.0};
    const double fc = 3.5e9;
    const double d = target.position.norm();
    const double lambda = kSpeedOfLight / fc;
    const double g = std::pow(10.0, 3.0 / 10.0);
    const double sigma = std::pow(10.0, 7.0 / 10.0);
    const double expected2 = g * g * lambda * lambda * sigma /
                             (std::pow(4.0 * kPi, 3.0) * std::pow(d, 4.0));
    const PathComponent p = los_path(bs, target, fc);
    CHECK(std::norm(p.gain) == Approx(expected2).epsilon(1e-12));
    // Carrier phase -2 pi f_c tau (mod 2 pi).
    const double expected_phase =
        std::remainder(-2.0 * kPi * fc * p.delay_s, 2.0 * kPi);
    CHECK(std::arg(p.gain) == Approx(expected_phase).margin(1e-6));
}

TEST_CASE("los_path rejects coincident BS and target") {
    const BsConfig bs = make_bs({5, 5, 5});
    const TargetState target{{5, 5, 5}, {}, 7.0};
    CHECK_THROWS_AS(los_path(bs, target, 3.5e9), DegenerateGeometryError);
}

TEST_CASE("nlos_paths basics") {
    const BsConfig bs = make_bs({0, 0, 0});
    const TargetState target{{100, 0, 0}, {}, 7.0};

    SECTION("no scatterers yields empty list") {
        CHECK(nlos_paths(bs, target, {}, 3.5e9).empty());
    }
    SECTION("collinear scatterer 10 m beyond the target") {
        // Path 100 + 10 + 110 vs LOS 200: excess 20 m -> 66.7 ns.
        const std::vector<Scatterer> sc = {{{110, 0, 0}, 0.0}};
        const auto paths = nlos_paths(bs, target, sc, 3.5e9);
        REQUIRE(paths.size() == 1);
        const double excess =
            paths[0].delay_s - los_path(bs, target, 3.5e9).delay_s;
        CHECK(excess == Approx(20.0 / kSpeedOfLight).epsilon(1e-12));
        CHECK(excess == Approx(66.7e-9).epsilon(1e-3));
    }
    SECTION("static scene has zero doppler") {
        const std::vector<Scatterer> sc = {{{30, 40, 5}, 3.0},
                                           {{80, -20, 10}, 6.0}};
        for (const PathComponent& p : nlos_paths(bs, target, sc, 3.5e9))
            CHECK(p.doppler_hz == Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("nlos delay exceeds los delay for random geometry") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coord(-200.0, 200.0);
    for (int trial = 0; trial < 50; ++trial) {
        const BsConfig bs = make_bs({coord(rng), coord(rng), 10.0});
        const TargetState target{{coord(rng), coord(rng), 1.0},
                                 {coord(rng) / 20, coord(rng) / 20, 0},
                                 7.0};
        if (distance(bs.position, target.position) < 1.0) continue;
        const std::vector<Scatterer> sc = {
            {{coord(rng), coord(rng), 5.0}, 3.0}};
        if (distance(sc[0].position, target.position) < 1.0 ||
            distance(sc[0].position, bs.position) < 1.0)
            continue;
        const double los_delay = los_path(bs, target, 3.5e9).delay_s;
        for (const PathComponent& p : nlos_paths(bs, target, sc, 3.5e9))
            CHECK(p.delay_s >= los_delay);
    }
}

TEST_CASE("path generation is deterministic") {
    const BsConfig bs = make_bs({10, -5, 12});
    const TargetState target{{90, 40, 1}, {5, 2, 0}, 7.0};
    const std::vector<Scatterer> sc = {{{50, 20, 3}, 4.0}};
    const auto a = nlos_paths(bs, target, sc, 3.5e9);
    const auto b = nlos_paths(bs, target, sc, 3.5e9);
    REQUIRE(a.size() == b.size());
    CHECK(a[0].delay_s == b[0].delay_s);
    CHECK(a[0].doppler_hz == b[0].doppler_hz);
    CHECK(a[0].gain == b[0].gain);
    const auto l1 = los_path(bs, target, 3.5e9);
    const auto l2 = los_path(bs, target, 3.5e9);
    CHECK(l1.gain == l2.gain);
}

TEST_CASE("step_trajectory") {
    Trajectory traj;
    traj.start = {40, 2, 1};
    traj.direction = {1, 0, 0};
    traj.speed_mps = 13.89;
    traj.step_interval_s = 0.02;
    traj.num_steps = 10;

    SECTION("step 0 is the start") {
        CHECK(step_trajectory(traj, 0) == traj.start);
    }
    SECTION("step 1 displacement") {
        const Vec3 p = step_trajectory(traj, 1);
        CHECK(p.x - traj.start.x == Approx(0.2778).epsilon(1e-12));
        CHECK(p.y == traj.start.y);
    }
    SECTION("last step") {
        const Vec3 p = step_trajectory(traj, traj.num_steps - 1);
        CHECK(p.x == Approx(40.0 + 13.89 * 0.02 * 9).epsilon(1e-12));
    }
    SECTION("out of range throws") {
        CHECK_THROWS_AS(step_trajectory(traj, -1), std::out_of_range);
        CHECK_THROWS_AS(step_trajectory(traj, 10), std::out_of_range);
    }
}
