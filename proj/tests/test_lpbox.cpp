#include <cmath>
#include <doctest.h>

#include "admp/errors.hpp"
#include "admp/lpbox.hpp"
#include "admp/oracles.hpp"
#include "admp/rng.hpp"

using namespace admp;

TEST_CASE("box-simplex projection matches the enumeration oracle on the worked example") {
    const auto z = project_box_simplex({0.9, 0.5, 0.1}, 1);
    CHECK(z[0] == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(z[1] == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(z[2] == doctest::Approx(0.0).epsilon(1e-9));
    const auto want = oracles::enum_project_box_simplex({0.9, 0.5, 0.1}, 1);
    for (int i = 0; i < 3; ++i) CHECK(z[i] == doctest::Approx(want[i]).epsilon(1e-9));
}

TEST_CASE("box-simplex projection fixes feasible points and degenerate targets") {
    const std::vector<double> feasible = {0.25, 0.75, 1.0, 0.0};
    const auto z = project_box_simplex(feasible, 2);
    for (int i = 0; i < 4; ++i) CHECK(z[i] == doctest::Approx(feasible[i]).epsilon(1e-9));

    const auto all = project_box_simplex({-3.0, 0.2, 9.0}, 3);
    CHECK(all == std::vector<double>{1.0, 1.0, 1.0});
    const auto none = project_box_simplex({-3.0, 0.2, 9.0}, 0);
    CHECK(none == std::vector<double>{0.0, 0.0, 0.0});

    CHECK_THROWS_AS(project_box_simplex({0.5, 0.5}, -1), InfeasibleError);
    CHECK_THROWS_AS(project_box_simplex({0.5, 0.5}, 3), InfeasibleError);
}

TEST_CASE("box-simplex projection agrees with the oracle on 1000 random instances") {
    Rng rng(424242);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const int n = 2 + static_cast<int>(rng.uniform_int(7));
        std::vector<double> v(static_cast<std::size_t>(n));
        for (double& x : v) x = rng.uniform(-2.0, 3.0);
        const int t = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n) + 1));
        const auto got = project_box_simplex(v, t);
        const auto want = oracles::enum_project_box_simplex(v, t);
        double sum = 0.0;
        for (int k = 0; k < n; ++k) {
            worst = std::max(worst, std::abs(got[static_cast<std::size_t>(k)] -
                                             want[static_cast<std::size_t>(k)]));
            CHECK(got[static_cast<std::size_t>(k)] >= 0.0);
            CHECK(got[static_cast<std::size_t>(k)] <= 1.0);
            sum += got[static_cast<std::size_t>(k)];
        }
        CHECK(sum == doctest::Approx(static_cast<double>(t)).epsilon(1e-9));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("sphere projection satisfies the worked example and the radius invariant") {
    const auto z = project_sphere({2.0, 0.0});
    CHECK(z[0] == doctest::Approx(1.17082).epsilon(1e-5));
    CHECK(z[1] == doctest::Approx(0.27639).epsilon(1e-5));

    // dense angular sweep: no sphere point may be meaningfully closer
    const double radius = std::sqrt(2.0) / 2.0;
    const double dz = std::hypot(z[0] - 2.0, z[1] - 0.0);
    double best = 1e300;
    for (int i = 0; i < 200000; ++i) {
        const double a = 2.0 * 3.14159265358979323846 * i / 200000.0;
        const double px = 0.5 + radius * std::cos(a), py = 0.5 + radius * std::sin(a);
        best = std::min(best, std::hypot(px - 2.0, py - 0.0));
    }
    CHECK(dz <= best + 1e-8);

    const auto center = project_sphere({0.5, 0.5, 0.5, 0.5});
    CHECK(center[0] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(center[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(center[2] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(center[3] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("sphere projection is idempotent and keeps the radius on 1000 random instances") {
    Rng rng(99);
    for (int i = 0; i < 1000; ++i) {
        const int n = 2 + static_cast<int>(rng.uniform_int(7));
        std::vector<double> v(static_cast<std::size_t>(n));
        for (double& x : v) x = rng.uniform(-2.0, 3.0);
        const auto z = project_sphere(v);
        double norm2 = 0.0;
        for (double x : z) norm2 += (x - 0.5) * (x - 0.5);
        CHECK(norm2 == doctest::Approx(0.25 * n).epsilon(1e-9));
        const auto z2 = project_sphere(z);
        for (std::size_t k = 0; k < z.size(); ++k)
            CHECK(z2[k] == doctest::Approx(z[k]).epsilon(1e-9));
    }
}

TEST_CASE("admm refresh leaves binary feasible masks fixed") {
    const std::vector<double> m = {1.0, 0.0, 1.0, 0.0};
    AdmmState s = init_admm_state(4, 2, 1.0, m);
    const AdmmState next = admm_refresh(s, m);
    for (int i = 0; i < 4; ++i) {
        CHECK(next.z1[static_cast<std::size_t>(i)] == doctest::Approx(m[static_cast<std::size_t>(i)]).epsilon(1e-9));
        CHECK(next.z2[static_cast<std::size_t>(i)] == doctest::Approx(m[static_cast<std::size_t>(i)]).epsilon(1e-9));
        CHECK(next.u1[static_cast<std::size_t>(i)] == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(next.u2[static_cast<std::size_t>(i)] == doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("admm refresh reproduces the projection example and keeps invariants") {
    AdmmState s = init_admm_state(3, 1, 1.0, {0.9, 0.5, 0.1});
    const AdmmState next = admm_refresh(s, {0.9, 0.5, 0.1});
    CHECK(next.z1[0] == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(next.z1[1] == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(next.z1[2] == doctest::Approx(0.0).epsilon(1e-9));

    Rng rng(1717);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(9));
        const int t = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
        std::vector<double> m(static_cast<std::size_t>(n));
        for (double& x : m) x = rng.uniform(-0.5, 1.5);
        AdmmState state = init_admm_state(n, t, 1.0, m);
        for (double& x : state.u1) x = rng.uniform(-0.3, 0.3);
        for (double& x : state.u2) x = rng.uniform(-0.3, 0.3);
        const AdmmState out = admm_refresh(state, m);
        double sum = 0.0, norm2 = 0.0;
        for (int i = 0; i < n; ++i) {
            CHECK(out.z1[static_cast<std::size_t>(i)] >= 0.0);
            CHECK(out.z1[static_cast<std::size_t>(i)] <= 1.0);
            sum += out.z1[static_cast<std::size_t>(i)];
            norm2 += (out.z2[static_cast<std::size_t>(i)] - 0.5) *
                     (out.z2[static_cast<std::size_t>(i)] - 0.5);
        }
        CHECK(sum == doctest::Approx(static_cast<double>(t)).epsilon(1e-9));
        CHECK(norm2 == doctest::Approx(0.25 * n).epsilon(1e-9));
    }

    CHECK_THROWS_AS(admm_refresh(s, {0.1, std::nan(""), 0.2}), NumericError);
}

TEST_CASE("penalty gradient follows the augmented terms") {
    AdmmState s = init_admm_state(3, 2, 1.5, {1.0, 1.0, 0.0});
    // m = z1 = z2 with zero duals: gradient vanishes
    const std::vector<double> m = s.z1;
    AdmmState aligned = s;
    aligned.z2 = m;
    const auto g0 = admm_penalty_gradient(aligned, m);
    for (double g : g0) CHECK(g == doctest::Approx(0.0));

    // rho = 0 leaves only the duals
    AdmmState dual_only;
    dual_only.n = 2;
    dual_only.t = 1;
    dual_only.rho = 0.0;
    dual_only.z1 = {0.3, 0.4};
    dual_only.z2 = {0.1, 0.9};
    dual_only.u1 = {0.25, -0.5};
    dual_only.u2 = {1.0, 2.0};
    const auto g1 = admm_penalty_gradient(dual_only, {0.6, 0.6});
    CHECK(g1[0] == doctest::Approx(1.25));
    CHECK(g1[1] == doctest::Approx(1.5));
}

TEST_CASE("penalty gradient matches finite differences of the augmented terms") {
    Rng rng(555);
    AdmmState s = init_admm_state(5, 3, 1.7, {0.2, 0.9, 0.4, 0.1, 0.8});
    for (double& x : s.u1) x = rng.uniform(-0.5, 0.5);
    for (double& x : s.u2) x = rng.uniform(-0.5, 0.5);
    std::vector<double> m(5);
    for (double& x : m) x = rng.uniform(-0.5, 1.5);

    auto augmented = [&s](const std::vector<double>& mm) {
        double acc = 0.0;
        for (std::size_t i = 0; i < mm.size(); ++i) {
            acc += s.u1[i] * (mm[i] - s.z1[i]) + s.u2[i] * (mm[i] - s.z2[i]);
            acc += 0.5 * s.rho * ((mm[i] - s.z1[i]) * (mm[i] - s.z1[i]) +
                                  (mm[i] - s.z2[i]) * (mm[i] - s.z2[i]));
        }
        return acc;
    };
    const auto analytic = admm_penalty_gradient(s, m);
    const auto fd = oracles::finite_diff_gradient(augmented, m);
    CHECK(oracles::gradient_rel_error(analytic, fd) < 1e-6);
}

TEST_CASE("binary program solver hits the worked example and trivial cases") {
    const auto r = solve_binary_program({0.9, 0.2, 0.8}, 2);
    CHECK(r.solution == std::vector<double>{1.0, 0.0, 1.0});

    const auto all = solve_binary_program({-1.0, 5.0, 0.3}, 3);
    CHECK(all.solution == std::vector<double>{1.0, 1.0, 1.0});

    CHECK_THROWS_AS(solve_binary_program({0.5, 0.5}, 0), InfeasibleError);
    CHECK_THROWS_AS(solve_binary_program(std::vector<double>(25, 0.5), 2), ConfigError);
}

TEST_CASE("binary program solver matches exhaustive search on 200 random instances") {
    const auto suite = oracles::run_binary_program_suite(200, 31337, 0.95);
    CHECK(suite.failed == 0);
    CHECK(suite.checked == 200);
}

TEST_CASE("binary program output is feasible even when stopped early") {
    BinaryProgramConfig cfg;
    cfg.max_iters = 1;  // force non-convergence
    const auto r = solve_binary_program({0.51, 0.49, 0.52, 0.48, 0.5}, 2, cfg);
    CHECK_FALSE(r.converged);
    int ones = 0;
    for (double v : r.solution) {
        CHECK((v == 0.0 || v == 1.0));
        if (v == 1.0) ++ones;
    }
    CHECK(ones == 2);
}
