#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aftertau/after_tau.hpp"
#include "aftertau/honest_time.hpp"

#include <cmath>

using namespace aftertau;

TEST_CASE("g_characteristics of the jump-diffusion") {
    MarketParams m;
    const GCharacteristics gc = g_characteristics(m, 1.0, 0.3, 0.5);
    CHECK(gc.b_G == doctest::Approx(0.05 - 0.04 * (0.3 / 0.2) - 0.1 * 0.5));
    CHECK(gc.b_G == doctest::Approx(-0.06));
    CHECK(gc.c_G == doctest::Approx(0.04));
    REQUIRE(gc.atoms_G.size() == 1);
    CHECK(gc.atoms_G[0].x == doctest::Approx(0.1));
    CHECK(gc.atoms_G[0].w == doctest::Approx(0.5));

    const Characteristics ch = characteristics_of_S(m, 1.3);
    const GCharacteristics id = g_characteristics(ch, 0.0, {0.0});
    CHECK(id.b_G == ch.b);
    CHECK(id.c_G == ch.c);
    CHECK(id.atoms_G[0].x == ch.atoms[0].x);
    CHECK(id.atoms_G[0].w == ch.atoms[0].w);

    CHECK_THROWS_AS(g_characteristics(ch, 0.0, {1.2}), model_invalid);
    CHECK_THROWS_AS(g_characteristics(ch, 0.0, {}), invalid_argument);
    const GCharacteristics off = g_characteristics(ch, 0.0, {0.0}, false);
    CHECK(off.b_G == 0.0);
    CHECK(off.atoms_G.empty());
}

TEST_CASE("transform of the compensated Poisson and Brownian skeletons") {
    MarketParams m;
    m.lambda_ = 3;
    const TimeGrid g = make_grid(1.0, 100);
    const PathBundle b = simulate_paths(m, g, 1, 12);
    const int tau = 40;
    const double psi_m = 0.2, phi_m = 0.1, G = 0.6;
    const Eigen::ArrayXd Gm = Eigen::ArrayXd::Constant(100, G);

    const IncrementPath NF = compensated_poisson(m, b, 0);
    const IncrementPath TN = transform_Ta(NF, Eigen::ArrayXd::Constant(100, psi_m * m.lambda_ * 0.01), Gm, tau);
    const Eigen::ArrayXd total = TN.total();
    for (int k = 0; k < 100; ++k) {
        const double want = k < tau ? 0.0 : b.arrivals(0, k) - m.lambda_ * (1 - psi_m / (1 - G)) * 0.01;
        CHECK(total[k] == doctest::Approx(want).epsilon(1e-12));
    }

    const IncrementPath W = brownian_skeleton(b, 0);
    const IncrementPath TW = transform_Ta(W, Eigen::ArrayXd::Constant(100, phi_m * 0.01), Gm, tau);
    const Eigen::ArrayXd tw = TW.total();
    for (int k = 0; k < 100; ++k) {
        const double want = k < tau ? 0.0 : b.dW(0, k) + phi_m / (1 - G) * 0.01;
        CHECK(tw[k] == doctest::Approx(want).epsilon(1e-12));
    }

    const IncrementPath none = transform_Ta(W, Eigen::ArrayXd::Zero(100), Gm, 101);
    CHECK((none.total() == 0.0).all());
    CHECK_THROWS_AS(transform_Ta(W, Eigen::ArrayXd::Zero(99), Gm, 0), invalid_argument);
}

namespace {

// cumulative T(W) from one step after the argmax to T - 0.01
MCStats argmax_transform_drift(int n, long paths) {
    MarketParams m;
    const PathBundle b = simulate_paths(m, make_grid(1.0, n), paths, 31);
    const HonestTimeModel t = argmax_tau(b);
    const int K = guarded_steps(b.grid, 0.01);
    Eigen::ArrayXd sums(b.n_paths);
    parallel_for(b.n_paths, [&](long p) {
        const IncrementPath W = brownian_skeleton(b, p);
        Eigen::ArrayXd br(n), Gm(n);
        for (int k = 0; k < n; ++k) {
            br[k] = k < K ? t.phi_m(p, k) * b.grid.dt(k) : 0.0;
            Gm[k] = t.G(p, k);
        }
        sums[p] = transform_Ta(W, br, Gm, t.tau_index[p] + 1).total().head(K).sum();
    });
    return mc_stats(sums);
}

}  // namespace

// The compensator behaves like 1/Y near the maximum and the grid maximum understates Y,
// so the sampled drift is biased upward at order sqrt(dt). Check that the bias vanishes at that rate.
TEST_CASE("transformed Brownian drift after the argmax vanishes under refinement") {
    const MCStats coarse = argmax_transform_drift(500, 20000);
    const MCStats fine = argmax_transform_drift(2000, 5000);
    MESSAGE("n=500: " << coarse.mean << " +- " << coarse.std_error << ", n=2000: " << fine.mean << " +- "
                      << fine.std_error);
    CHECK(coarse.mean > 3 * coarse.std_error);
    CHECK(coarse.mean - fine.mean > 3 * std::hypot(coarse.std_error, fine.std_error));
    const double ratio = fine.mean / coarse.mean;
    CHECK(ratio > 0.25);
    CHECK(ratio < 0.75);
}
