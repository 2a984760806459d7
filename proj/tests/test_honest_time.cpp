#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aftertau/honest_time.hpp"

#include <cmath>
#include <sstream>

using namespace aftertau;

namespace {

PathBundle hand_bundle(const TimeGrid& g, const std::vector<double>& w) {
    PathBundle b;
    b.grid = g;
    b.n_paths = 1;
    b.W.resize(1, g.n_steps + 1);
    b.M.resize(1, g.n_steps + 1);
    b.S = Track::Ones(1, g.n_steps + 1);
    b.N = CountTrack::Zero(1, g.n_steps + 1);
    double run = 0;
    for (int k = 0; k <= g.n_steps; ++k) {
        b.W(0, k) = w[k];
        run = std::max(run, w[k]);
        b.M(0, k) = run;
    }
    return b;
}

}  // namespace

TEST_CASE("independent tau") {
    MarketParams m;
    const PathBundle b = simulate_paths(m, make_grid(1.0, 10), 20, 1);
    const HonestTimeModel t = independent_tau(TauLaw::exp(1.0), b, 2);
    for (long p = 0; p < 20; ++p) CHECK(t.G(p, 5) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
    CHECK((t.phi_m == 0.0).all());
    CHECK((t.psi_m == 0.0).all());
    CHECK_THROWS_AS(independent_tau(TauLaw::atoms({2.0}, {1.0}), b, 2), invalid_argument);
    CHECK_THROWS_AS(independent_tau(TauLaw::atoms({0.0}, {1.0}), b, 2), invalid_argument);

    const ReducedComponents r = reduce_after_tau(t);
    CHECK((r.phi_m1 == 0.0).all());
    CHECK((r.psi_m1 == 0.0).all());
}

TEST_CASE("argmax tau on hand-built paths") {
    const TimeGrid g = make_grid(1.0, 4);
    const double d = std::sqrt(0.5);
    const PathBundle b = hand_bundle(g, {0.0, 0.2, 0.5, 0.5 - d, 0.1});
    const HonestTimeModel t = argmax_tau(b);
    CHECK(t.tau_index[0] == 2);
    CHECK(t.G(0, 2) == 1.0);
    CHECK(t.G(0, 1) == 1.0);
    CHECK(t.G(0, 3) == doctest::Approx(std::erfc((d / std::sqrt(0.25)) / std::sqrt(2.0))));
    CHECK((t.psi_m == 0.0).all());

    // Y = sqrt(T - t) gives 2 * Phi_bar(1)
    const PathBundle c = hand_bundle(g, {0.0, 0.5, 0.5 - d, 0.2, 0.1});
    CHECK(argmax_tau(c).G(0, 2) == doctest::Approx(0.31731050786291415).epsilon(1e-12));

    // ties break to the earliest index
    const PathBundle e = hand_bundle(g, {0.0, 0.3, 0.3, 0.1, 0.3});
    CHECK(argmax_tau(e).tau_index[0] == 1);
}

TEST_CASE("argmax invariants on simulated paths") {
    MarketParams m;
    const PathBundle b = simulate_paths(m, make_grid(1.0, 400), 200, 5);
    const HonestTimeModel t = argmax_tau(b);
    CHECK((t.G >= 0.0).all());
    CHECK((t.G <= 1.0).all());
    for (long p = 0; p < 200; ++p)
        for (int k = 0; k <= 400; ++k) {
            if (b.M(p, k) == b.W(p, k)) CHECK(t.G(p, k) == 1.0);
            if (k > t.tau_index[p]) CHECK(t.G(p, k) < 1.0);
        }
}

TEST_CASE("argmax G moves like phi_m times dW away from the maximum") {
    MarketParams m;
    const int n = 1000, k = 500;
    const PathBundle b = simulate_paths(m, make_grid(1.0, n), 20000, 17);
    const HonestTimeModel t = argmax_tau(b);
    double sxy = 0, sxx = 0;
    std::vector<std::pair<double, double>> xy;
    for (long p = 0; p < b.n_paths; ++p) {
        const double Y = b.M(p, k) - b.W(p, k);
        if (Y < 0.3 || Y > 0.8) continue;
        const double x = b.dW(p, k), y = (t.G(p, k + 1) - t.G(p, k)) / t.phi_m(p, k);
        xy.push_back({x, y});
        sxy += x * y;
        sxx += x * x;
    }
    REQUIRE(xy.size() > 1000);
    const double slope = sxy / sxx;
    double rss = 0;
    for (auto [x, y] : xy) rss += (y - slope * x) * (y - slope * x);
    const double se = std::sqrt(rss / double(xy.size() - 1) / sxx);
    CHECK(std::abs(slope - 1.0) <= 3 * se);
}

TEST_CASE("synthetic models") {
    CHECK_THROWS_AS(synthetic_constant(0.0, -1.2, 0.5), invalid_argument);
    const HonestTimeModel s = synthetic_constant(0.3, 0.5, 0.5);
    CHECK(s.formula_only());
    MarketParams m;
    const PathBundle b = simulate_paths(m, make_grid(1.0, 20), 3, 1);
    const HonestTimeModel bound = bind(s, b);
    const ReducedComponents r = reduce_after_tau(bound);
    CHECK((r.phi_m1 == 0.3).all());
    CHECK((r.psi_m1 == 0.5).all());
    CHECK((r.one_minus_G_minus == 0.5).all());
    CHECK_THROWS_AS(gtm_identity_residual(bound, m, b), unsupported_operation);

    const ReducedComponents z = reduce_after_tau(bind(synthetic_constant(0, 0, 0.5), b));
    CHECK((z.phi_m1 == 0.0).all());
    CHECK((z.psi_m1 == 0.0).all());
}

TEST_CASE("reduce_after_tau division, indicator, clamp and guard") {
    HonestTimeModel h;
    h.grid = make_grid(1.0, 4);
    h.G = Track(1, 5);
    h.G << 0.5, 1.0, 1.0 - 1e-12, 0.5, 0.5;
    h.phi_m = Track::Constant(1, 5, 0.2);
    h.psi_m = Track::Zero(1, 5);
    const ReducedComponents r = reduce_after_tau(h, 1e-8);
    CHECK(r.phi_m1(0, 0) == doctest::Approx(0.4));
    CHECK(r.phi_m1(0, 1) == 0.0);
    CHECK(r.phi_m1(0, 2) == doctest::Approx(0.2 / 1e-8));
    CHECK(r.clamp_count == 1);
    // guard of 0.5 keeps only steps starting at or before T - 0.5
    const ReducedComponents gd = reduce_after_tau(h, 1e-8, 0.5);
    CHECK(gd.phi_m1(0, 0) != 0.0);
    CHECK(gd.phi_m1(0, 3) == 0.0);
    CHECK_THROWS_AS(reduce_after_tau(h, 0.1), invalid_argument);
}

TEST_CASE("guard helpers") {
    const TimeGrid g = make_grid(1.0, 1000);
    CHECK(default_guard(g) == doctest::Approx(0.002));
    CHECK(guarded_steps(g, 0.002) == 999);
    CHECK(guarded_steps(g, 0.0) == 1000);
}

TEST_CASE("GTM identity residual for independent tau is the survival ratio") {
    MarketParams m;
    const PathBundle b = simulate_paths(m, make_grid(1.0, 50), 40, 3);
    const HonestTimeModel t = independent_tau(TauLaw::exp(1.0), b, 9);
    const GtmResult res = gtm_identity_residual(t, m, b);
    for (long p = 0; p < 40; ++p) {
        const int j = t.tau_index[p];
        const double oracle = j >= 50 ? 0.0 : std::abs((1.0 - t.G(p, 50)) / (1.0 - t.G(p, j)) - 1.0);
        CHECK(res.max_residual[p] == doctest::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("GTM residual is zero when tau sits on the last grid step") {
    MarketParams m;
    const PathBundle b = simulate_paths(m, make_grid(1.0, 4), 1, 3);
    HonestTimeModel h;
    h.kind = TauKind::independent;
    h.grid = b.grid;
    h.G = Track::Constant(1, 5, 0.3);
    h.phi_m = h.psi_m = Track::Zero(1, 5);
    h.tau_index = {4};
    h.tau_time = {1.0};
    const GtmResult r = gtm_identity_residual(h, m, b);
    CHECK(r.max_residual[0] == 0.0);
    CHECK(r.empty_windows == 1);
}

TEST_CASE("paths csv carries tau columns") {
    MarketParams m;
    const PathBundle b = simulate_paths(m, make_grid(1.0, 2), 1, 1);
    const HonestTimeModel t = independent_tau(TauLaw::exp(1.0), b, 1);
    std::ostringstream os;
    write_paths_csv(os, b, t);
    CHECK(os.str().rfind("path_id,t,W,N,S,M,tau_t,G,phi_m,psi_m\n", 0) == 0);
}
