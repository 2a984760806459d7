#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aftertau/decomposition.hpp"

#include <cmath>

using namespace aftertau;

TEST_CASE("pN1 integrand") {
    MarketParams m;
    const Characteristics ch = characteristics_of_S(m, 1.0);
    const double lt = closed_form_lambda(m, 1.0).rate;
    CHECK(pN1_integrand(lt, lt, ch, 0.0, {0.0}, 0.5) == 0.0);
    CHECK(pN1_integrand(lt, lt, ch, 0.0, {0.0}, 1.0) == 0.0);

    for (double S : {0.4, 1.0, 3.0}) {
        MarketParams k;
        k.zeta = -0.3;
        k.lambda_ = 4;
        const double l = closed_form_lambda(k, S).rate, f = closed_form_phi(k, S, 0, 0).rate;
        CHECK(std::abs(pN1_integrand(f, l, characteristics_of_S(k, S), 0.0, {0.0}, 0.5)) < 1e-12);
    }

    // substitution with b = mu, c = sigma^2, beta = phi_m1/sigma, one atom at zeta with mass lambda, frozen offline
    const double ph = closed_form_phi(m, 1.0, 0.3, 0.5).rate;
    const double v = pN1_integrand(ph, lt, ch, 0.3 / 0.2, {0.5}, 0.5);
    CHECK(v == doctest::Approx(0.06194723122657903).epsilon(1e-12));

    CHECK_THROWS_AS(pN1_integrand(-20.0, lt, ch, 0.0, {0.0}, 0.5), domain_error);
    CHECK_THROWS_AS(pN1_integrand(ph, lt, ch, 0.0, {}, 0.5), invalid_argument);
}

TEST_CASE("V rates") {
    const Characteristics merton{0.05, 0.04, {}};
    CHECK(V_F_rate(1.25, merton) == doctest::Approx(1.25 * 0.05 - 1.25 * 1.25 * 0.04));
    CHECK(V_F_rate(0.0, merton) == 0.0);
    CHECK(V_1_rate(0.0, merton, 0.7, {}) == 0.0);

    MarketParams m;
    const Characteristics ch = characteristics_of_S(m, 1.0);
    CHECK(V_F_rate(0.5, ch) == doctest::Approx(0.025 - 0.01 + (0.05 / 1.05 - 0.05)).epsilon(1e-14));
    // at the optimum V^F is the rate times the first-order condition
    CHECK(std::abs(V_F_rate(closed_form_lambda(m, 1.0).rate, ch)) < 1e-14);
    CHECK(V_1_rate(0.5, ch, 0.0, {0.0}) == doctest::Approx(V_F_rate(0.5, ch)).epsilon(1e-14));

    CHECK(delta_V_correction(0.0) == 0.0);
    CHECK(delta_V_correction(0.5) == doctest::Approx(-0.5 + std::log(2.0)));
    CHECK_THROWS_AS(delta_V_correction(1.0), domain_error);

    const PathBundle b = simulate_paths(m, make_grid(1.0, 10), 1, 1);
    CHECK((V_F_increments(Eigen::ArrayXd::Zero(10), m, b, 0) == 0.0).all());
}

namespace {

Track samples_for(const MarketParams& m, const HonestTimeModel& model, const PathBundle& b) {
    const ReducedComponents r = reduce_after_tau(model, 1e-8, default_guard(b.grid));
    return decomposition_samples(m, model, r, optimal_rates(m, model, r, b), b);
}

}  // namespace

TEST_CASE("independent tau decomposition") {
    MarketParams m;
    const PathBundle b = simulate_paths(m, make_grid(1.0, 200), 4000, 3);
    const HonestTimeModel t = independent_tau(TauLaw::exp(1.0), b, 4);
    const Track s = samples_for(m, t, b);
    CHECK((s.col(kPremium) == 0.0).all());
    CHECK((s.col(kNpCorrelation) == 0.0).all());
    CHECK((s.col(kInformation) == 0.0).all());
    CHECK((s.col(kCost) >= -1e-12).all());
    const RiskDecomposition d = summarize_decomposition(s);
    CHECK(d.delta_direct.mean <= 3 * d.delta_direct.std_error);
    CHECK(d.consistent());
    CHECK(decompose_increment(m, t, b).consistent());
}

TEST_CASE("tau at the horizon leaves no window") {
    MarketParams m;
    const PathBundle b = simulate_paths(m, make_grid(1.0, 200), 4000, 5);
    const HonestTimeModel t = independent_tau(TauLaw::atoms({1.0}, {1.0}), b, 6);
    const Track s = samples_for(m, t, b);
    CHECK((s.col(kUtilityG) == 0.0).all());
    CHECK((s.col(kDirect) == -s.col(kUtilityF)).all());
    const RiskDecomposition d = summarize_decomposition(s);
    const MCStats gap = mc_stats(Eigen::ArrayXd(s.col(kCost) - s.col(kUtilityF)));
    CHECK(std::abs(gap.mean) <= 3 * gap.std_error);
    CHECK(d.consistent());
}

TEST_CASE("synthetic constants") {
    MarketParams m;
    const PathBundle b = simulate_paths(m, make_grid(1.0, 200), 4000, 9);
    const HonestTimeModel t = bind(synthetic_constant(0.3, 0.5, 0.5), b);
    const Track s = samples_for(m, t, b);
    // the m1 jump is -psi_m1, and the guard stops the integrand at T - eps
    const double info = 0.5 * hE_m1_jump_diffusion_integrand(0.3, -0.5, 1.0) * guarded_steps(b.grid, 0.01) * 0.005;
    for (long p = 0; p < b.n_paths; p += 97) CHECK(s(p, kInformation) == doctest::Approx(info).epsilon(1e-12));
    CHECK((s.col(kInformation) >= 0).all());
    const RiskDecomposition d = summarize_decomposition(s);
    MESSAGE("synthetic z-scores: " << d.consistency_residuals[0] << ", " << d.consistency_residuals[1] << ", "
                                   << d.consistency_residuals[2]);
    CHECK(d.consistent());
}

TEST_CASE("decomposition refuses when existence fails") {
    MarketParams m;
    const PathBundle b = simulate_paths(m, make_grid(1.0, 500), 1000, 2);
    const HonestTimeModel t = argmax_tau(b);
    CHECK_THROWS_AS(decompose_increment(m, t, b), existence_refused);
    try {
        decompose_increment(m, t, b);
    } catch (const existence_refused& e) {
        CHECK(e.report.finite_verdict == Verdict::fail);
    }
    DecomposeOptions force;
    force.force = true;
    const RiskDecomposition d = decompose_increment(m, t, b, force);
    CHECK(d.information_premium_after_tau.mean > 0);
    CHECK(std::string(term_name(kCorrelationRisk)) == "correlation_risk_after_tau");
}
