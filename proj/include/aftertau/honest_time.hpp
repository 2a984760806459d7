#pragma once

#include "aftertau/market.hpp"

#include <optional>

namespace aftertau {

enum class TauKind { independent, brownian_argmax, synthetic };
const char* to_string(TauKind k);

// Law of a tau independent of the market.
struct TauLaw {
    enum Kind { exponential, discrete } kind = exponential;
    double rate = 1.0;
    std::vector<double> times, probs;  // discrete atoms

    static TauLaw exp(double rate);
    static TauLaw atoms(std::vector<double> times, std::vector<double> probs);
    double survival(double t) const;  // P(tau > t)
    double sample(std::mt19937_64& eng) const;
};

using StateFn = std::function<double(double t, double S_minus)>;

struct SyntheticSpec {
    StateFn phi_m1, psi_m1, G_minus;
};

// Tracks live on grid points. The left limit G_- over step k is G(p, k).
// Increments k >= tau_index[p] are after tau; a tau beyond the horizon gets n_steps + 1.
struct HonestTimeModel {
    TauKind kind = TauKind::independent;
    TimeGrid grid;
    Track G, phi_m, psi_m;
    std::vector<int> tau_index;
    std::vector<double> tau_time;
    std::optional<SyntheticSpec> synthetic;
    Track exact_phi_m1, exact_psi_m1;  // synthetic only, filled by bind

    bool formula_only() const { return kind == TauKind::synthetic; }
    bool bound() const { return G.size() > 0; }
    double G_minus(long p, int k) const { return G(p, k); }
};

HonestTimeModel independent_tau(const TauLaw& law, const PathBundle& b, std::uint64_t seed);
HonestTimeModel argmax_tau(const PathBundle& b);
HonestTimeModel synthetic_model(StateFn phi_m1, StateFn psi_m1, StateFn G_minus);
HonestTimeModel synthetic_constant(double phi_m1, double psi_m1, double G_minus);
// Evaluates a synthetic model on the states of a bundle; the whole grid counts as after tau.
HonestTimeModel bind(const HonestTimeModel& synthetic, const PathBundle& b);

inline double default_guard(const TimeGrid& g) { return std::max(2.0 * g.T / g.n_steps, 1e-4 * g.T); }
// Steps whose start time exceeds T - eps are outside the guarded window.
int guarded_steps(const TimeGrid& g, double eps);

struct ReducedComponents {
    Track phi_m1, psi_m1, one_minus_G_minus;  // n_paths x n_steps
    double clamp_floor = 1e-8;
    long clamp_count = 0;
};

// guard_epsilon > 0 zeroes the reduced components on steps past T - guard_epsilon.
ReducedComponents reduce_after_tau(const HonestTimeModel& model, double clamp_floor = 1e-8, double guard_epsilon = 0.0);

struct GtmResult {
    Eigen::ArrayXd max_residual;           // per path, NaN/inf when 1 - G at tau vanishes
    Eigen::ArrayXd anchored_max_residual;  // same identity anchored one step after tau
    long empty_windows = 0;
};

GtmResult gtm_identity_residual(const HonestTimeModel& model, const MarketParams& m, const PathBundle& b,
                                double clamp_floor = 1e-8);

// path_id, t, W, N, S, M, tau_t, G, phi_m, psi_m
void write_paths_csv(std::ostream& os, const PathBundle& b, const HonestTimeModel& model);

}  // namespace aftertau
