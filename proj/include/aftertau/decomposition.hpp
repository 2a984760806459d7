#pragma once

#include "aftertau/deflators.hpp"

namespace aftertau {

// Numeraire-change premium density (per unit time), including the 1 - G_- factor.
double pN1_integrand(double phi_rate, double lambda_rate, const Characteristics& ch, double beta_m1,
                     const std::vector<double>& f_m1_at_atoms, double one_minus_G_minus);

// Drift rates of the two predictable finite-variation parts.
double V_F_rate(double lambda_rate, const Characteristics& ch);
double V_1_rate(double phi_rate, const Characteristics& ch, double beta_m1, const std::vector<double>& f_m1_at_atoms);

// -dV - ln(1 - dV) for a fixed-time jump of V; 0 in markets with continuous A.
double delta_V_correction(double dV);

// Per-step drift increments along one path.
Eigen::ArrayXd V_F_increments(const Eigen::Ref<const Eigen::ArrayXd>& lambda_rate, const MarketParams& m,
                              const PathBundle& b, long p);
Eigen::ArrayXd V_1_increments(const Eigen::Ref<const Eigen::ArrayXd>& phi_rate, const MarketParams& m,
                              const ReducedComponents& r, const PathBundle& b, long p);

enum DecompositionTerm {
    kCost,
    kPremium,
    kNpCorrelation,
    kInformation,
    kCorrelationRisk,
    kDirect,
    kHellingerTotal,  // -correlation - cost + np + information
    kPremiumTotal,    // -cost + premium + np
    kUtilityF,
    kUtilityG,
    kTermCount
};
const char* term_name(int t);

struct RiskDecomposition {
    MCStats cost_of_late_investment, numeraire_change_premium, npF_correlation, information_premium_after_tau,
        correlation_risk_after_tau, delta_direct;
    MCStats hellinger_total, premium_total, utility_F, utility_G;
    // differences of the totals with per-path (joint) std-errors
    MCStats gap_hellinger_direct, gap_premium_direct, gap_hellinger_premium;
    std::vector<double> consistency_residuals;  // |gap| / joint SE, same order as the gaps
    long n_paths = 0;

    bool consistent(double z = 3.0) const;
};

// n_paths x kTermCount per-path contributions.
Track decomposition_samples(const MarketParams& m, const HonestTimeModel& model, const ReducedComponents& r,
                            const RateTracks& rates, const PathBundle& b);
RiskDecomposition summarize_decomposition(const Track& samples);

struct existence_refused : std::runtime_error {
    ExistenceReport report;
    existence_refused(const std::string& what, ExistenceReport r) : std::runtime_error(what), report(std::move(r)) {}
};

struct DecomposeOptions {
    double clamp_floor = 1e-8;
    double guard_epsilon = 0;  // 0: default guard of the grid
    bool force = false;        // compute despite a failed existence verdict (diagnostics only)
};

RiskDecomposition decompose_increment(const MarketParams& m, const HonestTimeModel& model, const PathBundle& b,
                                      const DecomposeOptions& opt = {});

}  // namespace aftertau
