#pragma once

#include "aftertau/hellinger.hpp"

namespace aftertau {

// Wealth of a rate (per unit of S) traded after tau; 1 up to and including tau.
IncrementPath wealth_increments(const Eigen::Ref<const Eigen::ArrayXd>& rate, const MarketParams& m,
                                const PathBundle& b, long p, int tau_index);
Track wealth_after_tau(const Track& rate, const MarketParams& m, const PathBundle& b, const std::vector<int>& tau_index);

struct DeflatorPath {
    Track Z;
    std::vector<IncrementPath> K_increments;
    const char* construction = "jump_diffusion_KG";
};

// K^G = -phi sigma S_- . T(W) - phi zeta S_-/(1 + phi zeta S_-) . T(N^F), Z = E(K^G).
DeflatorPath build_KG(const Track& phi_rate, const MarketParams& m, const HonestTimeModel& model,
                      const ReducedComponents& r, const PathBundle& b, bool keep_increments = false);

// max_k |W^rate_k Z_k - 1| with Z the deflator of the optimal rate
double duality_residual_path(const Track& rate, const Track& optimal, const MarketParams& m,
                             const HonestTimeModel& model, const ReducedComponents& r, const PathBundle& b, long p);
Eigen::ArrayXd duality_residual(const Track& rate, const Track& optimal, const MarketParams& m,
                                const HonestTimeModel& model, const ReducedComponents& r, const PathBundle& b);

struct SupermartingaleCheck {
    std::string candidate;
    std::vector<double> times;
    std::vector<MCStats> ratio;
    std::vector<double> worst_increase_z;  // (mean increase)/(joint SE) per consecutive pair
    Verdict verdict = Verdict::pass;
};

std::vector<int> checkpoint_indices(const TimeGrid& g, const std::vector<double>& times);

// n_paths x checkpoints of W^candidate / W^optimal; throws domain_error on an inadmissible candidate.
Track supermartingale_samples(const Track& candidate, const Track& optimal, const MarketParams& m, const PathBundle& b,
                              const std::vector<int>& tau_index, const std::vector<int>& checkpoints);
SupermartingaleCheck supermartingale_verdict(const std::string& name, const std::vector<double>& times,
                                             const Track& samples);

struct Candidate {
    std::string name;
    Track rate;
};

// Checkpoint 0 is prepended when absent (the ratio starts at 1).
std::vector<SupermartingaleCheck> supermartingale_test(const std::vector<Candidate>& candidates, const Track& optimal,
                                                       const MarketParams& m, const HonestTimeModel& model,
                                                       const PathBundle& b, std::vector<double> checkpoints);

// Loadings of K^F at one (path, step): Brownian coefficient and the jump per arrival.
struct KFLoadings {
    double brownian;
    double jump;
};
KFLoadings kf_loadings(const MarketParams& m, double S_minus, double phi_rate, double phi_m1, double psi_m1,
                       double gamma1_value = 1.0);

// Per-step increments for the general existence condition on the jump-diffusion.
struct ExistenceInputs {
    Track V, H0_K, hE_m1, bracket, G_tilde, G_minus;
};
ExistenceInputs existence_inputs(const MarketParams& m, const HonestTimeModel& model, const ReducedComponents& r,
                                 const RateTracks& rates, const PathBundle& b);

}  // namespace aftertau
