#pragma once

#include "aftertau/numeraire.hpp"

#include <map>

namespace aftertau {

Eigen::ArrayXd H0_path(const IncrementPath& L);
Eigen::ArrayXd HE_path(const IncrementPath& L);

// 1/2 phi^2 + lambda((1+psi)ln(1+psi) - psi): entropy-Hellinger rate of a process with
// Brownian loading phi and Poisson(lambda) jumps of size psi.
double hE_m1_jump_diffusion_integrand(double phi_m1, double psi_m1, double lambda_);

enum class Verdict { pass, fail, inconclusive };
const char* to_string(Verdict v);

struct ExistenceReport {
    double integral_estimate = 0;
    double std_error = 0;
    Verdict finite_verdict = Verdict::inconclusive;
    double guard_epsilon = 0;
    double boundary_eta = 0;
    double refined_estimate = 0;  // at guard/2 and eta/10
    double refined_std_error = 0;
    double refinement_gap = 0;     // refined - coarse
    double refinement_gap_se = 0;  // joint std-error of the gap
    std::map<std::string, MCStats> components;
    std::string diagnostic;
};

// Per-path integrals at the two guard levels; components are evaluated at the coarse level.
struct ExistenceSamples {
    Eigen::ArrayXd coarse, fine;
    std::map<std::string, Eigen::ArrayXd> components;
    long window_steps = 0;
};

ExistenceReport existence_verdict(const ExistenceSamples& s, double guard_epsilon, double boundary_eta);

inline constexpr double kBoundaryEta = 1e-3;

ExistenceSamples sufficient_condition_samples(const HonestTimeModel& model, const MarketParams& m, const PathBundle& b,
                                              double guard_epsilon, double boundary_eta = kBoundaryEta);
ExistenceReport sufficient_condition_jump(const HonestTimeModel& model, const MarketParams& m, const PathBundle& b,
                                          double guard_epsilon);

// Per-step increments (n_paths x n_steps) of V, H0(K^F), h^E(m1) and <K^F, m1>, weighted by 1 - G_tilde.
// G_minus decides the boundary band.
ExistenceSamples existence_general_samples(const Track& V, const Track& K_H0, const Track& hE, const Track& bracket,
                                           const Track& G_tilde, const Track& G_minus, const TimeGrid& grid,
                                           double guard_epsilon, double boundary_eta = kBoundaryEta);
ExistenceReport existence_condition_general(const Track& V, const Track& K_H0, const Track& hE, const Track& bracket,
                                            const Track& G_tilde, const Track& G_minus, const TimeGrid& grid,
                                            double guard_epsilon);

// Append the per-path samples of `more` to `into` (chunked runs).
void append(ExistenceSamples& into, const ExistenceSamples& more);

}  // namespace aftertau
