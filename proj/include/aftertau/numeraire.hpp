#pragma once

#include "aftertau/after_tau.hpp"

namespace aftertau {

enum class SolveMethod { closed_form, merton, pure_jump, newton_bisection };
const char* to_string(SolveMethod m);

struct RateSolution {
    double rate = 0;
    double foc_residual = 0;
    int iterations = 0;
    SolveMethod method = SolveMethod::closed_form;
    double margin = 0;  // 1 + rate * x at the most restrictive atom (inf without atoms)
};

double klog(double y);

inline double zeta_tol(const MarketParams& m, double S_minus) {
    return 1e-10 * m.sigma * m.sigma / std::max(S_minus, 1.0);
}

// Scalar after-tau FOC divided by S_-; psi_m1 = phi_m1 = 0 gives the F-market one.
double foc_drift(const MarketParams& m, double S_minus, double phi_m1, double psi_m1, double rate);

RateSolution closed_form_lambda(const MarketParams& m, double S_minus);
RateSolution closed_form_phi(const MarketParams& m, double S_minus, double phi_m1, double psi_m1);

// g(r) = b_G - c_G r + sum w_G (x/(1+rx) - h(x))
double foc_generic_drift(const GCharacteristics& gc, double r);
RateSolution solve_foc_generic(const GCharacteristics& gc, double tol = 1e-12);
RateSolution solve_foc_generic(const Characteristics& ch, double beta_m1, const std::vector<double>& f_m1_at_atoms,
                               double tol = 1e-12);

struct Gamma1Inputs {
    double a = 0;
    double hat_f_op = 0;
    double hat_f_m1 = 0;
    double hat_f_op_f_m1 = 0;
};

double gamma1(const Gamma1Inputs& in);

// (1 + rate x)^{-1}
double f_op(double rate, double x);

// Xi^{-1} = 1 - a + sum over fixed-time atoms nu({t}, dx)/(1 + rate x); empty atoms and a = 0 give 1.
double xi_tilde(double a, const std::vector<Atom>& fixed_time_atoms, double lambda_rate);

}  // namespace aftertau

namespace aftertau {

// Per-(path, step) optimal rates: lambda_tilde on the whole grid, phi_tilde on {G_- < 1} (0 elsewhere).
struct RateTracks {
    Track lambda_tilde, phi_tilde;
    double max_lambda_residual = 0;
    double max_phi_residual = 0;
};

RateTracks optimal_rates(const MarketParams& m, const HonestTimeModel& model, const ReducedComponents& r,
                         const PathBundle& b);

}  // namespace aftertau
