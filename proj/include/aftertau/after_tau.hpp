#pragma once

#include "aftertau/honest_time.hpp"

namespace aftertau {

struct GCharacteristics {
    double b_G = 0;
    double c_G = 0;
    std::vector<Atom> atoms_G;  // weights already scaled by 1 - f_m1
    bool active = true;
};

GCharacteristics g_characteristics(const Characteristics& ch, double beta_m1, const std::vector<double>& f_m1_at_atoms,
                                   bool active = true);

// Jump-diffusion reading: beta_m1 = phi_m1 / (sigma S_-), f_m1 = psi_m1 at the single atom.
GCharacteristics g_characteristics(const MarketParams& m, double S_minus, double phi_m1, double psi_m1,
                                   bool active = true);

// Continuous-bracket transform: zero before tau, drift + bracket/(1 - G_-) after, jumps copied after.
// bracket and G_minus are per-step.
IncrementPath transform_Ta(const IncrementPath& M, const Eigen::ArrayXd& bracket_mM, const Eigen::ArrayXd& G_minus,
                           int tau_index, double clamp_floor = 1e-8);

// W and compensated N^F skeletons of one path.
IncrementPath brownian_skeleton(const PathBundle& b, long p);
IncrementPath compensated_poisson(const MarketParams& m, const PathBundle& b, long p);

}  // namespace aftertau
