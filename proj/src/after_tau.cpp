#include "aftertau/after_tau.hpp"

#include <cmath>

namespace aftertau {

GCharacteristics g_characteristics(const Characteristics& ch, double beta_m1, const std::vector<double>& f,
                                   bool active) {
    if (f.size() != ch.atoms.size()) throw invalid_argument("g_characteristics: f_m1 not aligned with atoms");
    GCharacteristics gc;
    gc.active = active;
    if (!active) return gc;
    gc.b_G = ch.b - ch.c * beta_m1;
    gc.c_G = ch.c;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (1.0 - f[i] < 0.0) throw model_invalid("g_characteristics: f_m1 > 1 gives negative compensator mass");
        gc.b_G -= trunc_h(ch.atoms[i].x) * f[i] * ch.atoms[i].w;
        gc.atoms_G.push_back({ch.atoms[i].x, ch.atoms[i].w * (1.0 - f[i])});
    }
    return gc;
}

GCharacteristics g_characteristics(const MarketParams& m, double S_minus, double phi_m1, double psi_m1, bool active) {
    const Characteristics ch = characteristics_of_S(m, S_minus);
    const double beta = m.sigma > 0 ? phi_m1 / (m.sigma * S_minus) : 0.0;
    return g_characteristics(ch, beta, std::vector<double>(ch.atoms.size(), psi_m1), active);
}

IncrementPath transform_Ta(const IncrementPath& M, const Eigen::ArrayXd& bracket, const Eigen::ArrayXd& G_minus,
                           int tau_index, double clamp_floor) {
    const int n = M.grid.n_steps;
    if (bracket.size() != n || G_minus.size() != n) throw invalid_argument("transform_Ta: track length mismatch");
    IncrementPath out(M.grid);
    out.driver = M.driver;
    for (int k = std::max(tau_index, 0); k < n; ++k) {
        out.drift[k] = M.drift[k];
        out.loading[k] = M.loading[k];
        if (G_minus[k] < 1.0) out.drift[k] += bracket[k] / std::max(1.0 - G_minus[k], clamp_floor);
    }
    for (const auto& j : M.jumps)
        if (j.step >= tau_index) out.jumps.push_back(j);
    return out;
}

IncrementPath brownian_skeleton(const PathBundle& b, long p) {
    const int n = b.grid.n_steps;
    Eigen::ArrayXd dW(n);
    for (int k = 0; k < n; ++k) dW[k] = b.dW(p, k);
    IncrementPath L(b.grid, dW);
    L.loading.setOnes();
    return L;
}

IncrementPath compensated_poisson(const MarketParams& m, const PathBundle& b, long p) {
    IncrementPath L(b.grid);
    for (int k = 0; k < b.grid.n_steps; ++k) {
        L.drift[k] = -m.lambda_ * b.grid.dt(k);
        for (int j = 0; j < b.arrivals(p, k); ++j) L.jumps.push_back({k, 1.0});
    }
    return L;
}

}  // namespace aftertau
