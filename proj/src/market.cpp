#include "aftertau/market.hpp"

#include <cmath>
#include <ostream>

namespace aftertau {

void MarketParams::validate() const {
    if (!(zeta > -1.0)) throw invalid_argument("zeta must exceed -1");
    if (!(delta_floor > 0.0)) throw invalid_argument("delta_floor must be positive");
    if (!(sigma >= 0.0)) throw invalid_argument("sigma must be nonnegative");
    if (!(sigma + std::abs(zeta) >= delta_floor)) throw invalid_argument("ellipticity: sigma + |zeta| < delta_floor");
    if (!(S0 > 0.0)) throw invalid_argument("S0 must be positive");
    if (!(lambda_ > 0.0)) throw invalid_argument("lambda must be positive");
    if (!std::isfinite(mu)) throw invalid_argument("mu must be finite");
}

PathBundle simulate_paths(const MarketParams& m, const TimeGrid& grid, long n_paths, std::uint64_t seed,
                          long first_path, bool deterministic) {
    m.validate();
    if (n_paths < 1) throw invalid_argument("n_paths must be >= 1");
    const int n = grid.n_steps;
    PathBundle b;
    b.grid = grid;
    b.n_paths = n_paths;
    b.first_path = first_path;
    b.seed = seed;
    b.W.resize(n_paths, n + 1);
    b.S.resize(n_paths, n + 1);
    b.M.resize(n_paths, n + 1);
    b.N.resize(n_paths, n + 1);
    const double log_jump = std::log1p(m.zeta);
    parallel_for(n_paths, [&](long p) {
        auto eng = path_engine(seed, std::uint64_t(first_path + p), 0);
        std::normal_distribution<double> gauss;
        double w = 0, mx = 0, lg = 0;
        int cnt = 0;
        b.W(p, 0) = 0;
        b.M(p, 0) = 0;
        b.N(p, 0) = 0;
        b.S(p, 0) = m.S0;
        for (int k = 0; k < n; ++k) {
            const double dt = grid.dt(k);
            const double dw = std::sqrt(dt) * gauss(eng);
            std::poisson_distribution<int> pois(m.lambda_ * dt);
            const int j = pois(eng);
            w += dw;
            mx = std::max(mx, w);
            cnt += j;
            if (deterministic)
                lg += (m.mu - m.lambda_ * m.zeta) * dt;
            else
                lg += (m.mu - m.lambda_ * m.zeta - 0.5 * m.sigma * m.sigma) * dt + m.sigma * dw;
            if (j) lg += j * log_jump;
            b.W(p, k + 1) = deterministic ? 0.0 : w;
            b.M(p, k + 1) = deterministic ? 0.0 : mx;
            b.N(p, k + 1) = cnt;
            b.S(p, k + 1) = m.S0 * std::exp(lg);
        }
    });
    return b;
}

IncrementPath price_returns(const MarketParams& m, const PathBundle& b, long p) {
    const int n = b.grid.n_steps;
    Eigen::ArrayXd dW(n);
    for (int k = 0; k < n; ++k) dW[k] = b.dW(p, k);
    IncrementPath L(b.grid, dW);
    for (int k = 0; k < n; ++k) {
        L.drift[k] = (m.mu - m.lambda_ * m.zeta) * b.grid.dt(k);
        L.loading[k] = m.sigma;
        for (int j = 0; j < b.arrivals(p, k); ++j) L.jumps.push_back({k, m.zeta});
    }
    return L;
}

Characteristics characteristics_of_S(const MarketParams& m, double S_minus) {
    Characteristics ch;
    const double x = m.zeta * S_minus;
    ch.b = (m.mu - m.lambda_ * m.zeta * (std::abs(x) > 1.0 ? 1.0 : 0.0)) * S_minus;
    ch.c = (m.sigma * S_minus) * (m.sigma * S_minus);
    if (m.zeta != 0.0) ch.atoms.push_back({x, m.lambda_});
    return ch;
}

Interval admissible_interval(const MarketParams& m, double S_minus) {
    Interval iv;
    const double x = S_minus * m.zeta;
    if (x > 0) iv.lo = -1.0 / x;
    if (x < 0) iv.hi = -1.0 / x;
    return iv;
}

void write_paths_csv(std::ostream& os, const PathBundle& b) {
    os << "path_id,t,W,N,S,M\n";
    for (long p = 0; p < b.n_paths; ++p)
        for (int k = 0; k <= b.grid.n_steps; ++k)
            os << (b.first_path + p) << ',' << fmt17(b.grid.points[k]) << ',' << fmt17(b.W(p, k)) << ',' << b.N(p, k)
               << ',' << fmt17(b.S(p, k)) << ',' << fmt17(b.M(p, k)) << '\n';
}

}  // namespace aftertau
