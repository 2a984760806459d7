#include "aftertau/honest_time.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace aftertau {

const char* to_string(TauKind k) {
    switch (k) {
        case TauKind::independent: return "independent";
        case TauKind::brownian_argmax: return "brownian_argmax";
        case TauKind::synthetic: return "synthetic";
    }
    return "?";
}

TauLaw TauLaw::exp(double rate) {
    if (!(rate > 0) || !std::isfinite(rate)) throw invalid_argument("exponential tau: rate must be positive");
    TauLaw l;
    l.kind = exponential;
    l.rate = rate;
    return l;
}

TauLaw TauLaw::atoms(std::vector<double> times, std::vector<double> probs) {
    if (times.empty() || times.size() != probs.size()) throw invalid_argument("discrete tau: times/probs mismatch");
    double tot = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0) || !(probs[i] >= 0)) throw invalid_argument("discrete tau: negative time or mass");
        tot += probs[i];
    }
    if (std::abs(tot - 1.0) > 1e-12) throw invalid_argument("discrete tau: masses must sum to 1");
    TauLaw l;
    l.kind = discrete;
    l.times = std::move(times);
    l.probs = std::move(probs);
    return l;
}

double TauLaw::survival(double t) const {
    if (kind == exponential) return t <= 0 ? 1.0 : std::exp(-rate * t);
    double s = 0;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (times[i] > t) s += probs[i];
    return std::min(1.0, s);
}

double TauLaw::sample(std::mt19937_64& eng) const {
    if (kind == exponential) return std::exponential_distribution<double>(rate)(eng);
    std::discrete_distribution<std::size_t> d(probs.begin(), probs.end());
    return times[d(eng)];
}

HonestTimeModel independent_tau(const TauLaw& law, const PathBundle& b, std::uint64_t seed) {
    const auto& g = b.grid;
    if (!(law.survival(g.T) < 1.0)) throw invalid_argument("independent tau: P(tau <= T) = 0");
    const double at0 = law.kind == TauLaw::exponential ? 1.0 : [&] {
        double s = 0;
        for (std::size_t i = 0; i < law.times.size(); ++i)
            if (law.times[i] > 0) s += law.probs[i];
        return s;
    }();
    if (!(at0 > 0.0)) throw invalid_argument("independent tau: tau = 0 almost surely");

    const int n = g.n_steps;
    HonestTimeModel out;
    out.kind = TauKind::independent;
    out.grid = g;
    out.G.resize(b.n_paths, n + 1);
    out.phi_m = Track::Zero(b.n_paths, n + 1);
    out.psi_m = Track::Zero(b.n_paths, n + 1);
    Eigen::RowVectorXd surv(n + 1);
    for (int k = 0; k <= n; ++k) surv[k] = law.survival(g.points[k]);
    out.tau_index.resize(b.n_paths);
    out.tau_time.resize(b.n_paths);
    for (long p = 0; p < b.n_paths; ++p) {
        out.G.row(p) = surv.array();
        auto eng = path_engine(seed, std::uint64_t(b.first_path + p), 1);
        const double tau = law.sample(eng);
        out.tau_time[p] = tau;
        if (tau > g.T) {
            out.tau_index[p] = n + 1;
        } else {
            // first grid point at or beyond tau; the partial step (tau, t_j] is not traded
            const double* beg = g.points.data();
            out.tau_index[p] = int(std::lower_bound(beg, beg + n + 1, tau) - beg);
        }
    }
    return out;
}

HonestTimeModel argmax_tau(const PathBundle& b) {
    const auto& g = b.grid;
    const int n = g.n_steps;
    HonestTimeModel out;
    out.kind = TauKind::brownian_argmax;
    out.grid = g;
    out.G.resize(b.n_paths, n + 1);
    out.phi_m.resize(b.n_paths, n + 1);
    out.psi_m = Track::Zero(b.n_paths, n + 1);
    out.tau_index.resize(b.n_paths);
    out.tau_time.resize(b.n_paths);
    const double inv_sqrt2pi = 0.3989422804014327;
    parallel_for(b.n_paths, [&](long p) {
        int arg = 0;
        for (int k = 1; k <= n; ++k)
            if (b.W(p, k) > b.W(p, arg)) arg = k;
        out.tau_index[p] = arg;
        out.tau_time[p] = g.points[arg];
        for (int k = 0; k <= n; ++k) {
            const double Y = b.M(p, k) - b.W(p, k);
            const double s = g.T - g.points[k];
            if (s <= 0) {
                out.G(p, k) = Y == 0.0 ? 1.0 : 0.0;
                out.phi_m(p, k) = 0.0;
                continue;
            }
            const double z = Y / std::sqrt(s);
            out.G(p, k) = std::erfc(z / std::sqrt(2.0));
            out.phi_m(p, k) = 2.0 * inv_sqrt2pi * std::exp(-0.5 * z * z) / std::sqrt(s);
        }
    });
    return out;
}

HonestTimeModel synthetic_model(StateFn phi_m1, StateFn psi_m1, StateFn G_minus) {
    if (!phi_m1 || !psi_m1 || !G_minus) throw invalid_argument("synthetic model: missing component");
    const double psi0 = psi_m1(0.0, 1.0), g0 = G_minus(0.0, 1.0);
    if (!(psi0 > -1.0)) throw invalid_argument("synthetic model: psi_m1 must exceed -1");
    if (!(g0 > 0.0 && g0 <= 1.0)) throw invalid_argument("synthetic model: G_minus must lie in (0, 1]");
    HonestTimeModel out;
    out.kind = TauKind::synthetic;
    out.synthetic = SyntheticSpec{std::move(phi_m1), std::move(psi_m1), std::move(G_minus)};
    return out;
}

HonestTimeModel synthetic_constant(double phi_m1, double psi_m1, double G_minus) {
    return synthetic_model([=](double, double) { return phi_m1; }, [=](double, double) { return psi_m1; },
                           [=](double, double) { return G_minus; });
}

HonestTimeModel bind(const HonestTimeModel& model, const PathBundle& b) {
    if (!model.synthetic) throw invalid_argument("bind: not a synthetic model");
    const auto& spec = *model.synthetic;
    const int n = b.grid.n_steps;
    HonestTimeModel out = model;
    out.grid = b.grid;
    out.G.resize(b.n_paths, n + 1);
    out.phi_m.resize(b.n_paths, n + 1);
    out.psi_m.resize(b.n_paths, n + 1);
    out.exact_phi_m1.resize(b.n_paths, n + 1);
    out.exact_psi_m1.resize(b.n_paths, n + 1);
    out.tau_index.assign(b.n_paths, 0);
    out.tau_time.assign(b.n_paths, 0.0);
    for (long p = 0; p < b.n_paths; ++p) {
        for (int k = 0; k <= n; ++k) {
            const double t = b.grid.points[k], s = b.S(p, k);
            const double ph = spec.phi_m1(t, s), ps = spec.psi_m1(t, s), gm = spec.G_minus(t, s);
            if (!(ps > -1.0)) throw invalid_argument("synthetic model: psi_m1 must exceed -1");
            if (!(gm > 0.0 && gm <= 1.0)) throw invalid_argument("synthetic model: G_minus must lie in (0, 1]");
            if (!std::isfinite(ph)) throw invalid_argument("synthetic model: phi_m1 not finite");
            out.G(p, k) = gm;
            out.exact_phi_m1(p, k) = ph;
            out.exact_psi_m1(p, k) = ps;
            out.phi_m(p, k) = (1.0 - gm) * ph;
            out.psi_m(p, k) = (1.0 - gm) * ps;
        }
    }
    return out;
}

int guarded_steps(const TimeGrid& g, double eps) {
    if (eps <= 0) return g.n_steps;
    const double cut = g.T - eps + 1e-12 * g.T;
    int K = 0;
    while (K < g.n_steps && g.points[K] <= cut) ++K;
    return K;
}

ReducedComponents reduce_after_tau(const HonestTimeModel& model, double clamp_floor, double guard_epsilon) {
    if (!(clamp_floor > 0 && clamp_floor <= 1e-3)) throw invalid_argument("clamp_floor must lie in (0, 1e-3]");
    if (!model.bound()) throw invalid_argument("reduce_after_tau: synthetic model not bound to paths");
    const long np = model.G.rows();
    const int n = int(model.G.cols()) - 1;
    ReducedComponents r;
    r.clamp_floor = clamp_floor;
    r.phi_m1 = Track::Zero(np, n);
    r.psi_m1 = Track::Zero(np, n);
    r.one_minus_G_minus = Track::Zero(np, n);
    const int K = guarded_steps(model.grid, guard_epsilon);
    const bool exact = model.exact_phi_m1.size() > 0;
    for (long p = 0; p < np; ++p) {
        for (int k = 0; k < n; ++k) {
            const double G = model.G(p, k);
            if (!(G < 1.0)) continue;
            double d = 1.0 - G;
            if (d < clamp_floor) {
                d = clamp_floor;
                ++r.clamp_count;
            }
            r.one_minus_G_minus(p, k) = d;
            if (k >= K) continue;
            if (exact) {
                r.phi_m1(p, k) = model.exact_phi_m1(p, k);
                r.psi_m1(p, k) = model.exact_psi_m1(p, k);
            } else {
                r.phi_m1(p, k) = model.phi_m(p, k) / d;
                r.psi_m1(p, k) = model.psi_m(p, k) / d;
            }
        }
    }
    return r;
}

}  // namespace aftertau

namespace aftertau {

// m1 = -(1-G_-)^{-1} . m after tau: loading -phi_m1, drift psi_m1 lambda dt, jumps -psi_m1.
static IncrementPath m1_after(const ReducedComponents& r, const MarketParams& m, const PathBundle& b, long p, int from) {
    const int n = b.grid.n_steps;
    Eigen::ArrayXd dW(n);
    for (int k = 0; k < n; ++k) dW[k] = b.dW(p, k);
    IncrementPath L(b.grid, dW);
    for (int k = std::max(from, 0); k < n; ++k) {
        L.loading[k] = -r.phi_m1(p, k);
        L.drift[k] = r.psi_m1(p, k) * m.lambda_ * b.grid.dt(k);
        for (int j = 0; j < b.arrivals(p, k); ++j)
            if (r.psi_m1(p, k) != 0.0) L.jumps.push_back({k, -r.psi_m1(p, k)});
    }
    return L;
}

static double window_residual(const HonestTimeModel& model, const ReducedComponents& r, const MarketParams& m,
                              const PathBundle& b, long p, int anchor) {
    const int n = b.grid.n_steps;
    if (anchor >= n) return 0.0;
    const Eigen::ArrayXd E = stoch_exp(m1_after(r, m, b, p, anchor));
    const double base = 1.0 - model.G(p, anchor);
    double worst = 0.0;
    for (int k = anchor; k <= n; ++k) {
        const double lhs = (1.0 - model.G(p, k)) / base;
        const double rhs = E[k] / E[anchor];
        const double d = std::abs(lhs - rhs);
        if (!std::isfinite(d)) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, d);
    }
    return worst;
}

GtmResult gtm_identity_residual(const HonestTimeModel& model, const MarketParams& m, const PathBundle& b,
                                double clamp_floor) {
    if (model.formula_only()) throw unsupported_operation("GTM identity needs a sampled tau");
    const ReducedComponents r = reduce_after_tau(model, clamp_floor);
    GtmResult out;
    out.max_residual.resize(b.n_paths);
    out.anchored_max_residual.resize(b.n_paths);
    parallel_for(b.n_paths, [&](long p) {
        const int j = model.tau_index[p];
        out.max_residual[p] = window_residual(model, r, m, b, p, j);
        out.anchored_max_residual[p] = window_residual(model, r, m, b, p, j + 1);
    });
    for (long p = 0; p < b.n_paths; ++p)
        if (model.tau_index[p] >= b.grid.n_steps) ++out.empty_windows;
    return out;
}

void write_paths_csv(std::ostream& os, const PathBundle& b, const HonestTimeModel& model) {
    os << "path_id,t,W,N,S,M,tau_t,G,phi_m,psi_m\n";
    for (long p = 0; p < b.n_paths; ++p) {
        const bool has_tau = !model.tau_time.empty();
        const std::string tau = has_tau ? fmt17(model.tau_time[p]) : std::string("nan");
        for (int k = 0; k <= b.grid.n_steps; ++k)
            os << (b.first_path + p) << ',' << fmt17(b.grid.points[k]) << ',' << fmt17(b.W(p, k)) << ',' << b.N(p, k)
               << ',' << fmt17(b.S(p, k)) << ',' << fmt17(b.M(p, k)) << ',' << tau << ',' << fmt17(model.G(p, k))
               << ',' << fmt17(model.phi_m(p, k)) << ',' << fmt17(model.psi_m(p, k)) << '\n';
    }
}

}  // namespace aftertau
