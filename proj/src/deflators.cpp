#include "aftertau/deflators.hpp"

#include <cmath>
#include <string>

namespace aftertau {

static std::string where(long p, int k) {
    return "(path " + std::to_string(p) + ", step " + std::to_string(k) + ")";
}

IncrementPath wealth_increments(const Eigen::Ref<const Eigen::ArrayXd>& rate, const MarketParams& m,
                                const PathBundle& b, long p, int tau_index) {
    IncrementPath X = brownian_skeleton(b, p);
    X.loading.setZero();
    for (int k = std::max(tau_index, 0); k < b.grid.n_steps; ++k) {
        const double S = b.S(p, k), r = rate[k];
        if (!(1.0 + r * m.zeta * S > 0)) throw domain_error("rate not admissible at " + where(b.first_path + p, k));
        X.drift[k] = r * S * (m.mu - m.lambda_ * m.zeta) * b.grid.dt(k);
        X.loading[k] = r * S * m.sigma;
        for (int j = 0; j < b.arrivals(p, k); ++j) X.jumps.push_back({k, r * m.zeta * S});
    }
    return X;
}

Track wealth_after_tau(const Track& rate, const MarketParams& m, const PathBundle& b, const std::vector<int>& tau) {
    Track out(b.n_paths, b.grid.n_steps + 1);
    parallel_for(b.n_paths, [&](long p) {
        out.row(p) = stoch_exp(wealth_increments(rate.row(p).transpose(), m, b, p, tau[p])).transpose();
    });
    return out;
}

static IncrementPath kg_increments(const Track& phi, const MarketParams& m, const HonestTimeModel& model,
                                   const ReducedComponents& r, const PathBundle& b, long p) {
    const int n = b.grid.n_steps;
    const int tau = model.tau_index[p];
    Eigen::ArrayXd dt = b.grid.points.tail(n) - b.grid.points.head(n);
    // brackets are handed over already divided by 1 - G_-, hence the zero G_- track
    const Eigen::ArrayXd none = Eigen::ArrayXd::Zero(n);
    const Eigen::ArrayXd bw = r.phi_m1.row(p).transpose() * dt;
    const Eigen::ArrayXd bn = r.psi_m1.row(p).transpose() * m.lambda_ * dt;
    const IncrementPath TW = transform_Ta(brownian_skeleton(b, p), bw, none, tau, 1.0);
    const IncrementPath TN = transform_Ta(compensated_poisson(m, b, p), bn, none, tau, 1.0);
    Eigen::ArrayXd a = Eigen::ArrayXd::Zero(n), c = Eigen::ArrayXd::Zero(n);
    for (int k = std::max(tau, 0); k < n; ++k) {
        const double S = b.S(p, k), f = phi(p, k), u = 1.0 + f * m.zeta * S;
        if (!(u > 0)) throw domain_error("deflator jump <= -1 at " + where(b.first_path + p, k));
        a[k] = -f * m.sigma * S;
        c[k] = -f * m.zeta * S / u;
    }
    return combine(a, TW, c, TN);
}

DeflatorPath build_KG(const Track& phi, const MarketParams& m, const HonestTimeModel& model, const ReducedComponents& r,
                      const PathBundle& b, bool keep) {
    DeflatorPath out;
    out.Z.resize(b.n_paths, b.grid.n_steps + 1);
    if (keep) out.K_increments.assign(b.n_paths, IncrementPath(b.grid));
    parallel_for(b.n_paths, [&](long p) {
        IncrementPath K = kg_increments(phi, m, model, r, b, p);
        out.Z.row(p) = stoch_exp(K).transpose();
        if (keep) out.K_increments[p] = std::move(K);
    });
    return out;
}

double duality_residual_path(const Track& rate, const Track& optimal, const MarketParams& m,
                             const HonestTimeModel& model, const ReducedComponents& r, const PathBundle& b, long p) {
    const Eigen::ArrayXd W = stoch_exp(wealth_increments(rate.row(p).transpose(), m, b, p, model.tau_index[p]));
    const Eigen::ArrayXd Z = stoch_exp(kg_increments(optimal, m, model, r, b, p));
    return (W * Z - 1.0).abs().maxCoeff();
}

Eigen::ArrayXd duality_residual(const Track& rate, const Track& optimal, const MarketParams& m,
                                const HonestTimeModel& model, const ReducedComponents& r, const PathBundle& b) {
    Eigen::ArrayXd out(b.n_paths);
    parallel_for(b.n_paths, [&](long p) { out[p] = duality_residual_path(rate, optimal, m, model, r, b, p); });
    return out;
}

std::vector<int> checkpoint_indices(const TimeGrid& g, const std::vector<double>& times) {
    std::vector<int> idx;
    for (double t : times) {
        if (t < 0 || t > g.T * (1 + 1e-12)) throw invalid_argument("checkpoint outside [0, T]");
        int best = 0;
        for (int k = 1; k <= g.n_steps; ++k)
            if (std::abs(g.points[k] - t) < std::abs(g.points[best] - t)) best = k;
        idx.push_back(best);
    }
    return idx;
}

Track supermartingale_samples(const Track& cand, const Track& opt, const MarketParams& m, const PathBundle& b,
                              const std::vector<int>& tau, const std::vector<int>& cp) {
    Track out(b.n_paths, long(cp.size()));
    parallel_for(b.n_paths, [&](long p) {
        const Eigen::ArrayXd Wc = stoch_exp(wealth_increments(cand.row(p).transpose(), m, b, p, tau[p]));
        const Eigen::ArrayXd Wo = stoch_exp(wealth_increments(opt.row(p).transpose(), m, b, p, tau[p]));
        for (std::size_t j = 0; j < cp.size(); ++j) out(p, long(j)) = Wc[cp[j]] / Wo[cp[j]];
    });
    return out;
}

SupermartingaleCheck supermartingale_verdict(const std::string& name, const std::vector<double>& times,
                                             const Track& s) {
    SupermartingaleCheck c;
    c.candidate = name;
    c.times = times;
    for (long j = 0; j < s.cols(); ++j) c.ratio.push_back(mc_stats(Eigen::ArrayXd(s.col(j))));
    for (long j = 1; j < s.cols(); ++j) {
        const MCStats d = mc_stats(Eigen::ArrayXd(s.col(j) - s.col(j - 1)));
        const double z = d.std_error > 0 ? d.mean / d.std_error : (d.mean > 1e-12 ? HUGE_VAL : 0.0);
        c.worst_increase_z.push_back(z);
        if (d.mean > 1e-12 && d.mean > 3.0 * d.std_error) c.verdict = Verdict::fail;
    }
    return c;
}

std::vector<SupermartingaleCheck> supermartingale_test(const std::vector<Candidate>& cands, const Track& opt,
                                                       const MarketParams& m, const HonestTimeModel& model,
                                                       const PathBundle& b, std::vector<double> times) {
    if (model.formula_only()) throw unsupported_operation("supermartingale test needs a sampled tau");
    if (times.empty() || times.front() > 0) times.insert(times.begin(), 0.0);
    const std::vector<int> cp = checkpoint_indices(b.grid, times);
    std::vector<SupermartingaleCheck> out;
    for (const auto& c : cands)
        out.push_back(supermartingale_verdict(c.name, times, supermartingale_samples(c.rate, opt, m, b,
                                                                                      model.tau_index, cp)));
    return out;
}

KFLoadings kf_loadings(const MarketParams& m, double S, double phi, double phi_m1, double psi_m1, double gamma1_value) {
    const double u = 1.0 + phi * m.zeta * S;
    if (!(u > 0)) throw domain_error("kf_loadings: rate not admissible");
    return {-phi * m.sigma * S - phi_m1, gamma1_value * (1.0 - psi_m1) / u - 1.0};
}

ExistenceInputs existence_inputs(const MarketParams& m, const HonestTimeModel& model, const ReducedComponents& r,
                                 const RateTracks& rates, const PathBundle& b) {
    const int n = b.grid.n_steps;
    ExistenceInputs in;
    for (Track* t : {&in.V, &in.H0_K, &in.hE_m1, &in.bracket, &in.G_tilde}) *t = Track::Zero(b.n_paths, n);
    in.G_minus = model.G.leftCols(n);
    in.G_tilde = in.G_minus;
    parallel_for(b.n_paths, [&](long p) {
        for (int k = 0; k < n; ++k) {
            const int arr = b.arrivals(p, k);
            if (arr) in.G_tilde(p, k) = model.G(p, k) + model.psi_m(p, k);
            if (!(model.G(p, k) < 1.0)) continue;
            const double S = b.S(p, k), x = m.zeta * S, dt = b.grid.dt(k);
            const Characteristics ch = characteristics_of_S(m, S);
            const double f = rates.phi_tilde(p, k), ph = r.phi_m1(p, k), ps = r.psi_m1(p, k);
            const double cb = m.sigma * S * ph;
            const KFLoadings K = kf_loadings(m, S, f, ph, ps);
            in.V(p, k) = (f * (ch.b - cb - ch.c * f) +
                          m.lambda_ * ((1.0 - ps) * f * x / (1.0 + f * x) - f * trunc_h(x))) * dt;
            double h0 = 0.5 * K.brownian * K.brownian * dt;
            if (arr && ps < 1.0) h0 += arr * (K.jump - std::log1p(K.jump));
            in.H0_K(p, k) = h0;
            in.hE_m1(p, k) = hE_m1_jump_diffusion_integrand(ph, -ps, m.lambda_) * dt;
            in.bracket(p, k) = (K.brownian * -ph + m.lambda_ * K.jump * -ps) * dt;
        }
    });
    return in;
}

}  // namespace aftertau
