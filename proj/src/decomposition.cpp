#include "aftertau/decomposition.hpp"

#include <cmath>
#include <algorithm>

namespace aftertau {

static void check_aligned(const Characteristics& ch, const std::vector<double>& f) {
    if (f.size() != ch.atoms.size()) throw invalid_argument("f_m1 not aligned with atoms");
}

double pN1_integrand(double phi, double lam, const Characteristics& ch, double beta, const std::vector<double>& f,
                     double one_minus_G) {
    check_aligned(ch, f);
    const double d = phi - lam;
    double v = d * ch.b - d * ch.c * beta - 0.5 * phi * phi * ch.c + 0.5 * lam * lam * ch.c;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double x = ch.atoms[i].x, up = 1.0 + phi * x, ul = 1.0 + lam * x;
        if (!(up > 0) || !(ul > 0)) throw domain_error("pN1: rate not admissible at an atom");
        if (f[i] > 1.0) throw model_invalid("pN1: f_m1 > 1");
        v += ch.atoms[i].w * ((1.0 - f[i]) * std::log(up / ul) - d * trunc_h(x));
    }
    return one_minus_G * v;
}

double V_F_rate(double lam, const Characteristics& ch) {
    double v = lam * ch.b - lam * lam * ch.c;
    for (const auto& a : ch.atoms) v += a.w * (lam * a.x / (1.0 + lam * a.x) - lam * trunc_h(a.x));
    return v;
}

double V_1_rate(double phi, const Characteristics& ch, double beta, const std::vector<double>& f) {
    check_aligned(ch, f);
    double v = phi * (ch.b - ch.c * (beta + phi));
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double x = ch.atoms[i].x;
        v += ch.atoms[i].w * ((1.0 - f[i]) * phi * x / (1.0 + phi * x) - phi * trunc_h(x));
    }
    return v;
}

double delta_V_correction(double dV) {
    if (!(dV < 1.0)) throw domain_error("delta_V_correction: jump of V must be < 1");
    return -dV - std::log1p(-dV);
}

Eigen::ArrayXd V_F_increments(const Eigen::Ref<const Eigen::ArrayXd>& lam, const MarketParams& m, const PathBundle& b,
                              long p) {
    Eigen::ArrayXd out(b.grid.n_steps);
    for (int k = 0; k < b.grid.n_steps; ++k)
        out[k] = V_F_rate(lam[k], characteristics_of_S(m, b.S(p, k))) * b.grid.dt(k);
    return out;
}

Eigen::ArrayXd V_1_increments(const Eigen::Ref<const Eigen::ArrayXd>& phi, const MarketParams& m,
                              const ReducedComponents& r, const PathBundle& b, long p) {
    Eigen::ArrayXd out(b.grid.n_steps);
    for (int k = 0; k < b.grid.n_steps; ++k) {
        const double S = b.S(p, k);
        const Characteristics ch = characteristics_of_S(m, S);
        const double beta = m.sigma > 0 ? r.phi_m1(p, k) / (m.sigma * S) : 0.0;
        out[k] = V_1_rate(phi[k], ch, beta, std::vector<double>(ch.atoms.size(), r.psi_m1(p, k))) * b.grid.dt(k);
    }
    return out;
}

const char* term_name(int t) {
    static const char* names[] = {"cost_of_late_investment",
                                  "numeraire_change_premium",
                                  "npF_correlation",
                                  "information_premium_after_tau",
                                  "correlation_risk_after_tau",
                                  "delta_direct",
                                  "hellinger_total",
                                  "premium_total",
                                  "utility_F",
                                  "utility_G"};
    return t >= 0 && t < kTermCount ? names[t] : "?";
}

// One step of the log of the wealth of rate r.
static double log_wealth_step(const MarketParams& m, double r, double S, double dt, double dW, int arrivals) {
    const double x = m.zeta * S;
    double v = r * S * (m.mu - m.lambda_ * m.zeta) * dt + r * S * m.sigma * dW - 0.5 * r * r * m.sigma * m.sigma * S * S * dt;
    if (arrivals) v += arrivals * std::log1p(r * x);
    return v;
}

Track decomposition_samples(const MarketParams& m, const HonestTimeModel& model, const ReducedComponents& r,
                            const RateTracks& rates, const PathBundle& b) {
    const int n = b.grid.n_steps;
    const bool sampled = !model.formula_only();
    Track out = Track::Zero(b.n_paths, kTermCount);
    parallel_for(b.n_paths, [&](long p) {
        double t[kTermCount] = {};
        const int tau = sampled ? model.tau_index[p] : 0;
        for (int k = 0; k < n; ++k) {
            const double S = b.S(p, k), x = m.zeta * S, h = trunc_h(x), dt = b.grid.dt(k), dW = b.dW(p, k);
            const int arr = b.arrivals(p, k);
            const Characteristics ch = characteristics_of_S(m, S);
            const double bb = ch.b, c = ch.c;
            const double lt = rates.lambda_tilde(p, k), ph = rates.phi_tilde(p, k);
            const double G = model.G(p, k), g = G < 1.0 ? 1.0 - G : 0.0;
            const double pm = r.phi_m1(p, k), ps = r.psi_m1(p, k);
            const double cb = m.sigma * S * pm;  // c * beta_m1
            const double lx = lt * x / (1.0 + lt * x);

            const double dlogF = log_wealth_step(m, lt, S, dt, dW, arr);
            t[kUtilityF] += dlogF;

            // G-weighted Hellinger functional of the F-optimal deflator
            const double hF_dt = lt * bb - 0.5 * lt * lt * c + m.lambda_ * (lx - lt * h);
            const double kl = x != 0.0 ? klog(lt * x) : 0.0;
            const double Gt = G + (1.0 - G) * ps;  // G at an arrival
            t[kCost] += G * hF_dt * dt + arr * Gt * kl;

            if (g > 0) {
                const std::vector<double> f(ch.atoms.size(), ps);
                const double beta = m.sigma > 0 ? pm / (m.sigma * S) : 0.0;
                t[kPremium] += pN1_integrand(ph, lt, ch, beta, f, g) * dt;
                t[kNpCorrelation] += g * (-lt * cb - m.lambda_ * ps * lx) * dt;
                t[kInformation] += g * hE_m1_jump_diffusion_integrand(pm, -ps, m.lambda_) * dt;

                const KFLoadings K = kf_loadings(m, S, ph, pm, ps);
                const double V1 = V_1_rate(ph, ch, beta, f);
                double HG = g * (V1 + 0.5 * K.brownian * K.brownian) * dt;
                double HF = g * hF_dt * dt;
                if (arr && ps < 1.0) {
                    HG += arr * g * (1.0 - ps) * (K.jump - std::log1p(K.jump));
                    HF += arr * g * (1.0 - ps) * kl;
                }
                const double lc = -lt * m.sigma * S, jl = -lx;
                const double br = ((K.brownian - lc) * g * pm + m.lambda_ * (K.jump - jl) * g * ps) * dt;
                t[kCorrelationRisk] += -HG + HF - br;

                if (!sampled) {
                    const double uG = ph * (bb - cb - 0.5 * ph * c) +
                                      m.lambda_ * ((1.0 - ps) * std::log1p(ph * x) - ph * h);
                    t[kUtilityG] += g * uG * dt;
                }
            }
            if (sampled && k >= tau) t[kUtilityG] += log_wealth_step(m, ph, S, dt, dW, arr);
        }
        t[kDirect] = t[kUtilityG] - t[kUtilityF];
        t[kHellingerTotal] = -t[kCorrelationRisk] - t[kCost] + t[kNpCorrelation] + t[kInformation];
        t[kPremiumTotal] = -t[kCost] + t[kPremium] + t[kNpCorrelation];
        for (int i = 0; i < kTermCount; ++i) out(p, i) = t[i];
    });
    return out;
}

bool RiskDecomposition::consistent(double z) const {
    for (double r : consistency_residuals)
        if (!(r <= z)) return false;
    return true;
}

RiskDecomposition summarize_decomposition(const Track& s) {
    auto col = [&](int i) { return mc_stats(Eigen::ArrayXd(s.col(i))); };
    auto gap = [&](int i, int j) { return mc_stats(Eigen::ArrayXd(s.col(i) - s.col(j))); };
    RiskDecomposition d;
    d.n_paths = s.rows();
    d.cost_of_late_investment = col(kCost);
    d.numeraire_change_premium = col(kPremium);
    d.npF_correlation = col(kNpCorrelation);
    d.information_premium_after_tau = col(kInformation);
    d.correlation_risk_after_tau = col(kCorrelationRisk);
    d.delta_direct = col(kDirect);
    d.hellinger_total = col(kHellingerTotal);
    d.premium_total = col(kPremiumTotal);
    d.utility_F = col(kUtilityF);
    d.utility_G = col(kUtilityG);
    d.gap_hellinger_direct = gap(kHellingerTotal, kDirect);
    d.gap_premium_direct = gap(kPremiumTotal, kDirect);
    d.gap_hellinger_premium = gap(kHellingerTotal, kPremiumTotal);
    for (const MCStats* g : {&d.gap_hellinger_direct, &d.gap_premium_direct, &d.gap_hellinger_premium}) {
        // floor the SE at rounding level so cancellation noise is not read as a gap
        d.consistency_residuals.push_back(std::abs(g->mean) / std::max(g->std_error, 1e-12));
    }
    return d;
}

RiskDecomposition decompose_increment(const MarketParams& m, const HonestTimeModel& model, const PathBundle& b,
                                      const DecomposeOptions& opt) {
    const HonestTimeModel bound = model.formula_only() && !model.bound() ? bind(model, b) : model;
    const double eps = opt.guard_epsilon > 0 ? opt.guard_epsilon : default_guard(b.grid);
    const ExistenceReport ex = sufficient_condition_jump(bound, m, b, eps);
    if (ex.finite_verdict == Verdict::fail && !opt.force)
        throw existence_refused("log-optimal portfolio after tau not established: " + ex.diagnostic, ex);
    const ReducedComponents r = reduce_after_tau(bound, opt.clamp_floor, eps);
    const RateTracks rates = optimal_rates(m, bound, r, b);
    return summarize_decomposition(decomposition_samples(m, bound, r, rates, b));
}

}  // namespace aftertau
