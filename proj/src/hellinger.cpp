#include "aftertau/hellinger.hpp"

#include <cmath>

namespace aftertau {

template <class Summand>
static Eigen::ArrayXd hellinger_cumulative(const IncrementPath& L, Summand f) {
    const int n = L.grid.n_steps;
    Eigen::ArrayXd inc = 0.5 * L.qv();
    for (const auto& j : L.jumps) {
        if (!(j.size > -1.0)) throw domain_error("Hellinger process: jump <= -1");
        inc[j.step] += f(j.size);
    }
    Eigen::ArrayXd out(n + 1);
    out[0] = 0;
    double acc = 0;
    for (int k = 0; k < n; ++k) out[k + 1] = acc += inc[k];
    return out;
}

Eigen::ArrayXd H0_path(const IncrementPath& L) {
    return hellinger_cumulative(L, [](double y) { return y - std::log1p(y); });
}

Eigen::ArrayXd HE_path(const IncrementPath& L) {
    return hellinger_cumulative(L, [](double y) { return (1.0 + y) * std::log1p(y) - y; });
}

double hE_m1_jump_diffusion_integrand(double phi, double psi, double lambda_) {
    if (!(psi > -1.0)) throw domain_error("hE integrand: psi_m1 must exceed -1");
    return 0.5 * phi * phi + lambda_ * ((1.0 + psi) * std::log1p(psi) - psi);
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

ExistenceReport existence_verdict(const ExistenceSamples& s, double guard_epsilon, double boundary_eta) {
    ExistenceReport r;
    r.guard_epsilon = guard_epsilon;
    r.boundary_eta = boundary_eta;
    if (s.coarse.size() < 2 || s.coarse.size() != s.fine.size())
        throw invalid_argument("existence: need at least 2 aligned path samples");
    if (!s.coarse.isFinite().all() || !s.fine.isFinite().all()) {
        r.finite_verdict = Verdict::fail;
        r.integral_estimate = std::numeric_limits<double>::infinity();
        r.diagnostic = "non-finite integrand on some path";
        return r;
    }
    const MCStats A = mc_stats(s.coarse), B = mc_stats(s.fine);
    const MCStats gap = mc_stats(Eigen::ArrayXd(s.fine - s.coarse));
    r.integral_estimate = A.mean;
    r.std_error = A.std_error;
    r.refined_estimate = B.mean;
    r.refined_std_error = B.std_error;
    r.refinement_gap = gap.mean;
    r.refinement_gap_se = gap.std_error;
    for (const auto& [name, v] : s.components) r.components[name] = mc_stats(v);
    if (s.window_steps == 0) {
        r.finite_verdict = Verdict::inconclusive;
        r.diagnostic = "empty effective window";
        return r;
    }
    const double scale = std::abs(B.mean);
    if (gap.mean <= std::max(3.0 * gap.std_error, 0.01 * scale)) {
        r.finite_verdict = Verdict::pass;
        r.diagnostic = "stable under guard refinement";
    } else if (gap.mean > 3.0 * gap.std_error && gap.mean > 0.05 * scale) {
        r.finite_verdict = Verdict::fail;
        r.diagnostic = "estimate grows under guard refinement: mass accumulates at the singular boundary";
    } else {
        r.finite_verdict = Verdict::inconclusive;
        r.diagnostic = "refinement gap significant but small";
    }
    return r;
}

ExistenceSamples sufficient_condition_samples(const HonestTimeModel& model, const MarketParams& m, const PathBundle& b,
                                              double eps, double eta) {
    if (!model.bound()) throw invalid_argument("sufficient condition: model has no G track");
    const auto& g = b.grid;
    const int Ka = guarded_steps(g, eps), Kb = guarded_steps(g, 0.5 * eps);
    const double eta_b = 0.1 * eta;
    const bool exact = model.exact_phi_m1.size() > 0;
    ExistenceSamples s;
    s.coarse = Eigen::ArrayXd::Zero(b.n_paths);
    s.fine = Eigen::ArrayXd::Zero(b.n_paths);
    Eigen::ArrayXd cont = Eigen::ArrayXd::Zero(b.n_paths), jump = Eigen::ArrayXd::Zero(b.n_paths);
    std::vector<long> counted(b.n_paths, 0);
    parallel_for(b.n_paths, [&](long p) {
        for (int k = 0; k < std::max(Ka, Kb); ++k) {
            const double G = model.G(p, k);
            if (!(G < 1.0)) continue;
            const double w = 1.0 - G;
            if (w < eta_b) continue;
            const double d = std::max(w, 1e-8);
            const double ph = exact ? model.exact_phi_m1(p, k) : model.phi_m(p, k) / d;
            const double ps = exact ? model.exact_psi_m1(p, k) : model.psi_m(p, k) / d;
            if (!(ps > -1.0)) throw domain_error("sufficient condition: psi_m1 <= -1");
            const double dt = g.dt(k);
            const double c = w * ph * ph * dt;
            const double j = w * m.lambda_ * ((1.0 + ps) * std::log1p(ps) - ps) * dt;
            if (k < Kb) s.fine[p] += c + j;
            if (k < Ka && w >= eta) {
                s.coarse[p] += c + j;
                cont[p] += c;
                jump[p] += j;
                ++counted[p];
            }
        }
    });
    s.components["brownian"] = cont;
    s.components["jump"] = jump;
    for (long c : counted) s.window_steps += c;
    if (Ka == 0) s.window_steps = 0;
    return s;
}

ExistenceReport sufficient_condition_jump(const HonestTimeModel& model, const MarketParams& m, const PathBundle& b,
                                          double eps) {
    return existence_verdict(sufficient_condition_samples(model, m, b, eps), eps, kBoundaryEta);
}

ExistenceSamples existence_general_samples(const Track& V, const Track& H0, const Track& hE, const Track& br,
                                           const Track& Gt, const Track& Gm, const TimeGrid& grid, double eps,
                                           double eta) {
    const long np = V.rows();
    const long n = grid.n_steps;
    for (const Track* t : {&V, &H0, &hE, &br, &Gt, &Gm})
        if (t->rows() != np || t->cols() < n) throw invalid_argument("existence: input length mismatch");
    const int Ka = guarded_steps(grid, eps), Kb = guarded_steps(grid, 0.5 * eps);
    ExistenceSamples s;
    s.coarse = Eigen::ArrayXd::Zero(np);
    s.fine = Eigen::ArrayXd::Zero(np);
    const char* names[] = {"V", "H0_K", "hE_m1", "bracket_K_m1"};
    const Track* parts[] = {&V, &H0, &hE, &br};
    Eigen::ArrayXXd comp = Eigen::ArrayXXd::Zero(np, 4);
    long steps = 0;
    for (long p = 0; p < np; ++p) {
        for (int k = 0; k < std::max(Ka, Kb); ++k) {
            const double band = 1.0 - Gm(p, k);
            const double w = 1.0 - Gt(p, k);
            double sum = 0;
            for (int i = 0; i < 4; ++i) sum += (*parts[i])(p, k);
            if (k < Kb && band >= 0.1 * eta) s.fine[p] += w * sum;
            if (k < Ka && band >= eta) {
                s.coarse[p] += w * sum;
                for (int i = 0; i < 4; ++i) comp(p, i) += w * (*parts[i])(p, k);
                ++steps;
            }
        }
    }
    for (int i = 0; i < 4; ++i) s.components[names[i]] = comp.col(i);
    // an all-zero model has an empty band but a well-defined zero integral
    s.window_steps = Ka > 0 ? std::max<long>(steps, 1) : 0;
    return s;
}

ExistenceReport existence_condition_general(const Track& V, const Track& H0, const Track& hE, const Track& br,
                                            const Track& Gt, const Track& Gm, const TimeGrid& grid, double eps) {
    return existence_verdict(existence_general_samples(V, H0, hE, br, Gt, Gm, grid, eps), eps, kBoundaryEta);
}

void append(ExistenceSamples& into, const ExistenceSamples& more) {
    auto cat = [](Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
        Eigen::ArrayXd c(a.size() + b.size());
        c << a, b;
        a = std::move(c);
    };
    cat(into.coarse, more.coarse);
    cat(into.fine, more.fine);
    for (const auto& [k, v] : more.components) cat(into.components[k], v);
    into.window_steps += more.window_steps;
}

}  // namespace aftertau
