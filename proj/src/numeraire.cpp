#include "aftertau/numeraire.hpp"

#include <cmath>
#include <limits>

namespace aftertau {

const char* to_string(SolveMethod m) {
    switch (m) {
        case SolveMethod::closed_form: return "closed_form";
        case SolveMethod::merton: return "merton";
        case SolveMethod::pure_jump: return "pure_jump";
        case SolveMethod::newton_bisection: return "newton_bisection";
    }
    return "?";
}

double klog(double y) {
    if (!(y > -1.0)) throw domain_error("klog: argument must exceed -1");
    return std::log1p(y) - y / (1.0 + y);
}

double foc_drift(const MarketParams& m, double S, double phi_m1, double psi_m1, double r) {
    return m.mu - m.lambda_ * m.zeta - m.sigma * phi_m1 - r * S * m.sigma * m.sigma +
           (1.0 - psi_m1) * m.lambda_ * m.zeta / (1.0 + r * m.zeta * S);
}

static double foc_slope(const MarketParams& m, double S, double psi_m1, double r) {
    const double x = m.zeta * S;
    const double d = 1.0 + r * x;
    return -S * m.sigma * m.sigma - (1.0 - psi_m1) * m.lambda_ * m.zeta * x / (d * d);
}

static RateSolution solve_closed(const MarketParams& m, double S, double phi_m1, double psi_m1) {
    if (!(S > 0)) throw invalid_argument("S_minus must be positive");
    if (!(psi_m1 > -1.0)) throw domain_error("psi_m1 must exceed -1");
    if (psi_m1 > 1.0) throw model_invalid("psi_m1 > 1 gives negative compensator mass");
    const double s2 = m.sigma * m.sigma;
    const double x = m.zeta * S;
    const double q = 1.0 - psi_m1;
    RateSolution sol;
    sol.margin = std::numeric_limits<double>::infinity();

    if (std::abs(x) < zeta_tol(m, S) || m.zeta == 0.0) {
        if (!(m.sigma > 0)) throw unsupported_operation("sigma = 0 with vanishing jumps");
        sol.method = SolveMethod::merton;
        sol.rate = (m.mu - m.lambda_ * m.zeta * psi_m1 - m.sigma * phi_m1) / (s2 * S);
    } else if (m.sigma == 0.0) {
        sol.method = SolveMethod::pure_jump;
        const double y = q * m.lambda_ * m.zeta / (m.lambda_ * m.zeta - m.mu);
        if (!(y > 0) || !std::isfinite(y)) throw boundary_divergence("pure-jump FOC has no interior root");
        sol.rate = (y - 1.0) / x;
    } else {
        sol.method = SolveMethod::closed_form;
        const double Lam = m.mu - m.lambda_ * m.zeta - m.sigma * phi_m1 + s2 / m.zeta;
        const double za = m.zeta * Lam;
        const double R = std::sqrt(Lam * Lam + 4.0 * s2 * m.lambda_ * q);
        // positive root of s2 y^2 - zeta Lam y - q lambda zeta^2 = 0, written without cancellation
        const double y = za >= 0 ? (za + std::abs(m.zeta) * R) / (2.0 * s2)
                                 : 2.0 * q * m.lambda_ * m.zeta * m.zeta / (std::abs(m.zeta) * R - za);
        if (!(y > 0)) throw boundary_divergence("after-tau FOC optimum sits on the admissible boundary");
        sol.rate = (y - 1.0) / x;
        // one Newton polish absorbs the rounding of (y - 1)
        for (int it = 0; it < 2; ++it) {
            const double g = foc_drift(m, S, phi_m1, psi_m1, sol.rate);
            const double nr = sol.rate - g / foc_slope(m, S, psi_m1, sol.rate);
            if (!(1.0 + nr * x > 0) ||
                !(std::abs(foc_drift(m, S, phi_m1, psi_m1, nr)) < std::abs(g)))
                break;
            sol.rate = nr;
            ++sol.iterations;
        }
    }
    if (x != 0.0) sol.margin = 1.0 + sol.rate * x;
    if (!(sol.margin > 0)) throw boundary_divergence("rate left the admissible interval");
    sol.foc_residual = std::abs(foc_drift(m, S, phi_m1, psi_m1, sol.rate));
    return sol;
}

RateSolution closed_form_lambda(const MarketParams& m, double S) { return solve_closed(m, S, 0.0, 0.0); }

RateSolution closed_form_phi(const MarketParams& m, double S, double phi_m1, double psi_m1) {
    return solve_closed(m, S, phi_m1, psi_m1);
}

double foc_generic_drift(const GCharacteristics& gc, double r) {
    double g = gc.b_G - gc.c_G * r;
    for (const auto& a : gc.atoms_G) g += a.w * (a.x / (1.0 + r * a.x) - trunc_h(a.x));
    return g;
}

static double foc_generic_slope(const GCharacteristics& gc, double r) {
    double d = -gc.c_G;
    for (const auto& a : gc.atoms_G) {
        const double u = 1.0 + r * a.x;
        d -= a.w * a.x * a.x / (u * u);
    }
    return d;
}

RateSolution solve_foc_generic(const GCharacteristics& gc, double tol) {
    Interval iv;
    bool any = false;
    for (const auto& a : gc.atoms_G) {
        if (a.w < 0) throw invalid_argument("solve_foc_generic: negative atom weight");
        if (a.w == 0 || a.x == 0) continue;
        any = true;
        if (a.x > 0) iv.lo = std::max(iv.lo, -1.0 / a.x);
        if (a.x < 0) iv.hi = std::min(iv.hi, -1.0 / a.x);
    }
    if (!(iv.lo < iv.hi)) throw invalid_argument("solve_foc_generic: empty admissible interval");
    if (!(gc.c_G > 0) && !any) {
        if (gc.b_G == 0) return RateSolution{0.0, 0.0, 0, SolveMethod::newton_bisection,
                                             std::numeric_limits<double>::infinity()};
        throw boundary_divergence("no diffusion and no jumps: linear growth in the rate");
    }
    auto g = [&](double r) { return foc_generic_drift(gc, r); };

    double r0 = gc.c_G > 0 ? gc.b_G / gc.c_G : 0.0;
    if (!(r0 > iv.lo)) r0 = std::isfinite(iv.hi) ? 0.5 * (iv.lo + iv.hi) : iv.lo + std::max(1.0, std::abs(iv.lo));
    if (!(r0 < iv.hi)) r0 = std::isfinite(iv.lo) ? 0.5 * (iv.lo + iv.hi) : iv.hi - std::max(1.0, std::abs(iv.hi));

    // bracket [a, c] with g(a) > 0 > g(c), expanding geometrically towards the boundary
    double a = r0, c = r0, ga = g(r0), gcv = ga;
    int iters = 0;
    if (ga == 0) return RateSolution{r0, 0.0, 0, SolveMethod::newton_bisection, 0.0};
    const double step = std::max(1.0, std::abs(r0));
    if (ga > 0) {
        for (int k = 0;; ++k) {
            const double nr = std::isfinite(iv.hi) ? iv.hi - (iv.hi - r0) * std::ldexp(1.0, -(k + 1))
                                                   : r0 + step * std::ldexp(1.0, k);
            if (!(nr < iv.hi) || nr == c || k > 1100 || !std::isfinite(nr))
                throw boundary_divergence("FOC drift keeps its sign up to the upper boundary");
            const double gn = g(nr);
            if (gn <= 0) {
                c = nr;
                gcv = gn;
                break;
            }
            a = nr;
            ga = gn;
        }
    } else {
        for (int k = 0;; ++k) {
            const double nr = std::isfinite(iv.lo) ? iv.lo + (r0 - iv.lo) * std::ldexp(1.0, -(k + 1))
                                                   : r0 - step * std::ldexp(1.0, k);
            if (!(nr > iv.lo) || nr == a || k > 1100 || !std::isfinite(nr))
                throw boundary_divergence("FOC drift keeps its sign down to the lower boundary");
            const double gn = g(nr);
            if (gn >= 0) {
                a = nr;
                ga = gn;
                break;
            }
            c = nr;
            gcv = gn;
        }
    }
    if (gcv == 0) return RateSolution{c, 0.0, 0, SolveMethod::newton_bisection, 0.0};
    if (ga == 0) return RateSolution{a, 0.0, 0, SolveMethod::newton_bisection, 0.0};

    double r = 0.5 * (a + c), best = r, best_g = std::numeric_limits<double>::infinity();
    for (iters = 1; iters <= 100; ++iters) {
        const double gr = g(r);
        if (!std::isfinite(gr)) throw internal_consistency("FOC drift not finite inside the bracket");
        if (std::abs(gr) < best_g) {
            best_g = std::abs(gr);
            best = r;
        }
        if (std::abs(gr) <= tol) break;
        if (gr > 0) a = r; else c = r;
        const double d = foc_generic_slope(gc, r);
        if (!(d < 0)) throw internal_consistency("FOC drift not strictly decreasing");
        double nr = r - gr / d;
        if (!(nr > a && nr < c)) nr = 0.5 * (a + c);
        if (nr == r || c - a <= 4 * std::numeric_limits<double>::epsilon() * std::abs(r)) break;
        r = nr;
    }
    RateSolution sol;
    sol.rate = best;
    sol.foc_residual = best_g;
    sol.iterations = std::min(iters, 100);
    sol.method = SolveMethod::newton_bisection;
    sol.margin = std::numeric_limits<double>::infinity();
    for (const auto& at : gc.atoms_G)
        if (at.w > 0) sol.margin = std::min(sol.margin, 1.0 + best * at.x);
    return sol;
}

RateSolution solve_foc_generic(const Characteristics& ch, double beta_m1, const std::vector<double>& f, double tol) {
    return solve_foc_generic(g_characteristics(ch, beta_m1, f), tol);
}

double gamma1(const Gamma1Inputs& in) {
    const double den = 1.0 - in.a + in.hat_f_op + in.hat_f_m1 - in.hat_f_op_f_m1;
    if (!(den > 0)) throw model_invalid("gamma1: non-positive denominator");
    return 1.0 / den;
}

double f_op(double rate, double x) {
    const double d = 1.0 + rate * x;
    if (!(d > 0)) throw domain_error("f_op: rate not admissible at this jump");
    return 1.0 / d;
}

double xi_tilde(double a, const std::vector<Atom>& atoms, double lambda_rate) {
    double inv = 1.0 - a;
    for (const auto& at : atoms) inv += at.w / (1.0 + lambda_rate * at.x);
    if (!(inv > 0)) throw model_invalid("xi_tilde: non-positive normaliser");
    return 1.0 / inv;
}

}  // namespace aftertau

namespace aftertau {

RateTracks optimal_rates(const MarketParams& m, const HonestTimeModel& model, const ReducedComponents& r,
                         const PathBundle& b) {
    const int n = b.grid.n_steps;
    RateTracks out;
    out.lambda_tilde.resize(b.n_paths, n);
    out.phi_tilde = Track::Zero(b.n_paths, n);
    Eigen::ArrayXd lres = Eigen::ArrayXd::Zero(b.n_paths), pres = Eigen::ArrayXd::Zero(b.n_paths);
    parallel_for(b.n_paths, [&](long p) {
        for (int k = 0; k < n; ++k) {
            const double S = b.S(p, k);
            const RateSolution l = closed_form_lambda(m, S);
            out.lambda_tilde(p, k) = l.rate;
            lres[p] = std::max(lres[p], l.foc_residual);
            if (model.G(p, k) < 1.0) {
                const RateSolution f = closed_form_phi(m, S, r.phi_m1(p, k), r.psi_m1(p, k));
                out.phi_tilde(p, k) = f.rate;
                pres[p] = std::max(pres[p], f.foc_residual);
            }
        }
    });
    out.max_lambda_residual = lres.maxCoeff();
    out.max_phi_residual = pres.maxCoeff();
    return out;
}

}  // namespace aftertau
