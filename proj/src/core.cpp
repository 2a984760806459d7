#include "aftertau/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace aftertau {

TimeGrid make_grid(double T, int n_steps) {
    if (!(T > 0) || !std::isfinite(T)) throw invalid_argument("make_grid: T must be positive");
    if (n_steps < 2) throw invalid_argument("make_grid: n_steps must be >= 2");
    TimeGrid g;
    g.T = T;
    g.n_steps = n_steps;
    g.points.resize(n_steps + 1);
    for (int k = 0; k <= n_steps; ++k) g.points[k] = T * k / n_steps;
    g.points[n_steps] = T;
    return g;
}

IncrementPath::IncrementPath(const TimeGrid& g)
    : grid(g), drift(Eigen::ArrayXd::Zero(g.n_steps)), loading(Eigen::ArrayXd::Zero(g.n_steps)) {}

IncrementPath::IncrementPath(const TimeGrid& g, const Eigen::ArrayXd& dW) : IncrementPath(g) {
    if (dW.size() != g.n_steps) throw invalid_argument("IncrementPath: driver length mismatch");
    driver = dW;
}

Eigen::ArrayXd IncrementPath::continuous() const {
    if (driver.size() == 0) return drift;
    return drift + loading * driver;
}

Eigen::ArrayXd IncrementPath::qv() const {
    Eigen::ArrayXd dt = grid.points.tail(grid.n_steps) - grid.points.head(grid.n_steps);
    return loading.square() * dt;
}

Eigen::ArrayXd IncrementPath::total() const {
    Eigen::ArrayXd d = continuous();
    for (const auto& j : jumps) d[j.step] += j.size;
    return d;
}

static void check_pair(const IncrementPath& X, const IncrementPath& Y) {
    if (!X.grid.same_as(Y.grid)) throw invalid_argument("grid mismatch");
}

static Eigen::ArrayXd shared_driver(const IncrementPath& X, const IncrementPath& Y) {
    if (X.driver.size() && Y.driver.size() && !(X.driver == Y.driver).all())
        throw invalid_argument("paths use different Brownian drivers");
    return X.driver.size() ? X.driver : Y.driver;
}

IncrementPath combine(const Eigen::ArrayXd& a, const IncrementPath& X, const Eigen::ArrayXd& b, const IncrementPath& Y) {
    check_pair(X, Y);
    IncrementPath out(X.grid);
    out.driver = shared_driver(X, Y);
    out.drift = a * X.drift + b * Y.drift;
    out.loading = a * X.loading + b * Y.loading;
    for (const auto& j : X.jumps) out.jumps.push_back({j.step, a[j.step] * j.size});
    for (const auto& j : Y.jumps) out.jumps.push_back({j.step, b[j.step] * j.size});
    std::stable_sort(out.jumps.begin(), out.jumps.end(), [](const Jump& l, const Jump& r) { return l.step < r.step; });
    return out;
}

// Jumps at one step are treated as a product of factors (1+j1)(1+j2)...; pairing X and Y
// entries in order keeps the Yor identity exact when both list the same arrivals.
IncrementPath yor_sum(const IncrementPath& X, const IncrementPath& Y) {
    check_pair(X, Y);
    IncrementPath out(X.grid);
    out.driver = shared_driver(X, Y);
    Eigen::ArrayXd dt = X.grid.points.tail(X.grid.n_steps) - X.grid.points.head(X.grid.n_steps);
    out.drift = X.drift + Y.drift + X.loading * Y.loading * dt;
    out.loading = X.loading + Y.loading;
    std::size_t i = 0, k = 0;
    while (i < X.jumps.size() || k < Y.jumps.size()) {
        if (k == Y.jumps.size() || (i < X.jumps.size() && X.jumps[i].step < Y.jumps[k].step)) {
            out.jumps.push_back(X.jumps[i++]);
        } else if (i == X.jumps.size() || Y.jumps[k].step < X.jumps[i].step) {
            out.jumps.push_back(Y.jumps[k++]);
        } else {
            const double x = X.jumps[i].size, y = Y.jumps[k].size;
            out.jumps.push_back({X.jumps[i].step, x + y + x * y});
            ++i;
            ++k;
        }
    }
    return out;
}

Eigen::ArrayXd stoch_exp(const IncrementPath& L) {
    const int n = L.grid.n_steps;
    Eigen::ArrayXd logc = L.continuous() - 0.5 * L.qv();
    Eigen::ArrayXd factor = Eigen::ArrayXd::Ones(n);
    for (const auto& j : L.jumps) {
        if (j.step < 0 || j.step >= n || !std::isfinite(j.size)) throw invalid_argument("stoch_exp: bad jump mark");
        factor[j.step] *= 1.0 + j.size;
    }
    Eigen::ArrayXd path(n + 1);
    path[0] = 1.0;
    double acc = 0.0, prod = 1.0;
    for (int k = 0; k < n; ++k) {
        acc += logc[k];
        prod *= factor[k];
        if (prod == 0.0) {  // a jump of -1 is absorbing
            path.tail(n - k).setZero();
            return path;
        }
        path[k + 1] = prod * std::exp(acc);
    }
    return path;
}

Eigen::ArrayXd quadratic_covariation(const IncrementPath& X, const IncrementPath& Y) {
    check_pair(X, Y);
    Eigen::ArrayXd p = X.total() * Y.total();
    Eigen::ArrayXd out(p.size() + 1);
    out[0] = 0.0;
    double acc = 0.0;
    for (long k = 0; k < p.size(); ++k) out[k + 1] = acc += p[k];
    return out;
}

MCStats mc_stats(const Eigen::Ref<const Eigen::ArrayXd>& s) {
    if (s.size() < 2) throw invalid_argument("mc_stats: need at least 2 samples");
    MCStats r;
    r.n_samples = s.size();
    r.mean = s.mean();
    const double var = (s - r.mean).square().sum() / double(s.size() - 1);
    r.std_error = std::sqrt(var / double(s.size()));
    return r;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path_id, std::uint64_t stream) {
    const std::uint64_t s = splitmix64(splitmix64(splitmix64(seed) ^ path_id) ^ stream);
    std::seed_seq seq{std::uint32_t(s), std::uint32_t(s >> 32)};
    return std::mt19937_64(seq);
}

unsigned thread_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("AFTERTAU_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) hw = std::min<unsigned>(hw, unsigned(v));
    }
    return hw;
}

void parallel_for(long n, const std::function<void(long)>& f) {
    const long nt = std::min<long>(thread_count(), n);
    if (nt <= 1) {
        for (long i = 0; i < n; ++i) f(i);
        return;
    }
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (long t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (long i = t * n / nt; i < (t + 1) * n / nt; ++i) f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace aftertau
