#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace aftertau {

// Row-major so that one path is a contiguous row.
using Track = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CountTrack = Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct invalid_argument : std::invalid_argument { using std::invalid_argument::invalid_argument; };
struct domain_error : std::domain_error { using std::domain_error::domain_error; };
struct model_invalid : std::runtime_error { using std::runtime_error::runtime_error; };
struct unsupported_operation : std::runtime_error { using std::runtime_error::runtime_error; };
struct boundary_divergence : std::runtime_error { using std::runtime_error::runtime_error; };
struct internal_consistency : std::runtime_error { using std::runtime_error::runtime_error; };

struct TimeGrid {
    double T = 0;
    int n_steps = 0;
    Eigen::ArrayXd points;

    double dt(int k) const { return points[k + 1] - points[k]; }
    bool same_as(const TimeGrid& o) const { return n_steps == o.n_steps && (points == o.points).all(); }
};

TimeGrid make_grid(double T, int n_steps);

struct Jump {
    int step;
    double size;
};

// Skeleton of a semimartingale L: per step, drift + loading * driver, with
// qv = loading^2 * dt the predictable bracket of the continuous part.
// Jumps are sparse; several entries at one step compound.
struct IncrementPath {
    TimeGrid grid;
    Eigen::ArrayXd drift;
    Eigen::ArrayXd loading;
    Eigen::ArrayXd driver;  // shared Brownian increments, may be empty when loading is 0
    std::vector<Jump> jumps;

    explicit IncrementPath(const TimeGrid& g);
    IncrementPath(const TimeGrid& g, const Eigen::ArrayXd& dW);

    Eigen::ArrayXd continuous() const;  // drift + loading * driver
    Eigen::ArrayXd qv() const;          // loading^2 * dt
    Eigen::ArrayXd total() const;       // continuous + summed jumps
};

// a*X + b*Y with per-step coefficients; X and Y must share grid and driver.
IncrementPath combine(const Eigen::ArrayXd& a, const IncrementPath& X, const Eigen::ArrayXd& b, const IncrementPath& Y);
// X + Y + [X,Y]: continuous bracket via loadings, jumps paired at equal steps.
IncrementPath yor_sum(const IncrementPath& X, const IncrementPath& Y);

Eigen::ArrayXd stoch_exp(const IncrementPath& L);
Eigen::ArrayXd quadratic_covariation(const IncrementPath& X, const IncrementPath& Y);

struct MCStats {
    double mean = 0;
    double std_error = 0;
    long n_samples = 0;
};

MCStats mc_stats(const Eigen::Ref<const Eigen::ArrayXd>& samples);
inline MCStats mc_stats(const std::vector<double>& s) { return mc_stats(Eigen::Map<const Eigen::ArrayXd>(s.data(), long(s.size()))); }

// Counter-based split of a master seed.
std::uint64_t splitmix64(std::uint64_t x);
std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path_id, std::uint64_t stream);

unsigned thread_count();
// Calls f(i) for i in [0, n) on up to thread_count() threads; each index is visited once.
void parallel_for(long n, const std::function<void(long)>& f);

std::string fmt17(double x);

}  // namespace aftertau
