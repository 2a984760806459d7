#pragma once

#include "aftertau/core.hpp"

#include <iosfwd>
#include <limits>

namespace aftertau {

struct MarketParams {
    double mu = 0.05;
    double sigma = 0.2;
    double zeta = 0.1;
    double lambda_ = 1.0;
    double S0 = 1.0;
    double delta_floor = 0.05;

    void validate() const;
};

struct PathBundle {
    TimeGrid grid;
    Track W, S, M;    // n_paths x (n_steps + 1)
    CountTrack N;
    long n_paths = 0;
    long first_path = 0;  // global id of row 0, so chunks reproduce a full run
    std::uint64_t seed = 0;

    double dW(long p, int k) const { return W(p, k + 1) - W(p, k); }
    int arrivals(long p, int k) const { return N(p, k + 1) - N(p, k); }
};

// deterministic: drop the Brownian driver (pure drift and jumps).
PathBundle simulate_paths(const MarketParams& m, const TimeGrid& grid, long n_paths, std::uint64_t seed,
                          long first_path = 0, bool deterministic = false);

// Return increments dS/S_- of one path: drift (mu - lambda zeta) dt, loading sigma on dW, jumps zeta.
IncrementPath price_returns(const MarketParams& m, const PathBundle& b, long p);

inline double trunc_h(double x) { return std::abs(x) <= 1.0 ? x : 0.0; }

struct Atom {
    double x;
    double w;
};

struct Characteristics {
    double b = 0;
    double c = 0;
    std::vector<Atom> atoms;
    const char* A_kind = "time";
};

Characteristics characteristics_of_S(const MarketParams& m, double S_minus);

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool contains(double r) const { return r > lo && r < hi; }
};

Interval admissible_interval(const MarketParams& m, double S_minus);

// path_id, t, W, N, S, M
void write_paths_csv(std::ostream& os, const PathBundle& b);

}  // namespace aftertau
